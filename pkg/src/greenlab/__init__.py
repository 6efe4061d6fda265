"""Green function approximation for conormal Stokes systems."""
from .coefficients import (CoefficientField, adjoint, certify_ellipticity, checkerboard, from_descriptor,
                           identity, skew_checkerboard)
from .errors import GreenlabError
from .geometry import (PolygonalDomain, certify_flatness, certify_lipschitz, chain_of_balls, flat_disk,
                       flat_ellipse, flat_stadium, lipschitz_disk, lipschitz_square)
from .green import (GreenColumn, GreenTable, approx_green, duality_identity, green_table, green_values,
                    probe_points, representation_check)
from .mesh import TriMesh, triangulate
from .norms import Region, holder_seminorm, inequality_ratio, lq_norm, weak_l2
from .stokes_fem import DiscreteField, DiscreteSystem, assemble, mollified_delta, solve_conormal

__version__ = "0.1.0"
