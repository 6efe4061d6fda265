"""Verification harness: plans, suites, reports and plots."""
from .plan import DEFAULTS, DOMAIN_PRESETS, SUITES, ExperimentPlan, load_preset, parse_override
from .report import SuiteReport, merge_reports
from .suites import RUNNERS, run_chain_suite, run_plan, run_symmetry_suite, run_theorem_m1

__all__ = ["DEFAULTS", "DOMAIN_PRESETS", "SUITES", "ExperimentPlan", "load_preset", "parse_override",
           "SuiteReport", "merge_reports", "RUNNERS", "run_chain_suite", "run_plan", "run_symmetry_suite",
           "run_theorem_m1"]
