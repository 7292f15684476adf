from .condense import condense, format_condense_csv
from .fdr import fdr_correct
from .harvest import HarvestRow, TestResult, format_harvest_csv, harvest, \
    parse_harvest_csv, run_level_tests
from .mixed import MixedFit, fit_crossed, ols, permutation_test
from .success import add_zscores, format_success_csv, task_success

__all__ = ["condense", "format_condense_csv", "fdr_correct", "HarvestRow", "TestResult",
           "format_harvest_csv", "harvest", "parse_harvest_csv", "run_level_tests",
           "MixedFit", "fit_crossed", "ols", "permutation_test", "add_zscores",
           "format_success_csv", "task_success"]
