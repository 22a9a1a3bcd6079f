from .config import BuiltProblem, ConfigError, StudyConfig, build_problem, load_config
from .study import (
    Reference,
    StudyRecord,
    fit_rate,
    rates_from_summary,
    read_records,
    run_nominal,
    run_reference,
    run_study,
    summarize,
)
