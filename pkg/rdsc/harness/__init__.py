from .config import ExperimentConfig, parse_config
from .experiments import run_defense_eval, run_experiment, run_transform_study, run_vulnerability_sweep
from .report import Report, ReportRow, emit_report, load_report
