from .config import ConfigError, ExperimentSpec, TMaxRule, load_spec, spec_from_dict
from .diagnostics import DiagnosticsReport, InsufficientData, diagnostics
from .experiment import ReplicateRecord, replicate_seeds, run_experiment, run_replicate
from .output import emit_boxplot_svg, emit_csv, emit_summary_csv, read_records_csv
from .summary import EmptyCell, SummaryRow, summarize
