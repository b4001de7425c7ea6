from .config import RunConfig, SweepGrid, derive_seed
from .export import export_command
from .pipeline import Run, eval_run, run_pipeline
from .sweep import CSV_HEADER, run_sweep
