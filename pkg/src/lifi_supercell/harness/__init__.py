"""Experiment harness: UE sampling, sweep runners, CSV output and the CLI."""
from .experiments import EXPERIMENTS, ExperimentSpec, ResultTable, Row, m_for_density, run_experiment
from .output import read_metadata, read_rows, render_csv, write_csv
from .sampling import sample_realization

__all__ = [
    "EXPERIMENTS",
    "ExperimentSpec",
    "ResultTable",
    "Row",
    "m_for_density",
    "read_metadata",
    "read_rows",
    "render_csv",
    "run_experiment",
    "sample_realization",
    "write_csv",
]
