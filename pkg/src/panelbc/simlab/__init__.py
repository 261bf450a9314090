"""Simulation designs, the Monte Carlo engine and registered result tables."""

from .dgp import GENERATOR, DgpConfig, Truth, generate
from .montecarlo import (
    CHI2_2_95,
    EstimatorSpec,
    McSummary,
    Replication,
    SummaryRow,
    parse_estimator,
    replication_rng,
    run_monte_carlo,
    run_replications,
    summarize,
    summarize_replications,
    wald_test,
)
from .tables import TABLES, TableResult, TableSpec, format_table, replicate_table, table_spec

__all__ = [
    "CHI2_2_95",
    "DgpConfig",
    "EstimatorSpec",
    "GENERATOR",
    "McSummary",
    "Replication",
    "SummaryRow",
    "TABLES",
    "TableResult",
    "TableSpec",
    "Truth",
    "format_table",
    "generate",
    "parse_estimator",
    "replicate_table",
    "replication_rng",
    "run_monte_carlo",
    "run_replications",
    "summarize",
    "summarize_replications",
    "table_spec",
    "wald_test",
]
