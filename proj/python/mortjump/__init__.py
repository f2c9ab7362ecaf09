"""Bayesian Lee-Carter mortality models with vanishing jumps."""

from ._core import (
    Fit,
    MortjumpError,
    __version__,
    admissible_ma_roots,
    crps,
    ess_bulk,
    ess_tail,
    fit,
    improvement_rates,
    jump_path,
    load_table,
    log_score,
    loo,
    recover_ar_coefficient,
    rhat,
    run_cli,
    simulate,
    waic,
)


def error_code(exc: MortjumpError) -> str:
    """The machine-readable code of a MortjumpError, e.g. ``"ShapeError"``."""
    return str(exc).split(":", 1)[0]


__all__ = [
    "Fit",
    "MortjumpError",
    "__version__",
    "admissible_ma_roots",
    "crps",
    "error_code",
    "ess_bulk",
    "ess_tail",
    "fit",
    "improvement_rates",
    "jump_path",
    "load_table",
    "log_score",
    "loo",
    "recover_ar_coefficient",
    "rhat",
    "run_cli",
    "simulate",
    "waic",
]
