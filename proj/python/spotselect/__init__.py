"""Python bindings for the synthetic feature selection pipeline."""

from ._spot import (
    advantage,
    attention,
    clipped_objective_term,
    ema_smooth,
    gen_dataset,
    harmonic_mean,
    positional_encoding,
    ppo_loss,
    prob_ratio,
    run_experiment,
    softmax_rows,
)

__all__ = [
    "advantage",
    "attention",
    "clipped_objective_term",
    "ema_smooth",
    "gen_dataset",
    "harmonic_mean",
    "positional_encoding",
    "ppo_loss",
    "prob_ratio",
    "run_experiment",
    "softmax_rows",
]
