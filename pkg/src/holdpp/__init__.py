"""Critically damped higher-order Langevin dynamics for score-based generative modeling."""

from .dynamics import (
    DriftSpec,
    ForwardStats,
    build_drift,
    critical_params,
    default_spec,
    expm_critical,
    forward_stats,
    ou_spec,
    ou_stats,
)

__version__ = "0.1.0"

__all__ = [
    "DriftSpec",
    "ForwardStats",
    "build_drift",
    "critical_params",
    "default_spec",
    "expm_critical",
    "forward_stats",
    "ou_spec",
    "ou_stats",
]
