"""Kinetic Langevin solvers with shared weighted Brownian noise."""

import json as _json

from _uldyn import (
    __version__,
    cbar,
    epsilon_bar,
    estimate_p,
    exact_moments,
    level_variance_identity_holds,
    scd_chain_count,
    semigroup,
    simulate,
    upper_rate_constant,
    upsilon,
)
from _uldyn import converge_json as _converge_json
from _uldyn import weak_json as _weak_json


def converge(solver, potential, d, ell, L, T, ns, trials, seed, workers=1):
    """Strong-error experiment; returns the summary as a dict."""
    return _json.loads(_converge_json(solver, potential, d, ell, L, T, list(ns), trials, seed, workers))


def weak(u, L, T, h_list):
    """Deterministic weak-order experiment; returns the summary as a dict."""
    return _json.loads(_weak_json(u, L, T, list(h_list)))


__all__ = [
    "__version__",
    "cbar",
    "converge",
    "epsilon_bar",
    "estimate_p",
    "exact_moments",
    "level_variance_identity_holds",
    "scd_chain_count",
    "semigroup",
    "simulate",
    "upper_rate_constant",
    "upsilon",
    "weak",
]
