"""Bounds and verification for small ReLU networks."""

import json

from ._relubound import (
    Error,
    Network,
    PerturbationSet,
    crown_bounds,
    exact_range,
    ibp_bounds,
    network_confidence,
    union_sample_size,
    wilks_sample_size,
    worst_case_probability,
)
from . import _relubound as _ext

__all__ = [
    "Error",
    "Network",
    "PerturbationSet",
    "compare",
    "crown_bounds",
    "exact_range",
    "ibp_bounds",
    "network_confidence",
    "pt_lirpa_bounds",
    "union_sample_size",
    "verify",
    "wilks_sample_size",
    "worst_case_probability",
]


def pt_lirpa_bounds(net, region, samples=10000, seed=0, p=None, apply_evt=True):
    """Sampled (and by default EVT-widened) bounds; returns the report dict."""
    return json.loads(_ext.pt_lirpa_bounds(net, region, samples, seed, p, apply_evt))


def compare(net, region, with_oracle=False, samples=10000, seed=0, timing=True):
    """One report row per method, ordered oracle (if requested), ibp, crown, pt-lirpa."""
    return json.loads(_ext.compare(net, region, with_oracle, samples, seed, timing))


def verify(net, region, method="pt-lirpa", samples=10000, timeout=30.0, seed=0, workers=1, timing=True):
    """Branch and bound on output > 0 over the region; returns the verdict dict."""
    return json.loads(_ext.verify(net, region, method, samples, timeout, seed, workers, timing))
