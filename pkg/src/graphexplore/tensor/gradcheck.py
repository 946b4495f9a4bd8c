"""Finite-difference gradient verification for any parameters->scalar function."""

from __future__ import annotations

import numpy as np

from .core import Tape


def grad_check(fn, params, eps=1e-5):
    """Compare analytic gradients of fn against central finite differences.

    fn takes the name-keyed parameter map and returns a scalar Tensor; it must
    be pure (same params, same value). Returns the max over all coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    if eps == 0:
        raise ValueError("grad_check: eps must be nonzero")
    with Tape() as tape:
        loss = fn(params)
    if not np.all(np.isfinite(loss.data)):
        raise ValueError("grad_check: fn returned non-finite value")
    analytic = tape.gradients(loss, params=params.values())
    worst = 0.0
    for name, p in params.items():
        a = analytic[p].data
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(fn(params).data)
            flat[i] = orig - eps
            lo = float(fn(params).data)
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise ValueError(f"grad_check: fn returned non-finite value perturbing {name!r}")
            numeric = (hi - lo) / (2.0 * eps)
            ana = float(a.reshape(-1)[i])
            err = abs(ana - numeric) / max(1e-8, abs(ana) + abs(numeric))
            if err > worst:
                worst = err
    return worst
