"""Log-log rate fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    residual: float
    n_points: int


def fit_rate(points):
    """Least-squares fit of ``log(value) = exponent * log(eps) + intercept``.

    Parameters
    ----------
    points : iterable of (eps, value)
        Points with a nonpositive value are dropped with a warning.

    Returns
    -------
    RateFit
        ``residual`` is the RMS deviation in log space.
    """
    pts = [(float(e), float(v)) for e, v in points]
    kept = []
    for e, v in pts:
        if not (e > 0 and np.isfinite(e)):
            raise ValueError(f"epsilon must be positive, got {e}")
        if v > 0 and np.isfinite(v):
            kept.append((e, v))
        else:
            log.warning("dropping point eps=%g with nonpositive value %g", e, v)
    if len(kept) < 3:
        raise ValueError(f"need at least 3 positive points to fit a rate, have {len(kept)}")
    x = np.log([e for e, _ in kept])
    y = np.log([v for _, v in kept])
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return RateFit(float(coef[0]), float(coef[1]), rms, len(kept))
