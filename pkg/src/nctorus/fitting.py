"""Least-squares power-law fits on log-log data, shared by the diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SlopeFit:
    """Fitted exponent of y ~ C x^exponent with residual diagnostics."""

    exponent: float
    intercept: float
    residual: float
    fit_range: tuple = (None, None)
    degenerate: bool = False
    points: int = 0

    def as_dict(self):
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "residual": self.residual,
            "fit_range": list(self.fit_range),
            "degenerate": self.degenerate,
            "points": self.points,
        }


def power_law_fit(x, y, fit_range=None):
    """Fit log y = exponent * log x + intercept over fit_range (inclusive in x).

    Zero or negative y values are dropped; fewer than two usable points give
    a degenerate fit (NaN exponent).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if fit_range is None:
        lo, hi = float(np.min(x)), float(np.max(x))
    else:
        lo, hi = float(fit_range[0]), float(fit_range[1])
        if not (np.min(x) <= lo <= hi <= np.max(x)):
            raise ValueError("fit range must lie within the data")
    mask = (x >= lo) & (x <= hi) & (y > 0) & (x > 0)
    if int(np.sum(mask)) < 2:
        return SlopeFit(float("nan"), float("nan"), float("nan"), (lo, hi),
                        degenerate=True, points=int(np.sum(mask)))
    lx = np.log(x[mask])
    ly = np.log(y[mask])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ sol - ly) ** 2)))
    return SlopeFit(float(sol[0]), float(sol[1]), resid, (lo, hi),
                    points=int(np.sum(mask)))
