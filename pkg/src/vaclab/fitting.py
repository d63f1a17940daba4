"""Power-law envelope fitting of time series in log-log coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log(y) = log(constant) + exponent * log(1+t).

    ``log_corrected`` records whether the series was divided by
    (1 + ln(1+t)) before fitting; ``residual`` is the RMS misfit in log
    space over the window.
    """

    exponent: float
    constant: float
    window: tuple[float, float]
    residual: float
    log_corrected: bool
    n_samples: int
    n_excluded: int


class FitWindowError(ValueError):
    """Raised when the requested fit window is empty or too short."""


def decay_fit(t, series, window: tuple[float, float] | None = None,
              log_corrected: bool = False, min_samples: int = 4) -> DecayFit:
    """Fit a power law (optionally with a logarithmic correction factor).

    Nonpositive samples are excluded and counted; the fit needs at least
    ``min_samples`` surviving points.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(series, dtype=float)
    if t.shape != y.shape:
        raise ValueError("time and series arrays must have matching shapes")
    if window is None:
        window = (float(t.min()), float(t.max()))
    lo, hi = window
    in_window = (t >= lo) & (t <= hi)
    positive = y > 0.0
    keep = in_window & positive
    n_excluded = int(np.count_nonzero(in_window) - np.count_nonzero(keep))
    if np.count_nonzero(keep) < min_samples:
        raise FitWindowError(
            f"fit window [{lo:g}, {hi:g}] keeps {int(np.count_nonzero(keep))} "
            f"positive samples; need at least {min_samples}"
        )
    tt = np.log1p(t[keep])
    yy = y[keep]
    if log_corrected:
        yy = yy / (1.0 + np.log1p(t[keep]))
    yy = np.log(yy)
    design = np.column_stack([np.ones_like(tt), tt])
    coef, *_ = np.linalg.lstsq(design, yy, rcond=None)
    resid = yy - design @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return DecayFit(
        exponent=float(coef[1]),
        constant=float(np.exp(coef[0])),
        window=(float(lo), float(hi)),
        residual=rms,
        log_corrected=log_corrected,
        n_samples=int(np.count_nonzero(keep)),
        n_excluded=n_excluded,
    )
