"""Power-law fits for decay measurements.

Everything downstream that claims "decays like t^a" goes through
:func:`fit_decay`, so the slope, the fit window, and the residual always
travel together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DecayFit", "fit_decay"]

# Log-residuals above this make the straight-line model meaningless.
RELIABLE_RESIDUAL = 0.5


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through (log abscissa, log value)."""

    exponent: float
    prefactor: float
    residual: float
    window: tuple[float, float]
    n_samples: int

    @property
    def reliable(self) -> bool:
        return self.residual <= RELIABLE_RESIDUAL

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "residual": self.residual,
            "window": list(self.window),
            "n_samples": self.n_samples,
            "reliable": self.reliable,
        }


def fit_decay(samples) -> DecayFit:
    """Fit value = prefactor * abscissa**exponent to (abscissa, value) pairs.

    Needs at least 5 samples with positive abscissae and values; the
    residual field is the max absolute log-residual of the fit.
    """
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a sequence of (abscissa, value) pairs")
    if arr.shape[0] < 5:
        raise ValueError(f"need at least 5 samples to fit a decay law, got {arr.shape[0]}")
    x, y = arr[:, 0], arr[:, 1]
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError("abscissae must be positive and finite")
    if np.any(y <= 0.0) or not np.all(np.isfinite(y)):
        raise ValueError("values must be positive and finite")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return DecayFit(
        exponent=float(slope),
        prefactor=float(np.exp(intercept)),
        residual=resid,
        window=(float(np.min(x)), float(np.max(x))),
        n_samples=int(arr.shape[0]),
    )
