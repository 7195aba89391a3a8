"""Sampled (x, y) series used as the common input/output of simulations and fits."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class Trace:
    """A sampled series with axis metadata.

    ``sigma`` holds optional per-point uncertainties. ``meta`` carries free-form
    provenance (parameters used to generate the data, etc.).
    """

    x: np.ndarray
    y: np.ndarray
    sigma: Optional[np.ndarray] = None
    x_label: str = "x"
    y_label: str = "y"
    x_unit: str = ""
    y_unit: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError(
                f"x and y must be 1-D with equal length, got {self.x.shape} and {self.y.shape}"
            )
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
            if self.sigma.shape != self.x.shape:
                raise ValueError("sigma must match x in shape")

    def __len__(self):
        return self.x.size

    @property
    def is_uniform(self) -> bool:
        if self.x.size < 3:
            return True
        dx = np.diff(self.x)
        return bool(np.allclose(dx, dx[0], rtol=1e-9, atol=0.0))

    @property
    def step(self) -> float:
        if not self.is_uniform:
            raise ValueError("trace is not uniformly sampled")
        return float(self.x[1] - self.x[0])

    def with_y(self, y, **changes) -> "Trace":
        """Copy with new ordinate values (and optionally other fields)."""
        kw = dict(
            x=self.x.copy(),
            y=y,
            sigma=None if self.sigma is None else self.sigma.copy(),
            x_label=self.x_label,
            y_label=self.y_label,
            x_unit=self.x_unit,
            y_unit=self.y_unit,
            meta=dict(self.meta),
        )
        kw.update(changes)
        return Trace(**kw)


#: Spectra are traces whose abscissa is a frequency or detuning.
Spectrum = Trace
