"""Shared sample container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Dataset:
    """One estimation sample.

    ``h_true`` is the confounding component evaluated at the sample points;
    it is only available for simulated data and is required by the oracle
    estimator.
    """

    y: np.ndarray
    x: np.ndarray
    Z: np.ndarray
    h_true: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.Z = np.asarray(self.Z, dtype=float)
        if self.Z.ndim == 1:
            self.Z = self.Z.reshape(-1, 1)
        n = self.y.size
        if self.x.size != n or self.Z.shape[0] != n:
            raise ValueError("y, x and Z must share the sample dimension")
        if self.h_true is not None:
            self.h_true = np.asarray(self.h_true, dtype=float).reshape(-1)
            if self.h_true.size != n:
                raise ValueError("h_true length does not match the sample")

    @property
    def n(self) -> int:
        return self.y.size
