"""Sampled wave fields on the half line.

A WaveField is a complex-valued snapshot u(x, t) on an increasing grid
starting at x = 0. Fields produced by the Dirichlet propagators vanish
at the origin within scheme tolerance; nothing here enforces that on
construction, the propagator tests do.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DataError, DomainError

__all__ = [
    "WaveField",
    "gaussian_packet",
    "tent_packet",
    "load_wave_field",
    "save_wave_field",
]

_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class WaveField:
    x_grid: np.ndarray
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.x_grid, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if x.ndim != 1 or v.shape != x.shape:
            raise DataError("x_grid and values must be matching 1-d arrays")
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise DataError("x_grid must be strictly increasing")
        if x[0] < -1e-12:
            raise DomainError("fields live on the half line x >= 0")
        object.__setattr__(self, "x_grid", x)
        object.__setattr__(self, "values", v)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.trapezoid(np.abs(self.values) ** 2,
                                          self.x_grid)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def inner(self, other: "WaveField") -> complex:
        """Trapezoid L2 inner product (conjugate-linear in ``other``)."""
        if other.x_grid.shape != self.x_grid.shape or \
                np.max(np.abs(other.x_grid - self.x_grid)) > 1e-12:
            raise DataError("inner product needs matching grids")
        return complex(np.trapezoid(self.values * np.conj(other.values),
                                    self.x_grid))

    def with_values(self, values, time: float | None = None) -> "WaveField":
        return replace(self, values=np.asarray(values, dtype=complex),
                       time=self.time if time is None else float(time))


def gaussian_packet(x_grid, width: float = 1.0,
                    momentum: float = 0.0) -> WaveField:
    """phi(x) = x e^{-x^2/width^2 + i momentum x}; vanishes at x = 0."""
    x = np.asarray(x_grid, dtype=float)
    vals = x * np.exp(-((x / width) ** 2) + 1j * momentum * x)
    return WaveField(x, vals, 0.0)


def tent_packet(x_grid, width: float = 1.0) -> WaveField:
    """Piecewise-linear tent on [0, width], peak 1 at width/2."""
    x = np.asarray(x_grid, dtype=float)
    vals = np.clip(1.0 - np.abs(2.0 * x / width - 1.0), 0.0, None)
    return WaveField(x, vals.astype(complex), 0.0)


def save_wave_field(field: WaveField, path, sidecar: dict | None = None):
    """CSV columns x, Re u, Im u; metadata goes to a .json sidecar."""
    path = str(path)
    with open(path, "w") as fh:
        fh.write("x,re_u,im_u\n")
        for x, v in zip(field.x_grid.tolist(), field.values.tolist()):
            fh.write(f"{x!r},{v.real!r},{v.imag!r}\n")
    meta = {"schema_version": _SCHEMA_VERSION, "t": field.time}
    meta.update(sidecar or {})
    with open(path + ".json", "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_wave_field(path) -> tuple[WaveField, dict]:
    path = str(path)
    try:
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        with open(path + ".json") as fh:
            meta = json.load(fh)
        field = WaveField(data[:, 0], data[:, 1] + 1j * data[:, 2],
                          float(meta.get("t", 0.0)))
    except (OSError, ValueError, IndexError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read wave field from {path}: {exc}") from exc
    return field, meta
