"""Discrete fields on the unit torus [-1/2, 1/2)^d with a Fourier eigenbasis.

Spectral coefficients use the real-FFT half layout with forward
normalisation, so that ``u(x) = sum_m c_m exp(2 pi i m.x)`` exactly on the
grid and the mean of ``|u|^2`` over grid points equals ``sum_m |c_m|^2``.
Physical points are ordered like ``numpy.fft.fftfreq`` (0, 1/N, ..., -1/N),
which keeps every coordinate inside [-1/2, 1/2) without phase factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "build_grid",
    "transform",
    "heat_propagate",
    "gradient",
    "divergence",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TorusGrid:
    """Uniform N^d lattice on the unit torus with its Laplacian eigenstructure.

    Attributes are computed once and made read-only, so a grid can be
    shared freely between workers.
    """

    d: int
    N: int
    wavevectors: np.ndarray = field(init=False, repr=False, compare=False)
    eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    mode_weights: np.ndarray = field(init=False, repr=False, compare=False)
    ik: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.N < 4 or self.N % 2:
            raise ValueError(f"modes per axis must be even and >= 4, got {self.N}")
        N, d = self.N, self.d
        full = np.fft.fftfreq(N, 1.0 / N).round().astype(np.int64)
        half = np.arange(N // 2 + 1, dtype=np.int64)
        axes = [full] * (d - 1) + [half]
        m = np.stack(np.meshgrid(*axes, indexing="ij"))
        # fftfreq labels the Nyquist index -N/2; use +N/2 as the documented range
        m = np.where(m == -N // 2, N // 2, m)
        alpha = 4.0 * np.pi**2 * np.sum(m.astype(float) ** 2, axis=0)

        last = m[-1]
        weights = np.where((last > 0) & (last < N // 2), 2.0, 1.0)

        # odd derivatives of the self-conjugate Nyquist component are dropped
        k = np.where(np.abs(m) == N // 2, 0, m).astype(float)
        ik = 2j * np.pi * k

        mask = np.all(np.abs(m) <= N // 3, axis=0)

        object.__setattr__(self, "wavevectors", _frozen(m))
        object.__setattr__(self, "eigenvalues", _frozen(alpha))
        object.__setattr__(self, "mode_weights", _frozen(weights))
        object.__setattr__(self, "ik", _frozen(ik))
        object.__setattr__(self, "dealias_mask", _frozen(mask))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    def coordinates(self) -> np.ndarray:
        """Physical point coordinates, shape ``(d, N, ..., N)``."""
        x = np.fft.fftfreq(self.N)
        return np.stack(np.meshgrid(*([x] * self.d), indexing="ij"))

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values, axes=self.axes, norm="forward")

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.shape, axes=self.axes, norm="forward")

    def heat_factor(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"negative propagation time {t}")
        return np.exp(-self.eigenvalues * t)

    def mode_sum(self, values: np.ndarray) -> np.ndarray:
        """Sum a conjugate-even per-mode quantity over the full spectrum."""
        return np.sum(values * self.mode_weights, axis=self.axes)

    def full_spectrum(self, coeffs: np.ndarray) -> np.ndarray:
        """Expand half-layout coefficients to the full ``fftn`` layout."""
        return np.fft.fftn(self.to_physical(coeffs), axes=self.axes, norm="forward")

    def mean(self, values: np.ndarray) -> np.ndarray:
        return np.mean(values, axis=self.axes)


def build_grid(d: int, N: int) -> TorusGrid:
    return TorusGrid(d, N)


@dataclass
class Field:
    """Scalar or d-vector field on a grid, in physical or spectral form.

    Vector fields carry the component index on the leading axis.
    """

    grid: TorusGrid
    data: np.ndarray
    spectral: bool = False
    vector: bool = False

    def __post_init__(self):
        data = np.asarray(self.data)
        base = self.grid.spectral_shape if self.spectral else self.grid.shape
        want = ((self.grid.d,) + base) if self.vector else base
        if data.shape != want:
            raise ValueError(f"field data has shape {data.shape}, expected {want}")
        self.data = data

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "Field":
        x = grid.coordinates()
        return cls(grid, np.asarray(fn(*x), dtype=float) * np.ones(grid.shape))

    def physical(self) -> "Field":
        return transform(self, "physical")

    def coefficients(self) -> "Field":
        return transform(self, "spectral")


def transform(f: Field, target: str) -> Field:
    if target not in ("physical", "spectral"):
        raise ValueError(f"unknown representation {target!r}")
    want_spectral = target == "spectral"
    if f.spectral == want_spectral:
        return f
    g = f.grid
    data = g.to_spectral(f.data) if want_spectral else g.to_physical(f.data)
    return Field(g, data, spectral=want_spectral, vector=f.vector)


def heat_propagate(f: Field, t: float) -> Field:
    """Apply the heat semigroup S(t) mode by mode."""
    if not f.spectral:
        raise ValueError("heat_propagate expects a spectral field")
    return Field(f.grid, f.data * f.grid.heat_factor(t), spectral=True, vector=f.vector)


def gradient(f: Field) -> Field:
    if not f.spectral:
        raise ValueError("gradient expects a spectral field")
    if f.vector:
        raise ValueError("gradient of a vector field is not supported")
    return Field(f.grid, f.grid.ik * f.data, spectral=True, vector=True)


def divergence(f: Field) -> Field:
    if not f.spectral:
        raise ValueError("divergence expects a spectral field")
    if not f.vector:
        raise ValueError("divergence needs a d-vector field")
    return Field(f.grid, np.sum(f.grid.ik * f.data, axis=0), spectral=True)
