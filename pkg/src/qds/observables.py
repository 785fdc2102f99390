"""Bounded observables f: circle -> R with declared sup and Lipschitz data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAU = 2.0 * math.pi


@dataclass(frozen=True, eq=False)
class Observable:
    """Evaluator plus the bounds used in error and interpolation estimates.

    Kinds: 'cosine'/'sine' (k-th harmonic), 'tent', or 'tabulated' (values on
    a uniform grid, evaluated by periodic linear interpolation).
    """

    name: str
    kind: str
    harmonic: int = 1
    table: np.ndarray | None = field(default=None, repr=False)
    sup_norm: float = 1.0
    lipschitz_constant: float = TAU
    lebesgue_mean: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "cosine":
            return np.cos(TAU * self.harmonic * x)
        if self.kind == "sine":
            return np.sin(TAU * self.harmonic * x)
        if self.kind == "tent":
            return 1.0 - 2.0 * np.abs(x - 0.5)
        if self.kind == "tabulated":
            k = len(self.table)
            return np.interp(x * k, np.arange(k + 1),
                             np.concatenate([self.table, self.table[:1]]))
        raise ValueError(f"unknown observable kind {self.kind!r}")


def cosine(k: int = 1) -> Observable:
    return Observable(name=f"cos{k}", kind="cosine", harmonic=k,
                      sup_norm=1.0, lipschitz_constant=TAU * k,
                      lebesgue_mean=0.0)


def sine(k: int = 1) -> Observable:
    return Observable(name=f"sin{k}", kind="sine", harmonic=k,
                      sup_norm=1.0, lipschitz_constant=TAU * k,
                      lebesgue_mean=0.0)


def tent() -> Observable:
    return Observable(name="tent", kind="tent", sup_norm=1.0,
                      lipschitz_constant=2.0, lebesgue_mean=0.5)


def tabulated(values, name: str) -> Observable:
    """Observable from samples on the uniform grid i/len(values)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) < 2:
        raise ValueError("tabulated observable needs a 1-d table of >= 2 values")
    k = len(values)
    closed = np.concatenate([values, values[:1]])
    lip = float(np.max(np.abs(np.diff(closed))) * k)
    # mean of the periodic linear interpolant equals the trapezoid mean
    mean = float(np.mean(values))
    return Observable(name=name, kind="tabulated", table=values,
                      sup_norm=float(np.max(np.abs(values))),
                      lipschitz_constant=lip, lebesgue_mean=mean)


def from_callable(fn, name: str, resolution: int = 8192) -> Observable:
    """Tabulate an arbitrary callable on a uniform grid."""
    grid = np.arange(resolution) / resolution
    return tabulated(fn(grid), name=name)


def cosine_squared() -> Observable:
    """cos^2(2 pi x), tabulated; its interpolant has Lebesgue mean exactly 1/2."""
    return from_callable(lambda x: np.cos(TAU * x) ** 2, name="cos2")


def constant(c: float, name: str | None = None) -> Observable:
    return tabulated([float(c)] * 2, name=name or f"const{c:g}")


def default_dictionary() -> tuple[Observable, ...]:
    """Finite stand-in for bounded continuous test functions: harmonics + tent."""
    return (cosine(1), cosine(2), cosine(3), cosine(4), tent())


_PARSERS = {
    "tent": tent,
    "cos2": cosine_squared,
}


def parse_observable(token: str) -> Observable:
    """Parse config tokens like 'cos:2', 'sin:1', 'tent', 'cos2'."""
    token = token.strip()
    if token in _PARSERS:
        return _PARSERS[token]()
    if ":" in token:
        kind, _, arg = token.partition(":")
        k = int(arg)
        if kind == "cos":
            return cosine(k)
        if kind == "sin":
            return sine(k)
    raise ValueError(f"cannot parse observable token {token!r}")
