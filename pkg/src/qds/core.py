"""Triangular arrays of maps, orbit evolution, and the ergodic functional.

Level n of a triangular array prescribes the nonautonomous orbit
x_{n,0} = x,  x_{n,k} = T_{n,k}(x_{n,k-1}),  1 <= k <= n, and the running
time-average is interpolated into a continuous path

    zeta_n(x, t) = (1/n) * [ sum_{k < floor(nt)} f(x_{n,k})
                             + (nt - floor(nt)) * f(x_{n,floor(nt)}) ].

Orbits of maps that are exactly linear (x -> m*x mod 1) are evolved on the
rational lattice p/q with q = LATTICE_MODULUS instead of in floating point:
binary floating-point states lose one significand bit per doubling and hit
the fixed point 0 within ~53 steps, which would silently destroy every
statistic of a long orbit.  On the lattice the step is p -> m*p mod q,
exact and free of short cycles.  Float projections of lattice states agree
with direct float evaluation of the map to within 2 ulps per step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .circle import as_circle_point, reduce_mod1
from .errors import ConfigurationError, GridMismatchError
from .maps import AMPLITUDE_TO_C1, TAU, CurveSpec, ExpandingMapParams
from .observables import Observable
from .sampling import LATTICE_MAX_DEGREE, LATTICE_MODULUS

_Q = LATTICE_MODULUS
_CHUNK = 1024  # fixed ensemble chunk; must not depend on the thread count


@dataclass(frozen=True)
class TriangularArrayScheme:
    """How level n, step k picks its map from the curve.

    canonical:  T_{n,k} = gamma_{k/n}.
    perturbed:  amplitude jittered by +-scale * n^(-eta) in the C^1 metric
                (alternating sign in k), a deliberately non-canonical array
                that still satisfies the n^(-eta) convergence rate.
    """

    curve: CurveSpec
    mode: str = "canonical"
    perturbation_scale: float = 0.0

    def __post_init__(self):
        if self.mode not in ("canonical", "perturbed"):
            raise ConfigurationError(f"unknown scheme mode {self.mode!r}")
        if self.perturbation_scale < 0.0:
            raise ConfigurationError("perturbation_scale must be >= 0")
        if self.mode == "perturbed" and self.perturbation_scale > 0.0:
            # worst-case jitter occurs at n = 1; keep every level admissible
            worst = self.curve.max_amplitude() + self.perturbation_scale / AMPLITUDE_TO_C1
            for piece in self.curve.pieces:
                if piece.degree - worst < self.curve.bounds.lam:
                    raise ConfigurationError(
                        "perturbation_scale leaves no admissibility margin"
                    )

    def map_params(self, n: int, k: int) -> ExpandingMapParams:
        base = self.curve.params_at(k / n)
        if self.mode == "canonical" or self.perturbation_scale == 0.0:
            return base
        delta = (self.perturbation_scale / AMPLITUDE_TO_C1)
        delta *= float(n) ** (-self.curve.holder_exponent)
        if k % 2:
            delta = -delta
        return ExpandingMapParams(base.degree, base.amplitude + delta, base.phase)

    @property
    def uses_lattice(self):
        return (
            self.mode == "canonical"
            and self.curve.is_linear
            and all(p.degree <= LATTICE_MAX_DEGREE for p in self.curve.pieces)
        )


def default_t_grid(n: int, resolution: int = 513) -> np.ndarray:
    """Uniform grid of `resolution` points, plus every breakpoint k/n when
    n <= 4096 (zeta_n is piecewise linear with exactly those breakpoints)."""
    grid = np.linspace(0.0, 1.0, resolution)
    if n <= 4096:
        grid = np.union1d(grid, np.arange(n + 1) / n)
    return grid


def _validate_t_grid(t_grid):
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d array")
    if np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be ascending")
    if t[0] < 0.0 or t[-1] > 1.0:
        raise ValueError("t_grid must lie inside [0, 1]")
    return t


def _capture_plan(n, t_grid):
    nt = n * t_grid
    kk = np.minimum(np.floor(nt).astype(np.int64), n)
    frac = nt - kk
    uniq, inverse = np.unique(kk, return_inverse=True)
    return kk, frac, uniq, inverse


def _float_step(x, p: ExpandingMapParams):
    if p.amplitude == 0.0 and p.degree <= LATTICE_MAX_DEGREE:
        # exact-lattice round trip; see module docstring
        lat = np.round(x * _Q).astype(np.uint64) % np.uint64(_Q)
        lat = (np.uint64(p.degree) * lat) % np.uint64(_Q)
        return lat.astype(np.float64) / _Q
    y = p.degree * x + (p.amplitude / TAU) * np.sin(TAU * x + p.phase)
    return reduce_mod1(y)


def _lattice_step(p_state, p: ExpandingMapParams):
    return (np.uint64(p.degree) * p_state) % np.uint64(_Q)


def _lattice_project(p_state):
    return p_state.astype(np.float64) / _Q


def floats_to_lattice(x):
    return (np.round(np.asarray(x, dtype=np.float64) * _Q).astype(np.uint64)
            % np.uint64(_Q))


@dataclass(frozen=True)
class ErgodicPath:
    """zeta_n(x, .) sampled on a t-grid (piecewise-linear in t between
    breakpoints k/n); Lipschitz in t with constant sup|f|."""

    n: int
    t_grid: np.ndarray
    values: np.ndarray
    lipschitz_bound: float

    def __post_init__(self):
        t = _validate_t_grid(self.t_grid)
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ValueError("ErgodicPath t_grid must contain 0 and 1")
        if self.values.shape != t.shape:
            raise ValueError("values and t_grid shapes differ")
        if self.values[0] != 0.0:
            raise ValueError("zeta at t=0 must vanish")

    @property
    def final_average(self):
        return float(self.values[-1])


@dataclass(frozen=True)
class SupDistance:
    """Grid maximum of |a - b| plus a rigorous off-grid correction bound."""

    value: float
    grid_error_bound: float


def sup_distance(path_a: ErgodicPath, path_b: ErgodicPath) -> SupDistance:
    if not np.array_equal(path_a.t_grid, path_b.t_grid):
        raise GridMismatchError("paths sampled on different t-grids")
    gap = float(np.max(np.abs(path_a.values - path_b.values)))
    h = float(np.max(np.diff(path_a.t_grid)))
    bound = (path_a.lipschitz_bound + path_b.lipschitz_bound) * h / 2.0
    return SupDistance(value=gap, grid_error_bound=bound)


def evolve_orbit(x, n: int, scheme: TriangularArrayScheme) -> np.ndarray:
    """Orbit (x_{n,0}, ..., x_{n,n}) of length n + 1; x_{n,0} = x."""
    x = as_circle_point(x)
    if n < 1:
        raise ValueError(f"array level must be >= 1, got {n}")
    out = np.empty(n + 1)
    out[0] = x
    if scheme.uses_lattice:
        state = floats_to_lattice(np.array([x]))
        for k in range(1, n + 1):
            state = _lattice_step(state, scheme.map_params(n, k))
            out[k] = float(_lattice_project(state)[0])
        return out
    state = np.array([x])
    for k in range(1, n + 1):
        state = _float_step(state, scheme.map_params(n, k))
        out[k] = float(state[0])
    return out


def observable_sequence(f: Observable, orbit) -> np.ndarray:
    """(f(x_{n,0}), ..., f(x_{n,n})); entry 0 is f itself evaluated at x."""
    orbit = np.asarray(orbit, dtype=np.float64)
    if orbit.size == 0:
        raise ValueError("orbit must be nonempty")
    return np.asarray(f(orbit), dtype=np.float64)


def zeta_values_from_observations(f_values, n: int, t_grid) -> np.ndarray:
    """Evaluate the interpolation formula from tabulated f(x_{n,k}) values.

    f_values has length n + 1 (index k = 0..n); the value at k = n only
    matters through its zero-weight endpoint term.
    """
    f_values = np.asarray(f_values, dtype=np.float64)
    if f_values.shape != (n + 1,):
        raise ValueError(f"need n + 1 = {n + 1} observation values")
    t = _validate_t_grid(t_grid)
    kk, frac, _, _ = _capture_plan(n, t)
    prefix = np.concatenate([[0.0], np.cumsum(f_values)])
    return (prefix[kk] + frac * f_values[kk]) / n


def zeta_path(f: Observable, x, n: int, scheme: TriangularArrayScheme,
              t_grid=None) -> ErgodicPath:
    """The interpolated time-average path zeta_n(x, .) on the grid."""
    if t_grid is None:
        t_grid = default_t_grid(n)
    orbit = evolve_orbit(x, n, scheme)
    values = zeta_values_from_observations(observable_sequence(f, orbit), n, t_grid)
    return ErgodicPath(n=n, t_grid=np.asarray(t_grid, dtype=np.float64),
                       values=values, lipschitz_bound=f.sup_norm)


def centered_zeta_path(f: Observable, x, n: int, scheme: TriangularArrayScheme,
                       t_grid, ensemble_mean_path: ErgodicPath) -> ErgodicPath:
    """zeta_n(x, .) minus the ensemble mean path on the same grid."""
    path = zeta_path(f, x, n, scheme, t_grid)
    if not np.array_equal(path.t_grid, ensemble_mean_path.t_grid):
        raise GridMismatchError("ensemble mean path uses a different t-grid")
    values = path.values - ensemble_mean_path.values
    return ErgodicPath(n=n, t_grid=path.t_grid, values=values,
                       lipschitz_bound=path.lipschitz_bound
                       + ensemble_mean_path.lipschitz_bound)


@dataclass(frozen=True)
class EnsemblePaths:
    """zeta paths and raw observable captures for a whole ensemble.

    zeta has shape (n_obs, members, len(t_grid)); f_at_captures holds
    f(x_{n,k}) at k = floor(n t) for each grid t, shape (n_obs, members, T).
    """

    n: int
    t_grid: np.ndarray
    observables: tuple[Observable, ...]
    zeta: np.ndarray
    f_at_captures: np.ndarray

    def mean_path(self, obs_index: int = 0) -> ErgodicPath:
        values = self.zeta[obs_index].mean(axis=0)
        values[0] = 0.0
        return ErgodicPath(n=self.n, t_grid=self.t_grid, values=values,
                           lipschitz_bound=self.observables[obs_index].sup_norm)


def _stream_chunk(scheme, n, observables, uniq_ks, states, lattice):
    """March one chunk of initial states through all n steps.

    Returns (prefix sums at capture ks, f values at capture ks), each of
    shape (n_obs, chunk, U).
    """
    n_obs = len(observables)
    m = states.shape[0]
    u = len(uniq_ks)
    cap_s = np.empty((n_obs, m, u))
    cap_f = np.empty((n_obs, m, u))
    running = np.zeros((n_obs, m))
    kpos = {int(k): i for i, k in enumerate(uniq_ks)}
    x = _lattice_project(states) if lattice else states
    for k in range(n + 1):
        fvals = [np.asarray(obs(x), dtype=np.float64) for obs in observables]
        pos = kpos.get(k)
        if pos is not None:
            for o in range(n_obs):
                cap_s[o, :, pos] = running[o]
                cap_f[o, :, pos] = fvals[o]
        if k == n:
            break
        for o in range(n_obs):
            running[o] += fvals[o]
        p = scheme.map_params(n, k + 1)
        if lattice:
            states = _lattice_step(states, p)
            x = _lattice_project(states)
        else:
            x = _float_step(x, p)
    return cap_s, cap_f


def ensemble_zeta_paths(scheme: TriangularArrayScheme, n: int,
                        observables, t_grid, initial_states,
                        threads: int = 1) -> EnsemblePaths:
    """Evolve an ensemble and assemble every member's zeta path.

    initial_states: float circle points, or uint64 lattice states when the
    scheme evolves on the lattice.  Orbits are streamed, never materialized.
    Work is split into fixed-size chunks so results do not depend on
    `threads`; reductions happen on the coordinating thread in index order.
    """
    observables = tuple(observables)
    t = _validate_t_grid(t_grid)
    kk, frac, uniq, inverse = _capture_plan(n, t)
    lattice = scheme.uses_lattice
    if lattice and initial_states.dtype != np.uint64:
        initial_states = floats_to_lattice(initial_states)
    elif not lattice and initial_states.dtype == np.uint64:
        initial_states = _lattice_project(initial_states)
    m_total = initial_states.shape[0]
    n_obs = len(observables)
    cap_s = np.empty((n_obs, m_total, len(uniq)))
    cap_f = np.empty((n_obs, m_total, len(uniq)))
    chunks = [(i, min(i + _CHUNK, m_total)) for i in range(0, m_total, _CHUNK)]

    def work(span):
        lo, hi = span
        return lo, hi, _stream_chunk(scheme, n, observables, uniq,
                                     initial_states[lo:hi], lattice)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for lo, hi, (cs, cf) in pool.map(work, chunks):
                cap_s[:, lo:hi, :] = cs
                cap_f[:, lo:hi, :] = cf
    else:
        for span in chunks:
            lo, hi, (cs, cf) = work(span)
            cap_s[:, lo:hi, :] = cs
            cap_f[:, lo:hi, :] = cf

    s_at = cap_s[:, :, inverse]
    f_at = cap_f[:, :, inverse]
    zeta = (s_at + frac[None, None, :] * f_at) / n
    return EnsemblePaths(n=n, t_grid=t, observables=observables,
                         zeta=zeta, f_at_captures=f_at)
