"""Correlation functions, moment bounds, and the centered 4-point identity.

The correlation defect of an array level is

    c_n^{l,j}(k_1..k_l) = mu(f_{n,k_1} ... f_{n,k_l})
                          - mu(f_{n,k_1} ... f_{n,k_j}) * mu(f_{n,k_{j+1}} ... f_{n,k_l})

estimated by Monte Carlo with both factors taken from the same sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from .core import TriangularArrayScheme, _float_step, _lattice_step, \
    _lattice_project, floats_to_lattice
from .sampling import LebesgueSampler, make_generator, STREAM_INITIAL_POINTS, \
    STREAM_IDENTITY_CHECK

PHI_KNEE = 2.0
PHI_PLATEAU = 0.5 / math.log(2.0) ** 2


def phi(s):
    """Non-increasing integrable decay gauge: s^-1 (log s)^-2 past the knee
    at s = 2, constant 2^-1 (log 2)^-2 before it."""
    arr = np.asarray(s, dtype=np.float64)
    if np.any(arr < 0.0):
        raise ValueError("phi is defined on s >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = 1.0 / (arr * np.log(arr) ** 2)
    out = np.where(arr >= PHI_KNEE, tail, PHI_PLATEAU)
    if out.ndim == 0:
        return float(out)
    return out


def psi(s):
    """s^(1/2) / log s, the comparison function for the phi^(1/2) integral."""
    arr = np.asarray(s, dtype=np.float64)
    out = np.sqrt(arr) / np.log(arr)
    if out.ndim == 0:
        return float(out)
    return out


class PhiBoundCheck(NamedTuple):
    n: int
    lhs: float
    rhs: float
    quadrature_error: float
    passed: bool


def phi_half_integral_bound_check(n: int) -> PhiBoundCheck:
    """Compare int_0^n phi(s)^(1/2) ds against 2 phi(0)^(1/2) + 2 psi(n) - 2 psi(2).

    The comparison is reported as stated; whether it holds is a property of
    the numbers, not of this routine (see the growth-ratio check in the
    tests for the O(n^(1/2) / log n) scaling that does hold).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    lhs = 2.0 * math.sqrt(PHI_PLATEAU)
    err = 0.0
    if n > 2:
        val, abserr = quad(lambda s: math.sqrt(phi(s)), 2.0, n, limit=400)
        lhs += val
        err = abserr
    rhs = 2.0 * math.sqrt(PHI_PLATEAU) + 2.0 * psi(n) - 2.0 * psi(2.0)
    return PhiBoundCheck(n=n, lhs=lhs, rhs=rhs, quadrature_error=err,
                         passed=lhs <= rhs + 10.0 * err + 1e-12)


@dataclass(frozen=True)
class EnsembleEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    def significant(self, sigmas: float = 3.0) -> bool:
        return abs(self.mean) > sigmas * self.std_error


@dataclass(frozen=True)
class CorrelationSpec:
    """Which product-moment defect to estimate: 2 <= ell <= 4, the split j in
    {1, ell-1}, nondecreasing step indices k_1 <= ... <= k_ell <= n."""

    ell: int
    j: int
    k_indices: tuple[int, ...]
    n: int

    def __post_init__(self):
        if not 2 <= self.ell <= 4:
            raise ValueError(f"ell must be in 2..4, got {self.ell}")
        if self.j not in (1, self.ell - 1):
            raise ValueError(f"j must be 1 or ell-1, got {self.j}")
        if len(self.k_indices) != self.ell:
            raise ValueError("need exactly ell step indices")
        if list(self.k_indices) != sorted(self.k_indices):
            raise ValueError("step indices must be nondecreasing")
        if self.k_indices[0] < 0 or self.k_indices[-1] > self.n:
            raise ValueError("step indices must lie in [0, n]")

    @property
    def gap(self):
        return self.k_indices[self.j] - self.k_indices[self.j - 1]


def observable_at_steps(scheme: TriangularArrayScheme, n, f, ks,
                        initial_states) -> np.ndarray:
    """f(x_{n,k}) for each requested k, shape (len(ks), members)."""
    ks = [int(k) for k in ks]
    kset = {}
    for i, k in enumerate(ks):
        kset.setdefault(k, []).append(i)
    lattice = scheme.uses_lattice
    if lattice and initial_states.dtype != np.uint64:
        states = floats_to_lattice(initial_states)
    else:
        states = initial_states
    out = np.empty((len(ks), states.shape[0]))
    x = _lattice_project(states) if lattice else np.asarray(states, dtype=np.float64)
    last = max(ks)
    for k in range(last + 1):
        if k in kset:
            vals = np.asarray(f(x), dtype=np.float64)
            for i in kset[k]:
                out[i] = vals
        if k == last:
            break
        p = scheme.map_params(n, k + 1)
        if lattice:
            states = _lattice_step(states, p)
            x = _lattice_project(states)
        else:
            x = _float_step(x, p)
    return out


def correlation_estimate(spec: CorrelationSpec, f, scheme: TriangularArrayScheme,
                         sampler, samples: int, seed: int) -> EnsembleEstimate:
    """Monte Carlo estimate of one correlation defect.

    Both product factors are computed from the same sample; the estimator is
    the sample covariance of the two factors, whose per-sample influence
    values give the reported standard error.
    """
    if samples < 100:
        raise ValueError("fewer than 100 samples gives a meaningless estimate")
    if scheme.uses_lattice:
        states = sampler.draw_lattice(seed, samples, STREAM_INITIAL_POINTS)
    else:
        states = sampler.draw_floats(seed, samples, STREAM_INITIAL_POINTS)
    captures = observable_at_steps(scheme, spec.n, f, spec.k_indices, states)
    left = np.prod(captures[: spec.j], axis=0)
    right = np.prod(captures[spec.j:], axis=0)
    v = (left - left.mean()) * (right - right.mean())
    return EnsembleEstimate(mean=float(v.mean()),
                            std_error=float(v.std(ddof=1) / math.sqrt(samples)),
                            samples=samples, seed=seed)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit log|c(g)| ~ log D + g log theta on significant gaps."""

    d_const: float
    theta: float
    gaps_used: tuple[int, ...]
    log_abs_used: tuple[float, ...]
    residual_rms: float

    @property
    def decaying(self):
        return 0.0 < self.theta < 1.0


def decay_fit(gaps, estimates, significance: float = 3.0,
              min_points: int = 4) -> DecayFit | None:
    """Fit an exponential decay law through significant correlation estimates.

    Returns None (inconclusive, not an error) when fewer than min_points
    estimates exceed the significance gate: fitting the log of noise would
    corrupt the rate.
    """
    used_g, used_y = [], []
    for g, est in zip(gaps, estimates):
        if est.significant(significance) and est.mean != 0.0:
            used_g.append(int(g))
            used_y.append(math.log(abs(est.mean)))
    if len(used_g) < min_points:
        return None
    coeffs = np.polyfit(used_g, used_y, 1)
    fitted = np.polyval(coeffs, used_g)
    rms = float(np.sqrt(np.mean((np.asarray(used_y) - fitted) ** 2)))
    return DecayFit(d_const=float(math.exp(coeffs[1])),
                    theta=float(math.exp(coeffs[0])),
                    gaps_used=tuple(used_g), log_abs_used=tuple(used_y),
                    residual_rms=rms)


@dataclass(frozen=True)
class MomentEstimate:
    n: int
    t: float
    fourth_moment: float
    std_error: float
    samples: int
    seed: int

    @property
    def scaled(self):
        """n (log n)^2 * m4, the combination bounded by the moment lemma."""
        return self.n * math.log(self.n) ** 2 * self.fourth_moment

    @property
    def scaled_std_error(self):
        return self.n * math.log(self.n) ** 2 * self.std_error


def fourth_moment_series(f, scheme: TriangularArrayScheme, t: float, n_values,
                         sampler, samples: int, seed: int,
                         threads: int = 1) -> list[MomentEstimate]:
    """mu(|centered zeta_n(., t)|^4) over levels, by split-sample centering.

    The mean of zeta_n(., t) is estimated from the first half of the sample
    and the fourth moment from the second half: plug-in centering biases
    small-sample fourth moments downward.
    """
    from .core import ensemble_zeta_paths

    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    t_grid = np.array([0.0, t]) if t > 0.0 else np.array([0.0])
    out = []
    for n in n_values:
        n = int(n)
        if scheme.uses_lattice:
            states = sampler.draw_lattice(seed, samples, STREAM_INITIAL_POINTS)
        else:
            states = sampler.draw_floats(seed, samples, STREAM_INITIAL_POINTS)
        paths = ensemble_zeta_paths(scheme, n, (f,), t_grid, states,
                                    threads=threads)
        vals = paths.zeta[0, :, -1]
        half = samples // 2
        center = vals[:half].mean()
        quarts = (vals[half:] - center) ** 4
        out.append(MomentEstimate(
            n=n, t=t, fourth_moment=float(quarts.mean()),
            std_error=float(quarts.std(ddof=1) / math.sqrt(quarts.size)),
            samples=samples, seed=seed))
    return out


def centered_four_point_moment(f, scheme: TriangularArrayScheme, n: int,
                               ts, sampler, samples: int, seed: int) -> float:
    """Monte Carlo mu(prod_i (f_{n,floor(n t_i)} - mu(f_{n,floor(n t_i)}))).

    Captures are taken in sorted step order and multiplied in that fixed
    order, so the estimate is bit-identical under permutations of ts.
    """
    if len(ts) != 4:
        raise ValueError("need exactly four macroscopic times")
    ks = sorted(int(math.floor(n * t)) for t in ts)
    if scheme.uses_lattice:
        states = sampler.draw_lattice(seed, samples, STREAM_INITIAL_POINTS)
    else:
        states = sampler.draw_floats(seed, samples, STREAM_INITIAL_POINTS)
    captures = observable_at_steps(scheme, n, f, ks, states)
    prod = np.ones(captures.shape[1])
    for row in captures:
        prod = prod * (row - row.mean())
    return float(prod.mean())


def moments_growth_ok(series, sigmas: float = 3.0) -> bool:
    """No systematic growth of the scaled moments across the level series."""
    for i in range(len(series)):
        for j in range(i + 1, len(series)):
            allowance = sigmas * math.hypot(series[i].scaled_std_error,
                                            series[j].scaled_std_error)
            if series[j].scaled > series[i].scaled + allowance:
                return False
    return True


def four_point_expansion_check(weights, values) -> float:
    """Discrepancy of the centered 4-point product expansion on a finite space.

    The expectation of (g1 - <g1>)...(g4 - <g4>) is expanded into seven
    raw-moment correlation differences; the expansion is an algebraic
    identity, so the discrepancy must vanish to roundoff.
    """
    w = np.asarray(weights, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.shape[0] != 4 or v.shape[1] != w.shape[0] or w.shape[0] < 2:
        raise ValueError("need 4 x K values and K >= 2 weights")
    if abs(w.sum() - 1.0) > 1e-9 or np.any(w < 0.0):
        raise ValueError("weights must be a probability vector")

    def ave(*idx):
        prod = np.ones_like(w)
        for i in idx:
            prod = prod * v[i]
        return float(np.dot(w, prod))

    m = [ave(i) for i in range(4)]
    lhs = float(np.dot(w, (v[0] - m[0]) * (v[1] - m[1])
                       * (v[2] - m[2]) * (v[3] - m[3])))
    rhs = (
        (ave(0, 1, 2, 3) - ave(0, 1, 2) * m[3])
        - m[2] * (ave(0, 1, 3) - ave(0, 1) * m[3])
        - m[1] * (ave(0, 2, 3) - ave(0, 2) * m[3])
        + m[1] * m[2] * (ave(0, 3) - m[0] * m[3])
        - m[0] * (ave(1, 2, 3) - ave(1, 2) * m[3])
        + m[0] * m[2] * (ave(1, 3) - m[1] * m[3])
        + m[0] * m[1] * (ave(2, 3) - m[2] * m[3])
    )
    return abs(lhs - rhs)


def four_point_random_spaces(n_spaces: int, max_support: int, seed: int) -> float:
    """Max expansion discrepancy over randomly generated finite spaces."""
    rng = make_generator(seed, STREAM_IDENTITY_CHECK)
    worst = 0.0
    for _ in range(n_spaces):
        k = int(rng.integers(2, max_support + 1))
        w = rng.random(k) + 1e-3
        w = w / w.sum()
        v = rng.uniform(-1.0, 1.0, size=(4, k))
        worst = max(worst, four_point_expansion_check(w, v))
    return worst


def lebesgue_sampler() -> LebesgueSampler:
    return LebesgueSampler()
