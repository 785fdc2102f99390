"""Instantaneous invariant (SRB) measures via transfer-operator discretization.

Two discretizations of the same operator live here:

* `build_ulam` - the bin-transition matrix estimated from q stratified
  subsamples per bin.  This is the workhorse behind invariant densities and
  the limit curve zeta(t) = int_0^t mu_s(f) ds.
* `transfer_matrix` - exact bin-transition masses obtained by Newton
  inversion of the map's monotone branches.  The stratified estimator's
  O(1/q) row quantization jumps erratically as the curve parameter moves,
  which floors pushforward-vs-stationary comparisons around 1e-3; the exact
  rows vary smoothly and are required by the mean-convergence rate check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ConvergenceError
from .maps import (CurveSpec, ExpandingMapParams, LambdaAstar, TAU, map_eval,
                   map_lift, map_deriv, require_admissible)
from .observables import Observable

DEFAULT_BINS = 1024
DEFAULT_SUBSAMPLES = 64
DEFAULT_TOL = 1e-12
DEFAULT_S_NODES = 257


@dataclass(frozen=True)
class UlamOperator:
    """Row-stochastic bin-transition matrix on N uniform circle bins."""

    bins: int
    matrix: sp.csr_matrix

    def row_sum_defect(self):
        sums = np.asarray(self.matrix.sum(axis=1)).ravel()
        return float(np.max(np.abs(sums - 1.0)))

    def midpoints(self):
        return (np.arange(self.bins) + 0.5) / self.bins


@dataclass(frozen=True)
class InvariantDensity:
    """Stationary bin masses of an Ulam operator, with the final residual."""

    bins: int
    bin_masses: np.ndarray
    residual: float

    def midpoints(self):
        return (np.arange(self.bins) + 0.5) / self.bins


class MeasureExpectation(NamedTuple):
    value: float
    quadrature_bound: float


def build_ulam(p: ExpandingMapParams, bins: int = DEFAULT_BINS,
               subsamples: int = DEFAULT_SUBSAMPLES,
               bounds: LambdaAstar | None = None) -> UlamOperator:
    """Estimate P_ij = m(B_i cap T^{-1} B_j) / m(B_i) from stratified points.

    Each bin contributes the midpoints of its q subcells; rows are
    renormalized to sum to 1 exactly up to roundoff.
    """
    if bins < 2:
        raise ConfigurationError(f"need at least 2 bins, got {bins}")
    if subsamples < 4:
        raise ConfigurationError(f"need at least 4 subsamples, got {subsamples}")
    if bounds is not None:
        require_admissible(p, bounds)
    i = np.arange(bins)
    offs = (np.arange(subsamples) + 0.5) / subsamples
    x = (i[:, None] + offs[None, :]) / bins
    y = map_eval(p, x)
    j = np.minimum((y * bins).astype(np.int64), bins - 1)
    codes = (i[:, None] * bins + j).ravel()
    uniq, counts = np.unique(codes, return_counts=True)
    rows = uniq // bins
    cols = uniq % bins
    vals = counts.astype(np.float64) / subsamples
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(bins, bins))
    sums = np.asarray(matrix.sum(axis=1)).ravel()
    matrix = sp.diags(1.0 / sums) @ matrix
    return UlamOperator(bins=bins, matrix=matrix.tocsr())


def transfer_matrix(p: ExpandingMapParams, bins: int = DEFAULT_BINS) -> UlamOperator:
    """Exact bin-transition masses via Newton inversion of bin-edge preimages.

    The lift of the map is strictly increasing (T' >= lambda > 1), so inside
    each source bin the preimages of successive target edges are ordered and
    Newton from the linear-interpolation guess converges quadratically.
    """
    if bins < 2:
        raise ConfigurationError(f"need at least 2 bins, got {bins}")
    edges = np.arange(bins + 1) / bins
    lift = map_lift(p, edges)
    lo = np.ceil(lift[:-1] * bins - 1e-12).astype(np.int64)
    hi = np.floor(lift[1:] * bins + 1e-12).astype(np.int64)
    counts = np.maximum(hi - lo + 1, 0)
    total = int(counts.sum())
    cum = np.concatenate(([0], np.cumsum(counts)))
    row_of_cross = np.repeat(np.arange(bins), counts)
    within = np.arange(total) - cum[row_of_cross]
    targets = (lo[row_of_cross] + within) / bins
    xl = edges[row_of_cross]
    xr = edges[row_of_cross + 1]
    yl = lift[row_of_cross]
    yr = lift[row_of_cross + 1]
    x = xl + (targets - yl) / (yr - yl) * (xr - xl)
    for _ in range(60):
        fx = map_lift(p, x) - targets
        if np.max(np.abs(fx)) < 1e-15:
            break
        x = x - fx / map_deriv(p, x)
    x = np.clip(x, xl, xr)

    # segments between consecutive crossings map into consecutive bins
    seg_total = total + bins
    offsets = cum + np.arange(bins + 1)
    left = np.empty(seg_total)
    right = np.empty(seg_total)
    left[offsets[:-1]] = edges[:-1]
    right[offsets[1:] - 1] = edges[1:]
    gpos = np.arange(total) + row_of_cross
    left[gpos + 1] = x
    right[gpos] = x
    row_of_seg = np.repeat(np.arange(bins), counts + 1)
    within_seg = np.arange(seg_total) - offsets[row_of_seg]
    target_bin = (lo[row_of_seg] - 1 + within_seg) % bins
    mass = np.maximum((right - left) * bins, 0.0)
    keep = mass > 1e-13  # drop roundoff dust from zero-length edge segments
    matrix = sp.coo_matrix((mass[keep], (row_of_seg[keep], target_bin[keep])),
                           shape=(bins, bins)).tocsr()
    sums = np.asarray(matrix.sum(axis=1)).ravel()
    matrix = sp.diags(1.0 / sums) @ matrix
    return UlamOperator(bins=bins, matrix=matrix.tocsr())


def stationary_density(op: UlamOperator, tol: float = DEFAULT_TOL,
                       max_iterations: int = 100_000,
                       start: np.ndarray | None = None) -> InvariantDensity:
    """Power-iterate u <- uP from the uniform vector until ||uP - u||_1 <= tol.

    The L1 residual doubles as a convergence certificate; failure raises
    with the last residual attached.
    """
    n = op.bins
    u = np.full(n, 1.0 / n) if start is None else np.array(start, dtype=np.float64)
    pt = op.matrix.T.tocsr()
    residual = math.inf
    for _ in range(max_iterations):
        v = pt @ u
        residual = float(np.abs(v - u).sum())
        u = v
        if residual <= tol:
            u = u / u.sum()
            return InvariantDensity(bins=n, bin_masses=u, residual=residual)
    raise ConvergenceError(
        f"power iteration did not reach tol {tol:g} in {max_iterations} steps",
        residual,
    )


def measure_expectation(d: InvariantDensity, f: Observable) -> MeasureExpectation:
    """Sum of mass_i * f(midpoint_i) with the Lipschitz quadrature bound."""
    value = float(np.dot(d.bin_masses, f(d.midpoints())))
    bound = f.lipschitz_constant / (2.0 * d.bins)
    return MeasureExpectation(value=value, quadrature_bound=bound)


@dataclass(frozen=True)
class DensityCurve:
    """Invariant densities of gamma_t sampled on per-piece s-grids.

    Node grids never straddle a curve jump, so t -> mu_t(f) is only ever
    interpolated inside an interval where it is continuous.
    """

    curve: CurveSpec
    piece_nodes: tuple[np.ndarray, ...]
    piece_densities: tuple[tuple[InvariantDensity, ...], ...]
    bins: int
    subsamples: int

    @property
    def max_residual(self):
        return max(d.residual for ds in self.piece_densities for d in ds)

    def expectation_nodes(self, f: Observable):
        """mu_s(f) at every node, per piece."""
        return tuple(
            np.array([measure_expectation(d, f).value for d in ds])
            for ds in self.piece_densities
        )


def density_curve(curve: CurveSpec, s_nodes: int = DEFAULT_S_NODES,
                  bins: int = DEFAULT_BINS,
                  subsamples: int = DEFAULT_SUBSAMPLES,
                  tol: float = DEFAULT_TOL) -> DensityCurve:
    """Solve for the invariant density at s_nodes points of every piece.

    Within a piece consecutive solves are warm-started from the previous
    node's density; each piece restarts from uniform.
    """
    all_nodes, all_densities = [], []
    for piece in curve.pieces:
        nodes = np.linspace(piece.t_lo, piece.t_hi, s_nodes)
        densities = []
        start = None
        for s in nodes:
            s_eval = min(float(s), piece.t_hi)
            params = piece.params_at(s_eval)
            op = build_ulam(params, bins=bins, subsamples=subsamples)
            dens = stationary_density(op, tol=tol, start=start)
            start = dens.bin_masses
            densities.append(dens)
        all_nodes.append(nodes)
        all_densities.append(tuple(densities))
    return DensityCurve(curve=curve, piece_nodes=tuple(all_nodes),
                        piece_densities=tuple(all_densities),
                        bins=bins, subsamples=subsamples)


@dataclass(frozen=True)
class ZetaCurve:
    """zeta(t) = int_0^t mu_s(f) ds, accumulated by per-piece trapezoid rule.

    Between integration nodes the integrand is interpolated linearly, making
    zeta piecewise quadratic; zeta(0) = 0 and |zeta(t) - zeta(s)| <=
    sup|f| * |t - s|.
    """

    piece_nodes: tuple[np.ndarray, ...]
    piece_integrands: tuple[np.ndarray, ...]
    piece_cumulative: tuple[np.ndarray, ...]
    lipschitz_bound: float
    bins: int
    s_nodes: int
    max_residual: float

    def at(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = np.empty(t.shape)
        flat_t = np.atleast_1d(t)
        flat_out = np.atleast_1d(out)
        for idx, tv in enumerate(flat_t):
            flat_out[idx] = self._at_scalar(float(tv))
        if t.ndim == 0:
            return float(flat_out[0])
        return out

    def _at_scalar(self, t):
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t}")
        for nodes, g, cum in zip(self.piece_nodes, self.piece_integrands,
                                 self.piece_cumulative):
            if t > nodes[-1] + 1e-15:
                continue
            j = int(np.searchsorted(nodes, t, side="right") - 1)
            j = min(max(j, 0), len(nodes) - 2)
            value = cum[j]
            h = nodes[j + 1] - nodes[j]
            if h > 0 and t > nodes[j]:
                gt = g[j] + (g[j + 1] - g[j]) * (t - nodes[j]) / h
                value += 0.5 * (g[j] + gt) * (t - nodes[j])
            return float(value)
        return float(self.piece_cumulative[-1][-1])

    def values_on(self, t_grid):
        return self.at(np.asarray(t_grid, dtype=np.float64))

    def final_value(self):
        return self._at_scalar(1.0)


def zeta_curve_from_density(dc: DensityCurve, f: Observable) -> ZetaCurve:
    integrands = dc.expectation_nodes(f)
    cumulative = []
    acc = 0.0
    for nodes, g in zip(dc.piece_nodes, integrands):
        steps = 0.5 * (g[1:] + g[:-1]) * np.diff(nodes)
        cum = acc + np.concatenate([[0.0], np.cumsum(steps)])
        acc = float(cum[-1])
        cumulative.append(cum)
    return ZetaCurve(piece_nodes=dc.piece_nodes,
                     piece_integrands=tuple(integrands),
                     piece_cumulative=tuple(cumulative),
                     lipschitz_bound=f.sup_norm,
                     bins=dc.bins, s_nodes=len(dc.piece_nodes[0]),
                     max_residual=dc.max_residual)


def zeta_curve(curve: CurveSpec, f: Observable, s_nodes: int = DEFAULT_S_NODES,
               bins: int = DEFAULT_BINS, subsamples: int = DEFAULT_SUBSAMPLES,
               tol: float = DEFAULT_TOL) -> ZetaCurve:
    """Limit curve zeta for one observable (builds its own density curve)."""
    return zeta_curve_from_density(
        density_curve(curve, s_nodes=s_nodes, bins=bins,
                      subsamples=subsamples, tol=tol), f)


@dataclass(frozen=True)
class HistogramCheck:
    """Single-orbit occupation average of f versus the Ulam expectation."""

    orbit_value: float
    orbit_std_error: float
    density_value: float
    quadrature_bound: float
    refinement_gap: float
    length: int

    @property
    def discrepancy(self):
        return abs(self.orbit_value - self.density_value)

    @property
    def tolerance(self):
        # 3 sigma from batch means, plus the deterministic quadrature and
        # discretization allowances that have no stochastic error bar
        return (3.0 * self.orbit_std_error + self.quadrature_bound
                + self.refinement_gap)

    @property
    def ok(self):
        return self.discrepancy <= self.tolerance


def orbit_histogram_check(p: ExpandingMapParams, f: Observable, x0: float,
                          length: int = 10_000_000,
                          bins: int = DEFAULT_BINS,
                          subsamples: int = DEFAULT_SUBSAMPLES,
                          batches: int = 100,
                          tol: float = DEFAULT_TOL) -> HistogramCheck:
    """Iterate one long orbit, bin it, and compare the histogram expectation
    of f against the stationary-density expectation.

    The orbit standard error comes from batch means, which absorbs the
    orbit's autocorrelation.
    """
    if p.is_linear and p.degree % 2 == 0:
        raise ConfigurationError(
            "binary linear maps cannot be iterated in floating point; "
            "use a lattice-backed scheme instead"
        )
    counts = np.zeros(bins, dtype=np.int64)
    batch_len = length // batches
    batch_vals = []
    x = float(x0)
    c = p.amplitude / TAU
    deg, phase = p.degree, p.phase
    sin = math.sin
    mids = (np.arange(bins) + 0.5) / bins
    f_mids = f(mids)
    for _ in range(batches):
        bcounts = np.zeros(bins, dtype=np.int64)
        for _ in range(batch_len):
            y = deg * x + c * sin(TAU * x + phase)
            x = y - math.floor(y)
            if x >= 1.0:
                x = 0.0
            bcounts[int(x * bins)] += 1
        counts += bcounts
        batch_vals.append(float(np.dot(bcounts / batch_len, f_mids)))
    total = batches * batch_len
    orbit_value = float(np.dot(counts / total, f_mids))
    orbit_se = float(np.std(batch_vals, ddof=1) / math.sqrt(batches))
    dens = stationary_density(build_ulam(p, bins, subsamples), tol=tol)
    exp = measure_expectation(dens, f)
    dens_half = stationary_density(build_ulam(p, bins // 2, subsamples), tol=tol)
    exp_half = measure_expectation(dens_half, f)
    return HistogramCheck(orbit_value=orbit_value, orbit_std_error=orbit_se,
                          density_value=exp.value,
                          quadrature_bound=exp.quadrature_bound,
                          refinement_gap=abs(exp.value - exp_half.value),
                          length=total)


@dataclass(frozen=True)
class MeanDefectTable:
    """sup_t |mean of f_{n,floor(nt)} - mu_t(f)| per level, with log-log fit.

    The ensemble mean over the Lebesgue initial distribution is computed
    exactly by pushing the uniform density through the level's transfer
    matrices (Monte Carlo cannot resolve the n^(-eta') decay: its noise
    floor sigma/sqrt(M) exceeds the signal at desk-scale M).
    """

    n_values: tuple[int, ...]
    sup_defects: tuple[float, ...]
    fitted_slope: float

    def slope_ok(self, slope_max):
        return self.fitted_slope <= slope_max


def mean_defect_table(curve: CurveSpec, f: Observable, n_values,
                      t_samples: int = 51, bins: int = DEFAULT_BINS,
                      tol: float = 1e-13) -> MeanDefectTable:
    n_values = tuple(int(n) for n in n_values)
    t_grid = np.linspace(0.0, 1.0, t_samples)
    fvec = f((np.arange(bins) + 0.5) / bins)
    sups = []
    for n in n_values:
        ks = sorted({int(math.floor(n * t)) for t in t_grid})
        kset = set(ks)
        rho = np.full(bins, 1.0 / bins)
        captured = {0: rho.copy()} if 0 in kset else {}
        for k in range(1, n + 1):
            pt = transfer_matrix(curve.params_at(k / n), bins).matrix.T.tocsr()
            rho = pt @ rho
            if k in kset:
                captured[k] = rho.copy()
        worst = 0.0
        start = None
        for k in ks:
            op = transfer_matrix(curve.params_at(k / n), bins)
            pi = stationary_density(op, tol=tol, start=start)
            start = pi.bin_masses
            defect = abs(float(np.dot(captured[k], fvec))
                         - float(np.dot(pi.bin_masses, fvec)))
            worst = max(worst, defect)
        sups.append(worst)
    ln = np.log(np.asarray(n_values, dtype=np.float64))
    ls = np.log(np.maximum(np.asarray(sups), 1e-300))
    slope = float(np.polyfit(ln, ls, 1)[0]) if len(n_values) >= 2 else -math.inf
    return MeanDefectTable(n_values=n_values, sup_defects=tuple(sups),
                           fitted_slope=slope)
