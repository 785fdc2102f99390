"""System space of admissible expanding circle maps and curves through it.

The map family is T(x) = m*x + (a/2*pi)*sin(2*pi*x + phi) mod 1 with integer
degree m >= 2.  Derivatives are closed-form, so expansion and distortion
bounds are exact:  T'(x) = m + a*cos(2*pi*x + phi),  T''(x) =
-2*pi*a*sin(2*pi*x + phi),  hence inf T' = m - |a| and sup|T''| = 2*pi*|a|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import circle_distance, reduce_mod1
from .errors import ConfigurationError

TAU = 2.0 * math.pi

# sup-norm change of (displacement, derivative) per unit change of the
# amplitude parameter: |dT/da| <= 1/(2*pi), |dT'/da| <= 1.
AMPLITUDE_TO_C1 = 1.0 + 1.0 / TAU


@dataclass(frozen=True)
class LambdaAstar:
    """Admissibility bounds: expansion floor lambda > 1, distortion cap A*."""

    lam: float = 1.2
    a_star: float = TAU

    def __post_init__(self):
        if not self.lam > 1.0:
            raise ConfigurationError(f"lambda must exceed 1, got {self.lam}")
        if not self.a_star > 0.0:
            raise ConfigurationError(f"A* must be positive, got {self.a_star}")


@dataclass(frozen=True)
class ExpandingMapParams:
    """One map of the family: degree, perturbation amplitude, phase."""

    degree: int
    amplitude: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.degree < 2:
            raise ConfigurationError(f"degree must be >= 2, got {self.degree}")
        if abs(self.amplitude) >= self.degree - 1:
            raise ConfigurationError(
                f"|amplitude| {abs(self.amplitude)} leaves no expansion margin "
                f"for degree {self.degree}"
            )

    @property
    def min_derivative(self):
        return self.degree - abs(self.amplitude)

    @property
    def max_derivative(self):
        return self.degree + abs(self.amplitude)

    @property
    def second_derivative_sup(self):
        return TAU * abs(self.amplitude)

    @property
    def is_linear(self):
        return self.amplitude == 0.0


def map_eval(p: ExpandingMapParams, x):
    """Apply the map; accepts scalars or arrays, returns values in [0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    y = p.degree * x + (p.amplitude / TAU) * np.sin(TAU * x + p.phase)
    return reduce_mod1(y)


def map_lift(p: ExpandingMapParams, x):
    """The monotone lift of the map to the real line (no mod-1 reduction)."""
    x = np.asarray(x, dtype=np.float64)
    return p.degree * x + (p.amplitude / TAU) * np.sin(TAU * x + p.phase)


def map_deriv(p: ExpandingMapParams, x):
    x = np.asarray(x, dtype=np.float64)
    d = p.degree + p.amplitude * np.cos(TAU * x + p.phase)
    if d.ndim == 0:
        return float(d)
    return d


def map_second_deriv(p: ExpandingMapParams, x):
    x = np.asarray(x, dtype=np.float64)
    d = -TAU * p.amplitude * np.sin(TAU * x + p.phase)
    if d.ndim == 0:
        return float(d)
    return d


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    violations: tuple[str, ...]


def admissibility_check(p: ExpandingMapParams, bounds: LambdaAstar) -> AdmissibilityReport:
    """inf T' >= lambda and sup|T''| <= A*, via the closed-form extrema."""
    violations = []
    if p.min_derivative < bounds.lam:
        violations.append(
            f"inf T' = {p.min_derivative:.6g} < lambda = {bounds.lam:.6g}"
        )
    if p.second_derivative_sup > bounds.a_star:
        violations.append(
            f"sup|T''| = {p.second_derivative_sup:.6g} > A* = {bounds.a_star:.6g}"
        )
    return AdmissibilityReport(ok=not violations, violations=tuple(violations))


def require_admissible(p: ExpandingMapParams, bounds: LambdaAstar):
    rep = admissibility_check(p, bounds)
    if not rep.ok:
        raise ConfigurationError(
            f"map {p} inadmissible: " + "; ".join(rep.violations)
        )


@dataclass(frozen=True)
class C1Distance:
    value: float
    grid_error_bound: float


def c1_distance(p1: ExpandingMapParams, p2: ExpandingMapParams,
                refinement: int = 2 ** 16) -> C1Distance:
    """sup_x d(T1 x, T2 x) + sup_x |T1' - T2'| approximated on a uniform grid.

    The reported error bound is rigorous: both summands are Lipschitz in x
    with constants bounded through the maps' C^2 data.
    """
    x = np.arange(refinement) / refinement
    disp = circle_distance(map_eval(p1, x), map_eval(p2, x))
    dgap = np.abs(map_deriv(p1, x) - map_deriv(p2, x))
    lip_disp = p1.max_derivative + p2.max_derivative
    lip_dgap = p1.second_derivative_sup + p2.second_derivative_sup
    bound = (lip_disp + lip_dgap) / (2.0 * refinement)
    return C1Distance(value=float(disp.max() + dgap.max()), grid_error_bound=bound)


@dataclass(frozen=True)
class CurvePiece:
    """One Hoelder piece of a parameter path.

    Within [t_lo, t_hi] the degree is constant and
        a(t)   = a0 + a1 * (t - t_lo) ** a_exp,
        phi(t) = phi0 + phi1 * (t - t_lo).
    a_exp in (0, 1] is the piece's own Hoelder exponent when a1 != 0.
    """

    t_lo: float
    t_hi: float
    degree: int
    a0: float = 0.0
    a1: float = 0.0
    a_exp: float = 1.0
    phi0: float = 0.0
    phi1: float = 0.0

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise ConfigurationError(
                f"piece interval [{self.t_lo}, {self.t_hi}) is empty"
            )
        if not 0.0 < self.a_exp <= 1.0:
            raise ConfigurationError(f"a_exp must lie in (0, 1], got {self.a_exp}")

    def amplitude_at(self, t):
        return self.a0 + self.a1 * (t - self.t_lo) ** self.a_exp

    def params_at(self, t) -> ExpandingMapParams:
        return ExpandingMapParams(
            degree=self.degree,
            amplitude=self.amplitude_at(t),
            phase=(self.phi0 + self.phi1 * (t - self.t_lo)) % TAU,
        )

    @property
    def amplitude_extremes(self):
        # a(t) is monotone in t on the piece, so extremes sit at the endpoints
        ends = (self.amplitude_at(self.t_lo), self.amplitude_at(self.t_hi))
        return min(ends), max(ends)

    @property
    def is_linear(self):
        return self.a0 == 0.0 and self.a1 == 0.0


@dataclass(frozen=True)
class CurveSpec:
    """Piecewise-Hoelder path t -> map parameters on [0, 1].

    Jumps (including degree changes) are allowed only at piece boundaries.
    """

    pieces: tuple[CurvePiece, ...]
    holder_exponent: float = 1.0
    bounds: LambdaAstar = field(default_factory=LambdaAstar)

    def __post_init__(self):
        if not self.pieces:
            raise ConfigurationError("curve needs at least one piece")
        if not 0.0 < self.holder_exponent <= 1.0:
            raise ConfigurationError(
                f"holder_exponent must lie in (0, 1], got {self.holder_exponent}"
            )
        if self.pieces[0].t_lo != 0.0 or self.pieces[-1].t_hi != 1.0:
            raise ConfigurationError("pieces must cover [0, 1]")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.t_hi != right.t_lo:
                raise ConfigurationError(
                    f"gap or overlap between pieces at t={left.t_hi} vs {right.t_lo}"
                )
        for piece in self.pieces:
            if piece.a1 != 0.0 and piece.a_exp < self.holder_exponent:
                raise ConfigurationError(
                    f"piece exponent {piece.a_exp} below declared curve "
                    f"exponent {self.holder_exponent}"
                )
            lo, hi = piece.amplitude_extremes
            worst = max(abs(lo), abs(hi))
            probe = ExpandingMapParams(piece.degree, worst, piece.phi0)
            require_admissible(probe, self.bounds)

    def piece_at(self, t):
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"curve time must lie in [0, 1], got {t}")
        for piece in self.pieces:
            if piece.t_lo <= t < piece.t_hi:
                return piece
        return self.pieces[-1]

    def params_at(self, t) -> ExpandingMapParams:
        return self.piece_at(t).params_at(t)

    @property
    def jump_times(self):
        return tuple(p.t_hi for p in self.pieces[:-1])

    @property
    def is_linear(self):
        """True when every map on the curve is x -> m*x (Lebesgue-preserving)."""
        return all(p.is_linear for p in self.pieces)

    @property
    def is_constant(self):
        if len(self.pieces) > 1:
            degrees = {p.degree for p in self.pieces}
            if len(degrees) > 1:
                return False
        for p in self.pieces:
            if p.a1 != 0.0 or p.phi1 != 0.0:
                return False
        firsts = {(p.degree, p.a0, p.phi0) for p in self.pieces}
        return len(firsts) == 1

    def max_amplitude(self):
        return max(max(abs(e) for e in p.amplitude_extremes) for p in self.pieces)


def constant_curve(params: ExpandingMapParams,
                   bounds: LambdaAstar | None = None) -> CurveSpec:
    piece = CurvePiece(0.0, 1.0, params.degree, a0=params.amplitude,
                       phi0=params.phase)
    return CurveSpec(pieces=(piece,), holder_exponent=1.0,
                     bounds=bounds or LambdaAstar())


@dataclass(frozen=True)
class RateCheck:
    """sup_t d_C1(T_{n, floor(nt)}, gamma_t) per level, with a log-log fit."""

    n_values: tuple[int, ...]
    sup_distances: tuple[float, ...]
    fitted_slope: float
    parameter_bound: tuple[float, ...]

    def slope_ok(self, eta, slack=0.1):
        return self.fitted_slope <= -eta + slack


def array_rate_check(curve: CurveSpec, scheme, n_values,
                     t_samples: int = 2048, refinement: int = 2 ** 12) -> RateCheck:
    """Measure the array-to-curve convergence rate in the C^1 metric.

    For each level n, the supremum over a fine t-grid of
    d_C1(T_{n, floor(nt)}, gamma_t) is computed and compared against the
    parameter-space bound H * n^(-eta) * (1 + 1/2pi).
    """
    n_values = tuple(int(n) for n in n_values)
    if list(n_values) != sorted(n_values):
        raise ValueError("n_values must be ascending")
    ts = np.linspace(0.0, 1.0, t_samples, endpoint=False) + 0.5 / t_samples
    sups, bounds = [], []
    h_const = max(abs(p.a1) for p in curve.pieces) + max(
        abs(p.phi1) * max(abs(e) for e in p.amplitude_extremes)
        for p in curve.pieces
    )
    for n in n_values:
        worst = 0.0
        for t in ts:
            p_arr = scheme.map_params(n, int(math.floor(n * t)))
            p_curve = curve.params_at(float(t))
            if p_arr == p_curve:
                continue
            if p_arr.degree != p_curve.degree:
                worst = max(worst, c1_distance(p_arr, p_curve, refinement).value)
                continue
            # same degree: displacement and derivative gaps are linear in the
            # parameter gaps, cheap closed-form bound is exact for phi-aligned
            # pieces; fall back to the grid when phases differ
            if p_arr.phase == p_curve.phase:
                da = abs(p_arr.amplitude - p_curve.amplitude)
                worst = max(worst, da * AMPLITUDE_TO_C1)
            else:
                worst = max(worst, c1_distance(p_arr, p_curve, refinement).value)
        sups.append(worst)
        bounds.append(h_const * float(n) ** (-curve.holder_exponent)
                      * AMPLITUDE_TO_C1)
    positive = [(n, s) for n, s in zip(n_values, sups) if s > 0.0]
    if len(positive) >= 2:
        ln = np.log([n for n, _ in positive])
        ls = np.log([s for _, s in positive])
        slope = float(np.polyfit(ln, ls, 1)[0])
    else:
        slope = -math.inf  # constant curve: distances identically zero
    return RateCheck(n_values=n_values, sup_distances=tuple(sups),
                     fitted_slope=slope, parameter_bound=tuple(bounds))


def curve_holder_constant(curve: CurveSpec, pairs_per_piece: int = 64,
                          refinement: int = 2 ** 12) -> float:
    """Empirical Hoelder constant of the curve in d_C1, piece by piece.

    Verifies regularity directly in the map metric rather than assuming a
    parameter-space estimate; returns max over sampled (s, t) of
    d_C1(gamma_s, gamma_t) / |t - s|^eta.
    """
    eta = curve.holder_exponent
    worst = 0.0
    for piece in curve.pieces:
        ts = np.linspace(piece.t_lo, piece.t_hi, pairs_per_piece)
        for i in range(len(ts) - 1):
            for j in (i + 1, len(ts) - 1):
                s, t = float(ts[i]), float(ts[j])
                if t <= s:
                    continue
                d = c1_distance(curve.params_at(s),
                                curve.params_at(min(t, piece.t_hi - 1e-12)),
                                refinement).value
                worst = max(worst, d / (t - s) ** eta)
    return worst
