"""Experiment runners: assemble orbits, references, and pass/fail checks.

Every runner consumes an ExperimentConfig and returns an ExperimentResult
holding plot-ready tables plus named boolean checks.  Runners never touch
the filesystem; the CLI owns all I/O.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .core import (TriangularArrayScheme, default_t_grid, ensemble_zeta_paths,
                   evolve_orbit, observable_sequence,
                   zeta_values_from_observations)
from .errors import ConfigurationError
from .observables import default_dictionary
from .sampling import LebesgueSampler
from .srb import (density_curve, mean_defect_table, zeta_curve_from_density)
from .stats import (CorrelationSpec, correlation_estimate, decay_fit,
                    four_point_random_spaces, fourth_moment_series,
                    moments_growth_ok)

CONVERGENCE_COLUMNS = ("n", "q05", "median", "q95", "ensemble", "seed")
SRB_COLUMNS = ("t", "zeta", "ulam_N", "residual")
CORRELATION_COLUMNS = ("gap", "estimate", "std_error", "samples")
MOMENT_COLUMNS = ("n", "m4", "std_error", "n_log2_scaled")
GENERICITY_COLUMNS = ("n", "epsilon", "fraction", "samples", "seed")
INVARIANCE_COLUMNS = ("n", "t", "mean", "std_error", "reference", "ok")
PROBE_COLUMNS = ("n", "x0", "sup_distance")
RATE_COLUMNS = ("n", "sup_defect")
IDENTITY_COLUMNS = ("spaces", "max_support", "max_discrepancy", "seed")


@dataclass
class ExperimentResult:
    name: str
    experiment_id: str
    checks: dict[str, bool] = field(default_factory=dict)
    tables: dict[str, tuple[tuple[str, ...], list[tuple]]] = field(
        default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def summary_lines(self):
        for key in sorted(self.checks):
            verdict = "PASS" if self.checks[key] else "FAIL"
            yield f"[{verdict}] {self.name}: {key}"


def _reference_values(cfg: ExperimentConfig, observables, t_grid):
    """Reference zeta values per observable, plus srb tables when the
    reference comes from the discretized transfer operator."""
    refs, srb_tables, info = {}, {}, {}
    if cfg.experiment_id == "E-COMMON":
        for obs in observables:
            refs[obs.name] = obs.lebesgue_mean * t_grid + cfg.reference_shift
        info["reference"] = "t * lebesgue_mean(f)"
        return refs, srb_tables, info
    dc = density_curve(cfg.curve, s_nodes=cfg.s_nodes, bins=cfg.ulam_bins,
                       subsamples=cfg.ulam_subsamples)
    for obs in observables:
        zc = zeta_curve_from_density(dc, obs)
        refs[obs.name] = zc.values_on(t_grid) + cfg.reference_shift
        rows = []
        for nodes, densities in zip(dc.piece_nodes, dc.piece_densities):
            for t_node, dens in zip(nodes, densities):
                rows.append((float(t_node), zc.at(float(t_node)),
                             cfg.ulam_bins, dens.residual))
        srb_tables[obs.name] = rows
    info["reference"] = "ulam zeta curve"
    info["ulam_max_residual"] = dc.max_residual
    return refs, srb_tables, info


def _common_invariance_precheck(scheme):
    if not scheme.curve.is_linear:
        raise ConfigurationError(
            "common-measure experiment requires every map on the curve to "
            "preserve Lebesgue measure exactly (amplitude 0 throughout)"
        )
    if scheme.mode != "canonical":
        raise ConfigurationError(
            "perturbed arrays break exact common invariance"
        )


def run_convergence(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Shared engine behind the Birkhoff, expanding, and common-measure runs.

    For each level n, evolves an ensemble of Lebesgue-random starts, compares
    every member's zeta path against the reference curve, and reports the
    (5%, 50%, 95%) quantiles of the sup distance.
    """
    result = ExperimentResult(name=cfg.name, experiment_id=cfg.experiment_id)
    observables = cfg.observables or default_dictionary()
    if cfg.experiment_id == "E-GENERIC":
        if len(observables) < 5:
            raise ConfigurationError(
                "genericity runs need a dictionary of at least 5 observables"
            )
        if not cfg.epsilons:
            raise ConfigurationError(
                "genericity runs need at least one epsilon level"
            )
    scheme = TriangularArrayScheme(cfg.curve, mode=cfg.mode,
                                   perturbation_scale=cfg.perturbation_scale)
    if cfg.experiment_id == "E-BIRKHOFF" and not cfg.curve.is_constant:
        raise ConfigurationError("Birkhoff runs require a constant curve")
    if cfg.experiment_id == "E-COMMON":
        _common_invariance_precheck(scheme)

    n_max = max(cfg.n_values)
    t_grid = default_t_grid(n_max, cfg.t_points)
    refs, srb_tables, info = _reference_values(cfg, observables, t_grid)
    result.details.update(info)
    for name, rows in srb_tables.items():
        result.tables[f"srb_{name}"] = (SRB_COLUMNS, rows)

    sampler = LebesgueSampler()
    if scheme.uses_lattice:
        starts = sampler.draw_lattice(cfg.seed, cfg.ensemble)
    else:
        starts = sampler.draw_floats(cfg.seed, cfg.ensemble)

    conv_rows = {obs.name: [] for obs in observables}
    medians = {obs.name: [] for obs in observables}
    inv_rows = []
    generic_rows = []
    fraction_at = {}
    for n in cfg.n_values:
        paths = ensemble_zeta_paths(scheme, n, observables, t_grid, starts,
                                    threads=threads)
        supdists = []
        for o, obs in enumerate(observables):
            gaps = np.abs(paths.zeta[o] - refs[obs.name][None, :])
            sup = gaps.max(axis=1)
            supdists.append(sup)
            q05, q50, q95 = np.quantile(sup, [0.05, 0.5, 0.95])
            conv_rows[obs.name].append(
                (n, float(q05), float(q50), float(q95), cfg.ensemble, cfg.seed))
            medians[obs.name].append(float(q50))
        if cfg.experiment_id == "E-COMMON":
            idx = np.searchsorted(t_grid, cfg.invariance_t)
            for o, obs in enumerate(observables):
                for pos, t_req in zip(idx, cfg.invariance_t):
                    fvals = paths.f_at_captures[o, :, pos]
                    mean = float(fvals.mean())
                    se = float(fvals.std(ddof=1) / math.sqrt(cfg.ensemble))
                    ok = abs(mean - obs.lebesgue_mean) <= 3.0 * se
                    inv_rows.append((n, float(t_grid[pos]), mean, se,
                                     obs.lebesgue_mean, ok))
        if cfg.epsilons:
            worst = np.max(np.stack(supdists), axis=0)
            for eps in cfg.epsilons:
                frac = float(np.mean(worst < eps))
                generic_rows.append((n, eps, frac, cfg.ensemble, cfg.seed))
                fraction_at[(n, eps)] = frac

    for obs in observables:
        result.tables[f"convergence_{obs.name}"] = (
            CONVERGENCE_COLUMNS, conv_rows[obs.name])

    probe_rows = []
    for x0 in cfg.probe_points:
        for n in cfg.n_values:
            orbit = evolve_orbit(x0, n, scheme)
            for obs in observables:
                values = zeta_values_from_observations(
                    observable_sequence(obs, orbit), n, t_grid)
                gap = float(np.max(np.abs(values - refs[obs.name])))
                probe_rows.append((n, x0, gap))
    if probe_rows:
        result.tables["probes"] = (PROBE_COLUMNS, probe_rows)

    if len(cfg.n_values) >= 2:
        for obs in observables:
            med = medians[obs.name]
            result.checks[f"median_decreasing_{obs.name}"] = all(
                b < a for a, b in zip(med, med[1:]))
            if cfg.median_decrease_factor > 1.0:
                result.checks[f"median_factor_{obs.name}"] = (
                    med[-1] * cfg.median_decrease_factor <= med[0])
            result.details[f"medians_{obs.name}"] = med

    if inv_rows:
        result.tables["invariance"] = (INVARIANCE_COLUMNS, inv_rows)
        result.checks["common_invariance_3sigma"] = all(r[-1] for r in inv_rows)
    if generic_rows:
        result.tables["genericity"] = (GENERICITY_COLUMNS, generic_rows)
        n_big = max(cfg.n_values)
        for eps in cfg.epsilons:
            result.checks[f"generic_fraction_n{n_big}_eps{eps:g}"] = (
                fraction_at[(n_big, eps)] >= cfg.min_fraction)

    if cfg.b2_check:
        table = mean_defect_table(cfg.curve, observables[0], cfg.b2_n_values,
                                  bins=cfg.b2_bins)
        result.tables["rate"] = (
            RATE_COLUMNS,
            [(n, d) for n, d in zip(table.n_values, table.sup_defects)])
        result.checks["mean_defect_slope"] = table.slope_ok(cfg.b2_slope_max)
        result.details["mean_defect_slope"] = table.fitted_slope
    return result


def run_birkhoff(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return run_convergence(cfg, threads)


def run_expanding(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return run_convergence(cfg, threads)


def run_common_measure(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return run_convergence(cfg, threads)


def run_genericity(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return run_convergence(cfg, threads)


def run_correlations(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    result = ExperimentResult(name=cfg.name, experiment_id=cfg.experiment_id)
    scheme = TriangularArrayScheme(cfg.curve, mode=cfg.mode,
                                   perturbation_scale=cfg.perturbation_scale)
    obs = cfg.observables[0]
    sampler = LebesgueSampler()
    rows, estimates = [], []
    for gap in cfg.gaps:
        spec = CorrelationSpec(ell=2, j=1,
                               k_indices=(cfg.corr_k1, cfg.corr_k1 + gap),
                               n=cfg.corr_level)
        est = correlation_estimate(spec, obs, scheme, sampler, cfg.samples,
                                   cfg.seed)
        estimates.append(est)
        rows.append((gap, est.mean, est.std_error, est.samples))
    result.tables["correlations"] = (CORRELATION_COLUMNS, rows)
    fit = decay_fit(cfg.gaps, estimates)
    if fit is None:
        result.checks["decay_fit_conclusive"] = False
        result.details["decay_fit"] = "inconclusive"
    else:
        result.checks["decay_fit_conclusive"] = True
        result.checks["decay_theta_below_1"] = fit.decaying
        result.details["decay_fit"] = {
            "D": fit.d_const, "theta": fit.theta,
            "gaps_used": list(fit.gaps_used),
            "residual_rms": fit.residual_rms,
        }
    return result


def run_moments(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    result = ExperimentResult(name=cfg.name, experiment_id=cfg.experiment_id)
    scheme = TriangularArrayScheme(cfg.curve, mode=cfg.mode,
                                   perturbation_scale=cfg.perturbation_scale)
    obs = cfg.observables[0]
    sampler = LebesgueSampler()
    for t in cfg.t_values:
        series = fourth_moment_series(obs, scheme, t, cfg.n_values, sampler,
                                      cfg.samples, cfg.seed, threads=threads)
        rows = [(e.n, e.fourth_moment, e.std_error, e.scaled) for e in series]
        result.tables[f"moments_t{t:g}"] = (MOMENT_COLUMNS, rows)
        result.checks[f"scaled_moment_bounded_t{t:g}"] = moments_growth_ok(series)
    return result


def run_identity(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    result = ExperimentResult(name=cfg.name, experiment_id=cfg.experiment_id)
    worst = four_point_random_spaces(cfg.spaces, cfg.max_support, cfg.seed)
    result.tables["identity"] = (
        IDENTITY_COLUMNS, [(cfg.spaces, cfg.max_support, worst, cfg.seed)])
    result.checks["expansion_identity_1e-12"] = worst <= 1e-12
    result.details["max_discrepancy"] = worst
    return result


def run_srb_only(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Just the limit-curve data (t, zeta, ulam_N, residual) for a config."""
    result = ExperimentResult(name=cfg.name, experiment_id=cfg.experiment_id)
    observables = cfg.observables or default_dictionary()
    t_grid = default_t_grid(max(cfg.n_values), cfg.t_points)
    refs, srb_tables, info = _reference_values(cfg, observables, t_grid)
    result.details.update(info)
    for name, rows in srb_tables.items():
        result.tables[f"srb_{name}"] = (SRB_COLUMNS, rows)
    result.checks["computed"] = True
    return result


_RUNNERS = {
    "E-BIRKHOFF": run_birkhoff,
    "E-EXPANDING": run_expanding,
    "E-COMMON": run_common_measure,
    "E-GENERIC": run_genericity,
    "E-CORR": run_correlations,
    "E-MOMENTS": run_moments,
    "E-IDENTITY": run_identity,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return _RUNNERS[cfg.experiment_id](cfg, threads)
