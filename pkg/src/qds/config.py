"""Flat key = value experiment configs (INI sections, UTF-8).

A config file declares named curves and named experiments:

    [curve.ramp]
    holder_exponent = 1.0
    lambda = 1.4
    a_star = 6.3
    piece.0 = t0=0, t1=1, m=2, a0=0, a1=0.5, a_exp=1

    [experiment.expanding]
    id = E-EXPANDING
    curve = ramp
    observables = cos:1 cos2
    n_values = 1000 10000 100000
    ensemble = 200
    seed = 20260809

Lists are space-separated; piece entries are comma-separated key=value
pairs.  Unknown keys raise, so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields

from .errors import ConfigurationError
from .maps import CurvePiece, CurveSpec, LambdaAstar
from .observables import Observable, parse_observable

EXPERIMENT_IDS = (
    "E-BIRKHOFF", "E-EXPANDING", "E-COMMON", "E-GENERIC",
    "E-MOMENTS", "E-CORR", "E-IDENTITY",
)
CONVERGENCE_IDS = ("E-BIRKHOFF", "E-EXPANDING", "E-COMMON", "E-GENERIC")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    experiment_id: str
    curve: CurveSpec | None = None
    observables: tuple[Observable, ...] = ()
    n_values: tuple[int, ...] = (1000, 10000)
    ensemble: int = 200
    t_points: int = 513
    ulam_bins: int = 1024
    ulam_subsamples: int = 64
    s_nodes: int = 257
    seed: int = 0
    mode: str = "canonical"
    perturbation_scale: float = 0.0
    probe_points: tuple[float, ...] = ()
    epsilons: tuple[float, ...] = ()
    min_fraction: float = 0.95
    median_decrease_factor: float = 1.0
    reference_shift: float = 0.0
    b2_check: bool = False
    b2_n_values: tuple[int, ...] = (100, 1000, 10000)
    b2_slope_max: float = -0.65
    b2_bins: int = 1024
    invariance_t: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    samples: int = 5000
    corr_level: int = 64
    corr_k1: int = 8
    gaps: tuple[int, ...] = tuple(range(1, 16))
    t_values: tuple[float, ...] = (0.5, 1.0)
    spaces: int = 1000
    max_support: int = 32

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigurationError(
                f"unknown experiment id {self.experiment_id!r}"
            )
        if self.experiment_id != "E-IDENTITY" and self.curve is None:
            raise ConfigurationError(
                f"experiment {self.name!r} needs a curve"
            )
        if self.experiment_id in CONVERGENCE_IDS + ("E-MOMENTS",):
            if not self.observables and self.experiment_id != "E-GENERIC":
                raise ConfigurationError(
                    f"experiment {self.name!r} needs observables"
                )
        if list(self.n_values) != sorted(self.n_values):
            raise ConfigurationError("n_values must be ascending")


_INT_LIST = {"n_values", "b2_n_values", "gaps"}
_FLOAT_LIST = {"probe_points", "epsilons", "invariance_t", "t_values"}
_INT = {"ensemble", "t_points", "ulam_bins", "ulam_subsamples", "s_nodes",
        "seed", "samples", "corr_level", "corr_k1", "spaces", "max_support",
        "b2_bins"}
_FLOAT = {"perturbation_scale", "min_fraction", "median_decrease_factor",
          "reference_shift", "b2_slope_max"}
_BOOL = {"b2_check"}
_KEY_ALIASES = {"epsilon": "epsilons"}


def _parse_piece(text: str) -> CurvePiece:
    kwargs = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, _, val = item.partition("=")
        kwargs[key.strip()] = val.strip()
    for required in ("t0", "t1", "m"):
        if required not in kwargs:
            raise ConfigurationError(f"piece spec {text!r} missing {required!r}")
    known = {"t0", "t1", "m", "a0", "a1", "a_exp", "phi0", "phi1"}
    unknown = set(kwargs) - known
    if unknown:
        raise ConfigurationError(f"unknown piece keys {sorted(unknown)} in {text!r}")
    return CurvePiece(
        t_lo=float(kwargs["t0"]),
        t_hi=float(kwargs["t1"]),
        degree=int(kwargs["m"]),
        a0=float(kwargs.get("a0", 0.0)),
        a1=float(kwargs.get("a1", 0.0)),
        a_exp=float(kwargs.get("a_exp", 1.0)),
        phi0=float(kwargs.get("phi0", 0.0)),
        phi1=float(kwargs.get("phi1", 0.0)),
    )


def _parse_curve(section) -> CurveSpec:
    pieces = []
    eta = 1.0
    lam = 1.2
    a_star = LambdaAstar().a_star
    for key, value in section.items():
        if key.startswith("piece."):
            pieces.append((int(key.split(".", 1)[1]), _parse_piece(value)))
        elif key == "holder_exponent":
            eta = float(value)
        elif key == "lambda":
            lam = float(value)
        elif key == "a_star":
            a_star = float(value)
        else:
            raise ConfigurationError(f"unknown curve key {key!r}")
    pieces.sort(key=lambda kv: kv[0])
    return CurveSpec(pieces=tuple(p for _, p in pieces), holder_exponent=eta,
                     bounds=LambdaAstar(lam, a_star))


def _coerce(key, value):
    if key in _INT_LIST:
        return tuple(int(v) for v in value.split())
    if key in _FLOAT_LIST:
        return tuple(float(v) for v in value.split())
    if key in _INT:
        return int(value)
    if key in _FLOAT:
        return float(value)
    if key in _BOOL:
        lowered = value.strip().lower()
        if lowered not in ("true", "false", "0", "1", "yes", "no"):
            raise ConfigurationError(f"cannot parse boolean {value!r}")
        return lowered in ("true", "1", "yes")
    return value


def load_config(path) -> list[ExperimentConfig]:
    """Parse a config file into experiment configs, in file order."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    curves = {}
    for section in parser.sections():
        if section.startswith("curve."):
            curves[section.split(".", 1)[1]] = _parse_curve(parser[section])
    experiments = []
    valid_keys = {f.name for f in fields(ExperimentConfig)}
    for section in parser.sections():
        if not section.startswith("experiment."):
            if not section.startswith("curve."):
                raise ConfigurationError(f"unknown section [{section}]")
            continue
        name = section.split(".", 1)[1]
        kwargs = {"name": name}
        for key, value in parser[section].items():
            key = _KEY_ALIASES.get(key, key)
            if key == "id":
                kwargs["experiment_id"] = value.strip()
            elif key == "curve":
                ref = value.strip()
                if ref not in curves:
                    raise ConfigurationError(
                        f"experiment {name!r} references unknown curve {ref!r}"
                    )
                kwargs["curve"] = curves[ref]
            elif key == "observables":
                kwargs["observables"] = tuple(
                    parse_observable(tok) for tok in value.split()
                )
            elif key in valid_keys:
                kwargs[key] = _coerce(key, value)
            else:
                raise ConfigurationError(
                    f"unknown key {key!r} in experiment {name!r}"
                )
        if "experiment_id" not in kwargs:
            raise ConfigurationError(f"experiment {name!r} has no id")
        try:
            experiments.append(ExperimentConfig(**kwargs))
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc
    return experiments
