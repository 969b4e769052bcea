"""Experiment configuration: sectioned key = value files.

Five sections: [problem], [control], [cost], [tolerances], [run].  Every key
has a default, and unknown sections or keys are rejected by name, so a typo
cannot silently fall back to a default.  The digest hashes the fully
defaulted, canonically ordered key set: two configs collide iff every
effective value agrees, whether or not the files spell them out.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass
from typing import Any

from .controls import ControlBounds
from .costs import RunningCost, boundary_effort_cost, clipped_weak_energy_cost, constant_cost
from .errors import ConfigError
from .operators import WeakNormFactorization
from .problem import ProblemSpec
from .value import LatticeSpec

COST_FAMILIES = ("constant", "clipped-b-energy")
L1_MODES = ("none", "effort")

# section -> key -> (python type, default); the single source of truth for
# what a config file may say.
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "problem": {
        "beta": (float, 1.0),
        "mu": (float, 0.0),
        "sbar": (float, 1.0),
        "rho": (float, 1.0),
        "lambda_b": (float, 0.5),
        "grid_points": (int, 201),
        "horizon": (float, 3.0),
    },
    "control": {
        "gamma_lo": (float, 0.0),
        "gamma_hi": (float, 1.0),
        "lambda_lo": (float, 0.0),
        "lambda_hi": (float, 0.0),
        "n_boundary": (int, 2),
        "n_distributed": (int, 1),
        "segments": (int, 6),
    },
    "cost": {
        "family": (str, "clipped-b-energy"),
        "c_l": (float, 1.0),
        "l1_mode": (str, "none"),
        "effort_weight": (float, 0.25),
    },
    "tolerances": {
        "energy_rate_tol": (float, 1e-5),
        "pairing_rate_tol": (float, 1e-5),
        "monotone_noise_tol": (float, 1e-6),
        "uniform_bound_slack": (float, 1e-6),
        "state_convergence_margin": (float, 1.5),
        "chain_rule_tol": (float, 1e-3),
        "stability_slack": (float, 1e-6),
        "lipschitz_slack": (float, 1e-6),
        "radial_rate_tol": (float, 1e-9),
        "smooth_rate_tol": (float, 1e-3),
        "gradient_range_slack": (float, 1e-9),
        "domination_tol": (float, 1e-6),
        "identity_tol": (float, 1e-6),
        "trace_gap_tol": (float, 1e-6),
        "stationarity_tol": (float, 2e-3),
        "dpp_slack": (float, 1e-9),
    },
    # worker count is runtime plumbing, not configuration: results must not
    # depend on it, so it stays out of the file format and the digest
    "run": {
        "seed": (int, 0),
        "search_budget": (int, 2000),
        "eval_budget": (int, 2_000_000),
        "n_final": (int, 64),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully defaulted, validated experiment configuration."""

    values: dict[str, dict[str, Any]]

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    def canonical_items(self) -> list[tuple[str, str, Any]]:
        out = []
        for section in sorted(self.values):
            for key in sorted(self.values[section]):
                out.append((section, key, self.values[section][key]))
        return out

    def digest(self) -> str:
        text = "\n".join(f"{s}.{k}={v!r}" for s, k, v in self.canonical_items())
        return hashlib.sha256(text.encode("ascii")).hexdigest()

    def to_text(self) -> str:
        """Round-trippable file content with every effective value explicit."""
        buf = io.StringIO()
        for section in SCHEMA:
            buf.write(f"[{section}]\n")
            for key in SCHEMA[section]:
                buf.write(f"{key} = {self.values[section][key]}\n")
            buf.write("\n")
        return buf.getvalue()

    def replaced(self, section: str, key: str, value: Any) -> "ExperimentConfig":
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown config key: [{section}] {key}")
        nested = {s: dict(kv) for s, kv in self.values.items()}
        nested[section][key] = SCHEMA[section][key][0](value)
        return _validated(nested)

    # -- builders -----------------------------------------------------------

    def make_problem(self) -> ProblemSpec:
        p = self.values["problem"]
        return ProblemSpec.make(
            beta=p["beta"],
            mu=p["mu"],
            sbar=p["sbar"],
            rho=p["rho"],
            lambda_b=p["lambda_b"],
            node_count=p["grid_points"],
        )

    def make_bounds(self) -> ControlBounds:
        c = self.values["control"]
        return ControlBounds(
            gamma_lo=c["gamma_lo"],
            gamma_hi=c["gamma_hi"],
            lambda_lo=c["lambda_lo"],
            lambda_hi=c["lambda_hi"],
        )

    def make_lattice(self) -> LatticeSpec:
        c = self.values["control"]
        return LatticeSpec(c["n_boundary"], c["n_distributed"], c["segments"])

    def make_cost(self, bf: WeakNormFactorization) -> RunningCost:
        c = self.values["cost"]
        if c["family"] == "constant":
            return constant_cost(c["c_l"])
        if c["l1_mode"] == "effort":
            return boundary_effort_cost(
                bf, c["c_l"], c["effort_weight"], self.make_bounds().gamma_norm
            )
        return clipped_weak_energy_cost(bf, c["c_l"])

    @property
    def horizon(self) -> float:
        return float(self.values["problem"]["horizon"])

    @property
    def seed(self) -> int:
        return int(self.values["run"]["seed"])


def _convert(section: str, key: str, raw: str) -> Any:
    typ = SCHEMA[section][key][0]
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return str(raw).strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r}") from exc


def _validated(nested: dict[str, dict[str, Any]]) -> ExperimentConfig:
    cfg = ExperimentConfig(values=nested)
    cost = nested["cost"]
    if cost["family"] not in COST_FAMILIES:
        raise ConfigError(
            f"bad value for [cost] family: {cost['family']!r} "
            f"(one of {', '.join(COST_FAMILIES)})"
        )
    if cost["l1_mode"] not in L1_MODES:
        raise ConfigError(
            f"bad value for [cost] l1_mode: {cost['l1_mode']!r} "
            f"(one of {', '.join(L1_MODES)})"
        )
    if cost["c_l"] <= 0 and cost["family"] != "constant":
        raise ConfigError(f"bad value for [cost] c_l: {cost['c_l']!r} (must be positive)")
    if cost["l1_mode"] == "effort" and cost["family"] == "constant":
        raise ConfigError("l1_mode = effort needs the clipped-b-energy cost family")
    run = nested["run"]
    if run["eval_budget"] < 1:
        raise ConfigError(f"bad value for [run] eval_budget: {run['eval_budget']!r} (must be >= 1)")
    if run["search_budget"] < 0 or run["n_final"] < 1:
        raise ConfigError("bad value in [run]: search_budget >= 0 and n_final >= 1 required")
    for key, val in nested["tolerances"].items():
        if val < 0:
            raise ConfigError(f"bad value for [tolerances] {key}: {val!r} (must be >= 0)")
    # these raise their own descriptive errors on bad numbers
    try:
        cfg.make_problem()
        cfg.make_bounds()
        cfg.make_lattice()
        cfg.make_problem().time_steps_of(cfg.horizon, what="horizon")
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def default_config() -> ExperimentConfig:
    nested = {s: {k: v for k, (_, v) in kv.items()} for s, kv in SCHEMA.items()}
    return _validated(nested)


def parse_config(path: str | None) -> ExperimentConfig:
    """Load a config file over the defaults; None means pure defaults.

    Rejection is by name: the error message carries the offending section or
    key so a shell caller sees what to fix without opening the source.
    """
    nested = {s: {k: v for k, (_, v) in kv.items()} for s, kv in SCHEMA.items()}
    if path is None:
        return _validated(nested)
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), interpolation=None
    )
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section: [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown config key: [{section}] {key}")
            nested[section][key] = _convert(section, key, raw)
    return _validated(nested)
