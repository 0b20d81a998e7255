"""Scenario files: JSON schema validation, resolution into domain objects and
a canonical hash of the resolved configuration."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .optimizer import DesignBudget
from .radio import TDL_NORMALIZED_DELAYS, PdpModel, RadioConfig, profile_from_tdl
from .wiener import TapBank

_UNIFORM_RE = re.compile(
    r"^uniform\(\s*(\d+)\s*,\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*\)$")

DEFAULT_RUN = {
    "realizations": 50,
    "theory_realizations": 200,
    "num_symbols": 4096,
    "oversample": 16,
    "seed": 0,
    "simulate": True,
    "psd_nfft": 0,
}


class ConfigError(ValueError):
    """Invalid scenario file; the message names the offending field."""


def load_schema() -> dict:
    text = resources.files("mtdsic").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def _field_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def validate_config(raw: dict) -> None:
    """Raise ConfigError naming the first invalid field (deepest path first)."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: (-len(e.absolute_path), str(e.absolute_path)))
    if errors:
        err = errors[0]
        # oneOf failures hide the useful message one level down
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise ConfigError(f"config field '{_field_path(err)}': {err.message}")
    _semantic_checks(raw)


def _semantic_checks(raw: dict) -> None:
    plans = raw["tap_plans"]
    ids = [_plan_id(p, k) for k, p in enumerate(plans)]
    if len(set(ids)) != len(ids):
        raise ConfigError("config field 'tap_plans': plan ids must be unique")
    for k, p in enumerate(plans):
        if _is_auto(p) and "budget" not in raw:
            raise ConfigError(f"config field 'tap_plans.{k}': 'auto' plan requires a 'budget' section")
        if isinstance(p, dict) and sum(key in p for key in ("delays_ns", "uniform", "auto")) != 1:
            raise ConfigError(f"config field 'tap_plans.{k}': give exactly one of delays_ns, uniform, auto")
        if isinstance(p, str) and p != "auto" and not _UNIFORM_RE.match(p):
            raise ConfigError(f"config field 'tap_plans.{k}': expected 'uniform(N, spacing_ns, start_ns)'")
    known = set(TDL_NORMALIZED_DELAYS) | {t.upper() for t in raw.get("tdl_tables", {})}
    for k, ch in enumerate(raw["channels"]):
        if ch["tdl"].upper() not in known:
            raise ConfigError(f"config field 'channels.{k}.tdl': unknown table '{ch['tdl']}', "
                              f"known: {sorted(known)}")
        tds = ch["tau_ds_ns"]
        if isinstance(tds, dict) and tds["stop"] < tds["start"]:
            raise ConfigError(f"config field 'channels.{k}.tau_ds_ns': stop < start")
    try:
        RadioConfig.from_dict(raw.get("radio", {}))
    except ValueError as exc:
        raise ConfigError(f"config field 'radio': {exc}") from None


def _is_auto(p) -> bool:
    return p == "auto" or (isinstance(p, dict) and p.get("auto", False))


def _plan_id(p, k: int) -> str:
    if isinstance(p, str):
        return p if p == "auto" else p.replace(" ", "")
    return p["id"]


def sweep_values(spec) -> list[float]:
    """tau_ds list (ns) from an explicit list or a start/stop/steps mapping."""
    if isinstance(spec, dict):
        return [float(v) for v in np.linspace(spec["start"], spec["stop"], spec["steps"])]
    return [float(v) for v in spec]


def parse_sweep_flag(text: str) -> tuple[str, dict]:
    """'tau_ds=5:100:20' -> ('tau_ds', {'start': 5, 'stop': 100, 'steps': 20})."""
    try:
        key, rng = text.split("=", 1)
        a, b, n = rng.split(":")
        out = {"start": float(a), "stop": float(b), "steps": int(n)}
    except ValueError:
        raise ConfigError(f"bad --sweep value {text!r}; expected tau_ds=start:stop:steps") from None
    if key.strip() != "tau_ds":
        raise ConfigError(f"unsupported sweep variable {key!r}; only tau_ds is sweepable")
    if out["steps"] < 1 or out["start"] <= 0 or out["stop"] < out["start"]:
        raise ConfigError(f"bad --sweep range {rng!r}")
    return "tau_ds", out


@dataclass
class PlanSpec:
    plan_id: str
    kind: str                   # "explicit" | "uniform" | "auto"
    delays_ns: tuple = ()
    weight_bound: float = 1.0

    def tap_bank(self) -> TapBank:
        if self.kind == "auto":
            raise ValueError("auto plans are resolved by the design step")
        return TapBank(np.asarray(self.delays_ns) * 1e-9, self.weight_bound)


@dataclass
class Scenario:
    """Resolved scenario; ``resolved`` is the normalized dict that is hashed."""

    radio: RadioConfig
    pdp: PdpModel
    tdl_tables: dict
    impairments: dict
    channels: list
    budget: DesignBudget | None
    budget_algorithm: str
    plans: list
    run: dict
    output_dir: Path
    resolved: dict = field(repr=False, default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)

    def profile(self, tdl: str, tau_ds_ns: float):
        return profile_from_tdl(tdl, tau_ds_ns * 1e-9, self.pdp, self.radio, self.tdl_tables)


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _resolve_plan(p, k: int) -> PlanSpec:
    if isinstance(p, str):
        if p == "auto":
            return PlanSpec("auto", "auto")
        m = _UNIFORM_RE.match(p)
        n, sp, st = int(m.group(1)), float(m.group(2)), float(m.group(3))
        return PlanSpec(_plan_id(p, k), "uniform", tuple(st + sp * np.arange(n)))
    w0 = float(p.get("w0", 1.0))
    if "delays_ns" in p:
        return PlanSpec(p["id"], "explicit", tuple(float(x) for x in p["delays_ns"]), w0)
    if "uniform" in p:
        u = p["uniform"]
        return PlanSpec(p["id"], "uniform",
                        tuple(u["start_ns"] + u["spacing_ns"] * np.arange(u["num_taps"])), w0)
    return PlanSpec(p["id"], "auto", (), w0)


def resolve(raw: dict, seed: int | None = None, out: str | None = None,
            sweep: dict | None = None) -> Scenario:
    """Validate ``raw`` and apply command-line overrides."""
    validate_config(raw)
    raw = copy.deepcopy(raw)
    if sweep is not None:
        for ch in raw["channels"]:
            ch["tau_ds_ns"] = dict(sweep)
    radio = RadioConfig.from_dict(raw.get("radio", {}))
    pdp = PdpModel(**raw.get("pdp", {}))
    run = dict(DEFAULT_RUN)
    run.update(raw.get("run", {}))
    if seed is not None:
        run["seed"] = int(seed)
    imp = {"symbols": "gaussian", "calibration_seed": 12345, "enabled": True}
    imp.update(raw.get("impairments", {}))
    channels = [(ch["tdl"].upper(), sweep_values(ch["tau_ds_ns"])) for ch in raw["channels"]]
    budget = None
    algo = "initial"
    if "budget" in raw:
        b = dict(raw["budget"])
        algo = b.pop("algorithm", "initial")
        tau_max = b.get("tau_max_ns")
        budget = DesignBudget.from_eta_db(
            b["eta_db"], M_assumed=int(b.get("M_assumed", 22)), w0=float(b.get("w0", 1.0)),
            tau_min_s=float(b.get("tau_min_ns", 1.0)) * 1e-9,
            tau_max_s=float("inf") if tau_max is None else float(tau_max) * 1e-9,
            d1_anchor_s=float(b.get("d1_anchor_ns", 0.2)) * 1e-9,
            max_step_bw=float(b.get("max_step_bw", 1.0)))
    plans = [_resolve_plan(p, k) for k, p in enumerate(raw["tap_plans"])]
    tables = {k.upper(): list(v) for k, v in raw.get("tdl_tables", {}).items()}
    output_dir = Path(out if out is not None else raw.get("outputs", {}).get("directory", "out"))
    resolved = {
        "radio": radio.to_dict(),
        "pdp": {"intercept_db": pdp.intercept_db, "slope_db_per_decade": pdp.slope_db_per_decade,
                "domain_min_s": pdp.domain_min_s},
        "tdl_tables": tables,
        "impairments": imp,
        "channels": [{"tdl": t, "tau_ds_ns": v} for t, v in channels],
        "budget": None if budget is None else {
            "eta": budget.eta, "M_assumed": budget.M_assumed, "w0": budget.w0,
            "tau_min_s": budget.tau_min_s,
            "tau_max_s": None if budget.tau_max_s == float("inf") else budget.tau_max_s,
            "d1_anchor_s": budget.d1_anchor_s, "max_step_bw": budget.max_step_bw,
            "algorithm": algo},
        "tap_plans": [{"id": p.plan_id, "kind": p.kind, "delays_ns": list(p.delays_ns),
                       "w0": p.weight_bound} for p in plans],
        "run": run,
    }
    return Scenario(radio, pdp, tables, imp, channels, budget, algo, plans, run, output_dir, resolved)


def load_scenario(path, **overrides) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return resolve(raw, **overrides)
