"""Command-line front end: ``mtdsic {design,eval,validate,report}``.

Exit codes: 0 success, 1 failed checks, 2 bad configuration or an
infeasible design budget, 3 runtime failure during evaluation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from .montecarlo import simulate_scr
from .optimizer import DelayPlan, InfeasibleBudgetError, algorithm1_minimize_taps, algorithm2_init
from .radio import lin_to_db
from .scenario import ConfigError, Scenario, load_scenario, parse_sweep_flag
from .signal import TxImpairments
from .wiener import IllConditionedGramWarning, TapBank, stochastic_bounds, theory_scr_db

log = logging.getLogger("mtdsic")

EVAL_COLUMNS = ["channel", "tau_ds_ns", "b_mhz", "tap_plan_id", "scr_sim_db", "scr_theory_db",
                "bound_lo_db", "bound_hi_db", "realizations", "seed", "config_hash"]
REPORT_COLUMNS = ["config_hash", "channel", "tau_ds_ns", "b_mhz", "tap_plan_id", "metric", "value"]


class EvalError(RuntimeError):
    pass


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if np.isnan(x) else f"{x:.6f}"
    return str(x)


def write_csv(path: Path, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- design -----------------------------------------------------------------

def design_plan(sc: Scenario, workers: int = 1) -> DelayPlan:
    if sc.budget is None:
        raise ConfigError("config field 'budget': required for design")
    if sc.budget_algorithm == "minimize":
        return algorithm1_minimize_taps(sc.budget, sc.pdp, sc.radio, seed=sc.run["seed"], workers=workers)
    return algorithm2_init(sc.budget, sc.pdp, sc.radio)


def cmd_design(sc: Scenario, args) -> int:
    t0 = time.perf_counter()
    try:
        plan = design_plan(sc, args.threads)
    except InfeasibleBudgetError as exc:
        print(f"error: infeasible budget: {exc}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0
    out = sc.output_dir / "plan_auto.json"
    doc = plan.to_dict()
    doc.update({"config_hash": sc.config_hash, "algorithm": sc.budget_algorithm,
                "runtime_s": round(elapsed, 3)})
    write_json(out, doc)
    if plan.num_taps == 0:
        print("N = 0: no taps needed (every delay in the domain already meets the budget)")
        print(f"wrote {out}")
        return 0
    print(f"N = {plan.num_taps}")
    print("delays_ns = [" + ", ".join(f"{d * 1e9:.4f}" for d in plan.delays_s) + "]")
    print(f"worst-case error = {lin_to_db(plan.worst_case_error):.2f} dB vs eta = "
          f"{lin_to_db(plan.eta):.2f} dB ({'feasible' if plan.feasible else 'INFEASIBLE'})")
    print(f"wrote {out}")
    if not plan.feasible:
        print("error: budget cannot be met by the constructed plan", file=sys.stderr)
        return 2
    return 0


# -- eval -------------------------------------------------------------------

def _resolve_banks(sc: Scenario, workers: int) -> dict[str, TapBank]:
    banks = {}
    for p in sc.plans:
        if p.kind == "auto":
            plan = design_plan(sc, workers)
            if plan.num_taps == 0:
                raise EvalError(f"plan '{p.plan_id}': design needs no taps, nothing to evaluate")
            banks[p.plan_id] = TapBank(plan.delays_s, sc.budget.w0)
        else:
            banks[p.plan_id] = p.tap_bank()
    return banks


def _task_seeds(seed: int, key: tuple) -> tuple[int, int]:
    ss = np.random.SeedSequence(seed, spawn_key=key)
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def _eval_point(task):
    sc, (ci, tdl), (ti, tds), (pi, plan_id), bank, imp, psd_dir = task
    coord = f"channel={tdl} tau_ds={tds:g}ns plan={plan_id}"
    try:
        run = sc.run
        s_theory, s_sim = _task_seeds(run["seed"], (ci, ti, pi))
        prof = sc.profile(tdl, tds)
        rep = stochastic_bounds(prof, bank, sc.radio)
        scr_t = theory_scr_db(prof, bank, sc.radio, run["theory_realizations"], s_theory)
        scr_s = float("nan")
        if run["simulate"]:
            nfft = run["psd_nfft"] or None
            sim = simulate_scr(prof, bank, sc.radio, imp, run["realizations"], s_sim,
                               run["num_symbols"], run["oversample"], nfft,
                               sc.impairments["symbols"])
            scr_s = sim.scr_db
            if nfft:
                stem = re.sub(r"[^\w.-]+", "_", f"psd_{tdl}_{tds:g}ns_{plan_id}").strip("_")
                _dump_psd(psd_dir / f"{stem}.csv", sim.psd_stages, sc.config_hash)
    except Exception as exc:
        raise EvalError(f"{coord}: {exc}") from exc
    return {
        "channel": f"TDL-{tdl}", "tau_ds_ns": float(tds), "b_mhz": sc.radio.bandwidth_hz / 1e6,
        "tap_plan_id": plan_id, "scr_sim_db": float(scr_s), "scr_theory_db": float(scr_t),
        "bound_lo_db": float(lin_to_db(rep.bound_lo / sc.radio.tx_power)),
        "bound_hi_db": float(lin_to_db(rep.bound_hi / sc.radio.tx_power)),
        "realizations": run["realizations"] if run["simulate"] else run["theory_realizations"],
        "seed": run["seed"], "config_hash": sc.config_hash,
    }


def _dump_psd(path: Path, stages: dict, chash: str) -> None:
    names = sorted(stages)
    f = stages[names[0]][0]
    rows = []
    for k in range(f.size):
        r = {"freq_mhz": float(f[k] / 1e6), "config_hash": chash}
        for n in names:
            r[f"{n}_dbm_per_mhz"] = float(lin_to_db(max(stages[n][1][k] * 1e6, 1e-300)))
        rows.append(r)
    write_csv(path, ["freq_mhz"] + [f"{n}_dbm_per_mhz" for n in names] + ["config_hash"], rows)


def run_eval(sc: Scenario, workers: int = 1) -> list[dict]:
    banks = _resolve_banks(sc, workers)
    if sc.impairments["enabled"]:
        imp = TxImpairments.from_config(sc.radio, sc.impairments["calibration_seed"])
    else:
        imp = TxImpairments()
    psd_dir = sc.output_dir / "psd"
    tasks = [(sc, (ci, tdl), (ti, tds), (pi, p.plan_id), banks[p.plan_id], imp, psd_dir)
             for ci, (tdl, taus) in enumerate(sc.channels)
             for ti, tds in enumerate(taus)
             for pi, p in enumerate(sc.plans)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_eval_point, tasks))
    return [_eval_point(t) for t in tasks]


def cmd_eval(sc: Scenario, args) -> int:
    t0 = time.perf_counter()
    rows = run_eval(sc, args.threads)
    out = sc.output_dir / "eval.csv"
    write_csv(out, EVAL_COLUMNS, rows)
    by_plan = {}
    for r in rows:
        by_plan.setdefault(r["tap_plan_id"], []).append(r["scr_theory_db"])
    for pid, v in by_plan.items():
        print(f"{pid}: min theory SCR {min(v):.2f} dB over {len(v)} points")
    print(f"wrote {out} ({len(rows)} rows, {time.perf_counter() - t0:.1f} s)")
    return 0


# -- validate ---------------------------------------------------------------

def cmd_validate(sc: Scenario, args) -> int:
    results = checks.run_all(sc.radio, sc.run["seed"], quick=args.quick)
    for r in results:
        print(r.line())
    write_json(sc.output_dir / "validate.json", {
        "config_hash": sc.config_hash,
        "checks": [{"name": r.name, "passed": bool(r.passed), "value": float(r.value), "threshold": float(r.threshold)}
                   for r in results]})
    return 0 if all(r.passed for r in results) else 1


# -- report -----------------------------------------------------------------

def long_format(paths) -> list[dict]:
    rows = []
    metrics = ["scr_sim_db", "scr_theory_db", "bound_lo_db", "bound_hi_db"]
    for p in paths:
        with open(p, newline="") as fh:
            for r in csv.DictReader(fh):
                missing = set(EVAL_COLUMNS) - set(r)
                if missing:
                    raise ConfigError(f"{p}: not an eval CSV (missing {sorted(missing)})")
                for m in metrics:
                    rows.append({"config_hash": r["config_hash"], "channel": r["channel"],
                                 "tau_ds_ns": float(r["tau_ds_ns"]), "b_mhz": float(r["b_mhz"]),
                                 "tap_plan_id": r["tap_plan_id"], "metric": m, "value": float(r[m])})
    rows.sort(key=lambda r: (r["metric"], r["channel"], r["tap_plan_id"], r["b_mhz"], r["tau_ds_ns"],
                             r["config_hash"]))
    return rows


def cmd_report(args) -> int:
    out_dir = Path(args.out or "out")
    rows = long_format(args.csv)
    out = out_dir / "report_long.csv"
    write_csv(out, REPORT_COLUMNS, rows)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


# -- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtdsic", description="Multi-tap delay SI canceller design and evaluation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario JSON file")
        p.add_argument("--out", help="output directory (overrides outputs.directory)")
        p.add_argument("--seed", type=int, help="root seed (overrides run.seed)")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--sweep", help="override every channel sweep, e.g. tau_ds=5:100:20")

    common(sub.add_parser("design", help="construct tap delays for the budget"))
    common(sub.add_parser("eval", help="theory bounds, theory SCR and Monte Carlo SCR per sweep point"))
    pv = sub.add_parser("validate", help="closed-form, KKT and waveform self-checks")
    common(pv)
    pv.add_argument("--quick", action="store_true", help="smaller instance counts")
    pr = sub.add_parser("report", help="merge eval CSVs into one long-format table")
    pr.add_argument("csv", nargs="+", help="eval CSV files")
    pr.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        # closely spaced banks are near-singular by design; the ridge is expected
        warnings.simplefilter("ignore", IllConditionedGramWarning)
    try:
        if args.command == "report":
            return cmd_report(args)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        sweep = parse_sweep_flag(args.sweep)[1] if args.sweep else None
        sc = load_scenario(args.config, seed=args.seed, out=args.out, sweep=sweep)
        return {"design": cmd_design, "eval": cmd_eval, "validate": cmd_validate}[args.command](sc, args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
