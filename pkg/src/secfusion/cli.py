"""Command-line front end: config parsing, scenario execution, CSV output.

Commands: run (one simulated run), mc (Monte Carlo MSE curves), compare
(proposed vs. baseline MSE), check (observability report), and the two
probes (gain optimality, covariance consistency).

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
3 probe failure.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .attack import AttackSpec
from .errors import (ConfigurationError, EstimatorError, FusionError,
                     InputError)
from .local_estimator import LocalInit
from .model import SensorSpec, SystemModel
from .simulation import (BUILTIN_SCENARIOS, ScenarioConfig,
                         covariance_consistency_probe, gain_optimality_probe,
                         observability_reports, run_monte_carlo, run_scenario)

FLOAT_FORMAT = "{:.17g}"


# ---------------------------------------------------------------------------
# Config file parsing
# ---------------------------------------------------------------------------

def _load_document(path):
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    data = path.read_bytes()
    if path.suffix.lower() == ".json":
        loaders = [("JSON", json.loads)]
    elif path.suffix.lower() == ".toml":
        loaders = [("TOML", tomllib.loads)]
    else:
        loaders = [("TOML", tomllib.loads), ("JSON", json.loads)]
    errors = []
    for label, loader in loaders:
        try:
            text = data.decode("utf-8")
            return loader(text)
        except Exception as exc:
            errors.append(f"{label}: {exc}")
    raise ConfigurationError(
        f"cannot parse {path} ({'; '.join(errors)})")


def _get(table, key, kind, where, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigurationError(f"{where}: missing required key {key!r}")
        return default
    value = table[key]
    if kind is not None and not isinstance(value, kind):
        names = (kind.__name__ if isinstance(kind, type)
                 else "/".join(k.__name__ for k in kind))
        raise ConfigurationError(
            f"{where}.{key}: expected {names}, got {type(value).__name__}")
    return value


def _parse_attack(table):
    sid = _get(table, "sensor", int, "attacks", required=True)
    kind = _get(table, "kind", str, f"attacks[{sid}]", required=True)
    kwargs = {"sensor_id": sid, "kind": kind}
    if "cov" in table:
        kwargs["cov"] = table["cov"]
    if "start" in table:
        kwargs["start"] = int(table["start"])
    if "end" in table:
        kwargs["end"] = int(table["end"])
    if "value" in table:
        kwargs["value"] = table["value"]
    if "path" in table:
        kwargs["path"] = table["path"]
    if "p" in table:
        kwargs["p"] = int(table["p"])
    return sid, AttackSpec(**kwargs)


def _parse_local_init(table, where):
    known = {"X_hat0", "phi_hat0", "P_X0", "P_phi0", "U0", "V0"}
    unknown = set(table) - known
    if unknown:
        raise ConfigurationError(
            f"{where}: unknown init keys {sorted(unknown)}")
    return LocalInit(**{k: table[k] for k in table})


def parse_config(path):
    """Parse a TOML or JSON scenario file into a validated ScenarioConfig."""
    doc = _load_document(path)
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{path}: top level must be a table")

    base = None
    if "scenario" in doc:
        name = doc["scenario"]
        if name not in BUILTIN_SCENARIOS:
            raise ConfigurationError(
                f"unknown built-in scenario {name!r}; available: "
                f"{sorted(BUILTIN_SCENARIOS)}")
        base = BUILTIN_SCENARIOS[name]()
        if "system" in doc or "sensors" in doc:
            raise ConfigurationError(
                "a config may either name a built-in scenario or define "
                "system/sensors, not both")
    else:
        system_tbl = _get(doc, "system", dict, "config", required=True)
        A = _get(system_tbl, "A", list, "system", required=True)
        Q = _get(system_tbl, "Q", list, "system", required=True)
        system = SystemModel(A=A, Q=Q)

        sensor_tbls = _get(doc, "sensors", list, "config", required=True)
        sensors = []
        eta = {}
        strong_map = {}
        for tbl in sensor_tbls:
            sid = _get(tbl, "id", int, "sensors", required=True)
            where = f"sensors[{sid}]"
            spec = SensorSpec(
                id=sid,
                C_o=_get(tbl, "C", list, where, required=True),
                R_o=_get(tbl, "R", list, where, required=True),
                defense=_get(tbl, "defense", str, where, required=True))
            sensors.append(spec)
            if "eta" in tbl:
                eta[sid] = tbl["eta"]
            if "strong" in tbl:
                if spec.defense != "weak":
                    raise ConfigurationError(
                        f"{where}: only weak sensors take a strong list")
                strong_map[sid] = tuple(int(j) for j in tbl["strong"])

        attacks = {}
        for tbl in _get(doc, "attacks", list, "config", default=[]):
            sid, spec = _parse_attack(tbl)
            attacks[sid] = spec

        base = ScenarioConfig(
            system=system, sensors=sensors,
            strong_map=strong_map or None,
            attacks=attacks or None,
            eta=eta or None,
            x0_mean=_get(system_tbl, "x0_mean", list, "system"),
            x0_cov=_get(system_tbl, "x0_cov", list, "system"),
            name=_get(doc, "name", str, "config", default=str(path)))

    est = _get(doc, "estimator", dict, "config", default={})
    overrides = {}
    if "eta" in est:
        value = est["eta"]
        if isinstance(value, dict):
            overrides["eta"] = {**base.eta,
                                **{int(k): v for k, v in value.items()}}
        elif isinstance(value, list):
            if len(value) != len(base.weak_ids):
                raise ConfigurationError(
                    f"estimator.eta list has {len(value)} entries, "
                    f"{len(base.weak_ids)} weak sensors")
            overrides["eta"] = dict(zip(base.weak_ids, value))
        else:
            overrides["eta"] = value
    if "q_theta" in est:
        overrides["q_theta"] = float(est["q_theta"])
    if "init" in est:
        init_tbl = _get(est, "init", dict, "estimator")
        overrides["local_init"] = {
            int(sid): _parse_local_init(tbl, f"estimator.init.{sid}")
            for sid, tbl in init_tbl.items()}

    mc = _get(doc, "montecarlo", dict, "config", default={})
    for key in ("runs", "seed", "horizon"):
        if key in mc:
            overrides[key] = int(mc[key])

    cfg = replace(base, **overrides) if overrides else base
    return cfg


def load_scenario(name_or_path):
    """Resolve a built-in scenario name or a config file path."""
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path]()
    if Path(name_or_path).exists():
        return parse_config(name_or_path)
    raise ConfigurationError(
        f"{name_or_path!r} is neither a built-in scenario "
        f"({sorted(BUILTIN_SCENARIOS)}) nor an existing config file")


def echo_config(cfg, stream=None):
    """Print the resolved configuration, one key per line."""
    stream = stream or sys.stderr
    for key, value in cfg.effective_values().items():
        print(f"{key} = {value}", file=stream)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def _fmt(value):
    return FLOAT_FORMAT.format(float(value))


def write_csv(path, columns, rows):
    """Write rows of floats (first column integer step index) as CSV."""
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join([str(int(row[0]))]
                              + [_fmt(v) for v in row[1:]]))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def run_csv_columns(cfg):
    n = cfg.n
    cols = ["k"]
    cols += [f"x_{c + 1}" for c in range(n)]
    cols += [f"xfused_{c + 1}" for c in range(n)]
    for i in cfg.weak_ids:
        p = cfg.by_id[i].p
        cols += [f"xhat{i}_{c + 1}" for c in range(n)]
        cols += [f"theta{i}_{c + 1}" for c in range(p)]
        cols += [f"thetahat{i}_{c + 1}" for c in range(p)]
        cols += [f"akf{i}_{c + 1}" for c in range(n)]
        cols += [f"pxtrace_{i}"]
    return cols


def write_run_csv(cfg, record, path):
    rows = []
    for k in range(record.x.shape[0]):
        row = [k]
        row += list(record.x[k])
        row += list(record.x0_hat[k])
        for i in cfg.weak_ids:
            row += list(record.x_hat[i][k])
            row += list(record.theta[i][k])
            row += list(record.theta_hat[i][k])
            row += list(record.akf_x_hat[i][k])
            row.append(record.px_trace[i][k])
        rows.append(row)
    write_csv(path, run_csv_columns(cfg), rows)


def mse_csv_columns(cfg):
    return (["k", "mse_fused"]
            + [f"mse_local_{i}" for i in cfg.weak_ids]
            + [f"mse_theta_{i}" for i in cfg.weak_ids])


def write_mse_csv(cfg, report, path):
    cols = mse_csv_columns(cfg)
    rows = []
    for k in report.k:
        row = [k, report.mse_fused[k]]
        row += [report.mse_local[i][k] for i in cfg.weak_ids]
        row += [report.mse_theta[i][k] for i in cfg.weak_ids]
        rows.append(row)
    write_csv(path, cols, rows)


def compare_csv_columns(cfg):
    cols = ["k"]
    for i in cfg.weak_ids:
        cols += [f"mse_proposed_{i}", f"mse_akf_{i}"]
    cols.append("mse_fused")
    return cols


def write_compare_csv(cfg, report, path):
    rows = []
    for k in report.k:
        row = [k]
        for i in cfg.weak_ids:
            row += [report.mse_local[i][k], report.mse_akf[i][k]]
        row.append(report.mse_fused[k])
        rows.append(row)
    write_csv(path, compare_csv_columns(cfg), rows)


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------

def _parse_eta_flags(pairs):
    out = {}
    for item in pairs or []:
        try:
            sid, value = item.split("=", 1)
            out[int(sid)] = float(value)
        except ValueError:
            raise ConfigurationError(
                f"--eta expects I=V (e.g. 2=20), got {item!r}") from None
    return out


def _load_with_overrides(args):
    cfg = load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
    if getattr(args, "runs", None) is not None:
        overrides["runs"] = args.runs
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "q_theta", None) is not None:
        overrides["q_theta"] = args.q_theta
    eta = _parse_eta_flags(getattr(args, "eta", None))
    if eta:
        unknown = set(eta) - set(cfg.weak_ids)
        if unknown:
            raise ConfigurationError(
                f"--eta names non-weak sensors {sorted(unknown)}")
        overrides["eta"] = {**cfg.eta, **eta}
    if overrides:
        cfg = replace(cfg, **overrides)
    echo_config(cfg)
    return cfg


def _cmd_run(args):
    cfg = _load_with_overrides(args)
    record = run_scenario(cfg)
    write_run_csv(cfg, record, args.out)
    return 0


def _cmd_mc(args):
    cfg = _load_with_overrides(args)
    report = run_monte_carlo(cfg, workers=args.workers)
    if report.partial:
        print(f"warning: {len(report.failures)} of {report.runs} runs "
              f"failed", file=sys.stderr)
    write_mse_csv(cfg, report, args.out)
    return 0


def _cmd_compare(args):
    cfg = _load_with_overrides(args)
    report = run_monte_carlo(cfg, workers=args.workers)
    write_compare_csv(cfg, report, args.out)
    return 0


def _cmd_check(args):
    cfg = _load_with_overrides(args)
    for rep in observability_reports(cfg, horizon=args.window):
        status = "full rank" if rep.full_rank else "RANK DEFICIENT"
        print(f"sensor {rep.weak_id}: rank {rep.rank}/{rep.dim} over "
              f"{rep.horizon} steps ({status})")
    return 0


def _cmd_probe_optimality(args):
    cfg = _load_with_overrides(args)
    steps = [int(s) for s in args.steps.split(",")]
    report = gain_optimality_probe(cfg, steps=steps, trials=args.trials,
                                   seed=args.probe_seed, tolerance=args.tol)
    for rec in report.records:
        print(f"step {rec.step} sensor {rec.weak_id} gain {rec.gain}: "
              f"min margin {rec.min_margin:.6e} over {rec.trials} trials")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: minimum margin {report.min_margin:.6e} "
          f"(tolerance -{report.tolerance:g})")
    return 0 if report.passed else 3


def _cmd_probe_consistency(args):
    cfg = _load_with_overrides(args)
    checkpoints = [int(c) for c in args.checkpoints.split(",")]
    report = covariance_consistency_probe(cfg, checkpoints=checkpoints,
                                          tolerance=args.tol)
    for rec in report.records:
        print(f"sensor {rec.weak_id} k={rec.checkpoint}: relative error "
              f"{rec.rel_frobenius:.4f} (trace {rec.rel_trace:.4f})")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: worst relative error {report.worst:.4f} over "
          f"{report.runs} runs (tolerance {report.tolerance:g})")
    return 0 if report.passed else 3


class _Parser(argparse.ArgumentParser):
    """argparse that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="secfusion",
                     description="Secure multi-sensor fusion estimation "
                                 "under measurement injection attacks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=False, workers=False, scenario="ieee4bus"):
        p.add_argument("--scenario", default=scenario,
                       help="built-in scenario name or config file path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--horizon", type=int, default=None)
        p.add_argument("--eta", action="append", metavar="I=V",
                       help="override the compensation factor of sensor I")
        p.add_argument("--q-theta", dest="q_theta", type=float, default=None,
                       help="baseline pseudo-noise intensity")
        if runs:
            p.add_argument("--runs", type=int, default=None)
        if workers:
            p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("run", help="simulate one run, write per-step CSV")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("mc", help="Monte Carlo MSE curves")
    common(p, runs=True, workers=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_mc)

    p = sub.add_parser("compare",
                       help="proposed vs baseline MSE, joint CSV")
    common(p, runs=True, workers=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("check", help="observability report per weak sensor")
    common(p)
    p.add_argument("--window", type=int, default=None,
                   help="observability window length (default n + p)")
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("probe-optimality",
                       help="verify gain optimality by perturbation")
    common(p)
    p.add_argument("--steps", default="1,10,50")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--probe-seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(handler=_cmd_probe_optimality)

    p = sub.add_parser("probe-consistency",
                       help="compare predicted vs empirical covariance")
    common(p, runs=True, scenario="scalar-consistency")
    p.add_argument("--checkpoints", default="20")
    p.add_argument("--tol", type=float, default=0.15)
    p.set_defaults(handler=_cmd_probe_consistency)

    return parser


def dispatch(argv=None):
    """Parse arguments and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.handler(args)
    except (ConfigurationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EstimatorError, FusionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
