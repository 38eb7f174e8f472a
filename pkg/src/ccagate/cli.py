"""Command-line runner: ``ccagate {gate,sweep,robustness,verify} --config run.ini --out dir``.

Exit codes: 0 success, 2 config error, 3 simulation error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import robustness_scan, sweep_theta, theta_spread
from .config import ConfigError, RunConfig, load_config
from .evolution import TruncationLeakError
from .operators import ConvergenceError, NonHermitianError
from .protocol import extract_gate, target_gate, total_gate_time
from .verify import run_checks

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION, EXIT_VERIFY = 0, 2, 3, 4


@dataclass
class RunRecord:
    command: str
    config: dict
    results: dict
    convergence: dict = field(default_factory=dict)
    version: str = __version__
    wall_time: float = 0.0
    exit_code: int = EXIT_OK

    def to_json(self) -> str:
        """Deterministic JSON; wall time is kept out so identical runs are byte-identical."""
        body = {"command": self.command, "artifact_version": self.version,
                "config": self.config, "convergence": self.convergence,
                "results": self.results, "exit_code": self.exit_code}
        return json.dumps(_clean(body), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _threads(cfg: RunConfig) -> int:
    return cfg.threads or os.cpu_count() or 1


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def cmd_gate(cfg: RunConfig, out: Path | None = None) -> RunRecord:
    p = cfg.params
    res = extract_gate(p, cfg.mode, n_periods=cfg.n_periods, full_method=cfg.full_method)
    target = target_gate(res.target_theta)
    results = {
        "theta_est": res.theta_est,
        "theta_formula": res.target_theta,
        "fidelity_vs_target": res.fidelity_vs_target,
        "leakage": res.leakage,
        "column_leakage": list(res.column_leakage),
        "max_top_level_population": res.max_top_level,
        "max_abs_error_vs_target": float(np.max(np.abs(res.gate - target))),
        "step_durations": list(res.durations),
        "total_gate_time": total_gate_time(p) + (cfg.n_periods - 1) * p.tau,
        "warnings": list(res.warnings),
    }
    conv = res.convergence.as_dict() if res.convergence else {}
    if out is not None:
        rows = [[r, c, res.gate[r, c].real, res.gate[r, c].imag]
                for r in range(4) for c in range(4)]
        _write_csv(out / "gate.csv", ["row", "col", "real", "imag"], rows)
    return RunRecord("gate", cfg.to_dict(), results, conv)


def cmd_sweep(cfg: RunConfig, out: Path | None = None) -> RunRecord:
    if cfg.g_grid is None:
        raise ConfigError("sweep needs [sweep] g_grid")
    res = sweep_theta(cfg.params, cfg.g_grid, cfg.mode, threads=_threads(cfg))
    rows = [[pt.g, pt.theta_est, pt.theta_formula, pt.residual, pt.leakage, pt.status]
            for pt in res.points]
    if out is not None:
        _write_csv(out / "sweep.csv",
                   ["g_over_delta", "theta_est", "theta_formula", "residual", "leakage", "status"],
                   rows)
    expected = math.pi / (4 * cfg.params.delta ** 2)
    results = {
        "coefficient": res.coefficient,
        "expected_coefficient": expected,
        "relative_error": abs(res.coefficient / expected - 1),
        "max_residual": res.max_residual,
        "points": [dict(zip(["g_over_delta", "theta_est", "theta_formula", "residual",
                             "leakage", "status"], r)) for r in rows],
    }
    return RunRecord("sweep", cfg.to_dict(), results)


def cmd_robustness(cfg: RunConfig, out: Path | None = None) -> RunRecord:
    ensemble = cfg.ensemble()
    rows = robustness_scan(cfg.params, ensemble, cfg.mode, threads=_threads(cfg))
    if out is not None:
        _write_csv(out / "robustness.csv", ["label", "theta_est", "fidelity"],
                   [[r.label, r.theta_est, r.fidelity] for r in rows])
    results = {
        "rows": [{"label": r.label, "theta_est": r.theta_est, "fidelity": r.fidelity,
                  "leakage": r.leakage} for r in rows],
        "theta_spread": theta_spread(rows),
        "fidelity_spread": max(r.fidelity for r in rows) - min(r.fidelity for r in rows),
    }
    return RunRecord("robustness", cfg.to_dict(), results)


def cmd_verify(cfg: RunConfig, out: Path | None = None, corrupt_a_sign: bool = False) -> RunRecord:
    checks = run_checks(cfg.params, include_full=cfg.include_full, corrupt_a_sign=corrupt_a_sign)
    if out is not None:
        (out / "verify.txt").write_text("\n".join(c.line() for c in checks) + "\n", encoding="utf-8")
    failed = [c.name for c in checks if not c.passed]
    results = {"checks": [{"name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed,
                           "note": c.note} for c in checks],
               "failed": failed}
    rec = RunRecord("verify", cfg.to_dict(), results)
    rec.exit_code = EXIT_VERIFY if failed else EXIT_OK
    return rec


COMMANDS = {"gate": cmd_gate, "sweep": cmd_sweep, "robustness": cmd_robustness,
            "verify": cmd_verify}


def _summary(rec: RunRecord) -> str:
    r = rec.results
    if rec.command == "gate":
        return (f"theta_est={r['theta_est']!r} fidelity={r['fidelity_vs_target']!r} "
                f"leakage={r['leakage']!r} t_tot={r['total_gate_time']!r}")
    if rec.command == "sweep":
        return f"coefficient={r['coefficient']!r} (expected {r['expected_coefficient']!r})"
    if rec.command == "robustness":
        return f"max theta spread={r['theta_spread']!r}"
    lines = [f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}" for c in r["checks"]]
    if r["failed"]:
        lines.append("failed checks: " + ", ".join(r["failed"]))
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccagate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="INI run configuration")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--mode", choices=("analytic", "effective", "full"))
        sp.add_argument("--threads", type=int)
        sp.add_argument("--cutoff", type=int, help="dark-mode Fock cutoff of the active frame")
        sp.add_argument("--steps", type=int, help="midpoint steps per loop period")
        if name == "verify":
            sp.add_argument("--corrupt-a-sign", action="store_true", help=argparse.SUPPRESS)
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    changes, pchanges = {}, {}
    if args.mode:
        changes["mode"] = args.mode
    if args.threads is not None:
        changes["threads"] = args.threads
    mode = changes.get("mode", cfg.mode)
    if args.cutoff is not None:
        pchanges["cutoff_full_c" if mode == "full" else "cutoff_c"] = args.cutoff
    if args.steps is not None:
        pchanges["td_steps"] = args.steps
    try:
        if pchanges:
            changes["params"] = cfg.params.replace(**pchanges)
        return cfg.replace(**changes) if changes else cfg
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "sweep" and cfg.g_grid is None:
            raise ConfigError("sweep needs [sweep] g_grid")
        if args.command == "robustness":
            cfg.ensemble()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        kwargs = {"corrupt_a_sign": args.corrupt_a_sign} if args.command == "verify" else {}
        rec = COMMANDS[args.command](cfg, out, **kwargs)
    except (TruncationLeakError, ConvergenceError, NonHermitianError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    rec.wall_time = time.perf_counter() - start
    if out is not None:
        (out / "record.json").write_text(rec.to_json(), encoding="utf-8")
        (out / "timing.json").write_text(json.dumps({"wall_time_s": rec.wall_time}) + "\n",
                                         encoding="utf-8")
    print(_summary(rec))
    return rec.exit_code


if __name__ == "__main__":
    sys.exit(main())
