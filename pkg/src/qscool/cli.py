"""Batch front-end: configure, run, and log experiments.

Commands
--------
fci       print exact and mean-field energies for a fixture
oc        optimal-control ground-state run (optionally sweeping T or knots)
anneal    linear-schedule annealing baseline
qsl       speed-limit estimate from a logged trajectory
cost      measurement/cost model arithmetic
validate  parse and validate an MHX fixture

Every run writes ``runlog.json`` (resolved config, seeds, results, QSL and
cost blocks) plus ``iterates.csv`` and ``trajectory.csv``; a run is fully
reproducible from its log. Config files use a flat TOML subset
(key = value with strings, numbers, booleans, inline arrays); command-line
flags override file keys.

Exit codes: 0 ok, 1 no-convergence, 2 data error, 3 numerical-integrity
error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, anneal as anneal_mod
from .control import default_steps, init_parameters
from .dynamics import read_trajectory_csv
from .errors import ConvergenceError, DataError, NumericalIntegrityError, QscoolError
from .molham import parse_integral_file
from .objective import make_context, objective_with_trajectory
from .optimize import DiffEvoOptions, LbfgsOptions, run_lbfgs
from .pauli import MAX_SPARSE_QUBITS

SCHEMA_VERSION = "1"
CHEMICAL_ACCURACY_LINES_MHA = {"figs_3_5": 1.0, "fig_6": 1.6}

RUNLOG_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "command", "config"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["oc", "anneal"]},
        "fixture": {"type": "string"},
        "fixture_sha256": {"type": "string"},
        "config": {"type": "object"},
        "e_hf": {"type": "number"},
        "e_fci": {"type": ["number", "null"]},
        "attempts": {"type": "array"},
        "best": {"type": ["object", "null"]},
        "qsl": {"type": ["object", "null"]},
        "cost": {"type": ["object", "null"]},
        "sweep": {"type": ["array", "null"]},
        "chemical_accuracy_mha": {"type": "object"},
        "files": {"type": "object"},
    },
}


# ---------------------------------------------------------------------------
# Flat TOML-subset reader (sandbox Python predates tomllib)
# ---------------------------------------------------------------------------

_TOML_LINE = re.compile(r"^\s*([A-Za-z0-9_.-]+)\s*=\s*(.+?)\s*$")


def _toml_scalar(text: str):
    text = text.strip()
    if text.startswith('"') and text.endswith('"'):
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise DataError(f"cannot parse TOML value {text!r}") from exc


def load_config_file(path: str | Path) -> dict:
    """Flat key = value TOML subset with inline arrays and # comments."""
    out: dict = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _TOML_LINE.match(line)
        if not match:
            raise DataError(f"unsupported config line: {raw!r}")
        key, value = match.group(1), match.group(2)
        if value.startswith("["):
            if not value.endswith("]"):
                raise DataError(f"unterminated array in config line: {raw!r}")
            inner = value[1:-1].strip()
            out[key] = (
                [_toml_scalar(v) for v in inner.split(",") if v.strip()]
                if inner
                else []
            )
        else:
            out[key] = _toml_scalar(value)
    return out


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_OC_KEYS = {
    "fixture", "total_time", "n_ctrl", "n_steps", "seeds", "max_iter",
    "tol_mha", "out", "expmv_tol", "sweep_T", "sweep_nctrl",
}


@dataclass
class RunConfig:
    fixture: str
    total_time: float = 0.5
    n_ctrl: int = 5
    n_steps: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    max_iter: int = 500
    tol_mha: float = 1.0
    out: str = "runs/oc"
    expmv_tol: float = 1e-10
    sweep_T: list[float] | None = None
    sweep_nctrl: list[int] | None = None

    @classmethod
    def from_sources(cls, file_cfg: dict, overrides: dict) -> "RunConfig":
        merged = dict(file_cfg)
        unknown = set(merged) - _OC_KEYS
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        for key, value in overrides.items():
            if value is not None:
                merged[key] = value
        if "fixture" not in merged:
            raise DataError("a fixture path is required (config key or --fixture)")
        merged.setdefault("seeds", [0, 1, 2])
        if isinstance(merged["seeds"], (int, float)):
            merged["seeds"] = [int(merged["seeds"])]
        return cls(**merged)

    def resolved_steps(self, total_time: float, n_ctrl: int) -> int:
        if self.n_steps is not None:
            return self.n_steps
        return default_steps(total_time, n_ctrl)

    def to_dict(self) -> dict:
        return {
            "fixture": self.fixture,
            "total_time": self.total_time,
            "n_ctrl": self.n_ctrl,
            "n_steps": self.n_steps,
            "seeds": list(self.seeds),
            "max_iter": self.max_iter,
            "tol_mha": self.tol_mha,
            "out": self.out,
            "expmv_tol": self.expmv_tol,
            "sweep_T": self.sweep_T,
            "sweep_nctrl": self.sweep_nctrl,
        }


def _sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_runlog(out_dir: Path, doc: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "runlog.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, default=float)
        fh.write("\n")


def _write_iterates(path: Path, reports: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "iteration", "J", "error_vs_fci", "grad_norm"])
        for rep in reports:
            for i, rec in enumerate(rep.iterates):
                writer.writerow(
                    [rep.seed, i, repr(rec.j_value),
                     "" if rec.error is None else repr(rec.error),
                     "" if rec.grad_norm is None else repr(rec.grad_norm)]
                )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_fci(args) -> int:
    ints = parse_integral_file(args.fixture)
    ctx = make_context(ints)
    gap = ctx.e_hf - ctx.e_fci
    print(f"E_FCI = {ctx.e_fci:.10f} Ha")
    print(f"E_HF  = {ctx.e_hf:.10f} Ha")
    print(f"gap (E_HF - E_FCI) = {gap:.10f} Ha")
    return 0


def cmd_validate(args) -> int:
    ints = parse_integral_file(args.fixture)
    print(
        f"{args.fixture}: valid MHX (n_spatial={ints.n_spatial}, "
        f"n_electrons={ints.n_electrons}, {ints.n_nuclei} nuclei, "
        f"E_HF={ints.hf_energy:.8f})"
    )
    return 0


def _single_oc(ctx, cfg: RunConfig, total_time: float, n_ctrl: int):
    """Try the configured seeds in order; stop at the first converged one."""
    n_steps = cfg.resolved_steps(total_time, n_ctrl)
    opts = LbfgsOptions(
        max_iter=cfg.max_iter, error_threshold=cfg.tol_mha * 1e-3
    )
    attempts = []
    best = None
    for seed in cfg.seeds:
        s0 = init_parameters(
            total_time=total_time, n_ctrl=n_ctrl, n_steps=n_steps,
            n_nuclei=ctx.ints.n_nuclei, seed=seed,
        )
        report = run_lbfgs(ctx, s0, options=opts, seed=seed)
        attempts.append(report)
        if best is None or report.best_value < best.best_value:
            best = report
        if report.termination_reason == "chemical_accuracy":
            break
    return attempts, best, n_steps


def _attempt_dict(rep, e_fci) -> dict:
    err = None if e_fci is None else (rep.best_value - e_fci) * 1000.0
    return {
        "seed": rep.seed,
        "n_iterations": rep.n_iterations,
        "termination_reason": rep.termination_reason,
        "final_energy": rep.best_value,
        "error_vs_fci_mha": err,
        "wall_time_s": rep.wall_time,
    }


def cmd_oc(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    overrides = {
        "fixture": args.fixture,
        "seeds": [int(s) for s in args.seed.split(",")] if args.seed else None,
        "out": args.out,
        "max_iter": args.max_iter,
        "tol_mha": args.tol_mha,
        "total_time": args.T,
        "n_ctrl": args.n_ctrl,
        "n_steps": args.n_steps,
        "sweep_T": [float(t) for t in args.sweep_T.split(",")] if args.sweep_T else None,
        "sweep_nctrl": [int(n) for n in args.sweep_nctrl.split(",")] if args.sweep_nctrl else None,
    }
    cfg = RunConfig.from_sources(file_cfg, overrides)
    ints = parse_integral_file(cfg.fixture)
    compute_fci = ints.n_spin_orbitals <= MAX_SPARSE_QUBITS
    ctx = make_context(ints, compute_fci=compute_fci, expmv_tol=cfg.expmv_tol)
    out_dir = Path(cfg.out)

    sweep_block = None
    if cfg.sweep_T or cfg.sweep_nctrl:
        sweep_block = []
        values = cfg.sweep_T or cfg.sweep_nctrl
        kind = "T" if cfg.sweep_T else "n_ctrl"
        all_attempts = []
        for value in values:
            total_time = float(value) if kind == "T" else cfg.total_time
            n_ctrl = int(value) if kind == "n_ctrl" else cfg.n_ctrl
            attempts, best, n_steps = _single_oc(ctx, cfg, total_time, n_ctrl)
            all_attempts.extend(attempts)
            _, traj = objective_with_trajectory(best.best_schedule, ctx)
            entry = {
                kind: value,
                "n_steps": n_steps,
                "best": _attempt_dict(best, ctx.e_fci),
                "mean_driving_norm": analysis.mean_driving_norm(traj),
            }
            sweep_block.append(entry)
            sub = out_dir / f"{kind}_{value}"
            sub.mkdir(parents=True, exist_ok=True)
            traj.write_csv(sub / "trajectory.csv")
            print(
                f"{kind}={value}: error "
                f"{entry['best']['error_vs_fci_mha']:.4f} mHa, "
                f"mean driving norm {entry['mean_driving_norm']:.4f}"
            )
        best = min(all_attempts, key=lambda r: r.best_value)
        attempts = all_attempts
        n_steps = cfg.n_steps
        traj = None
    else:
        attempts, best, n_steps = _single_oc(ctx, cfg, cfg.total_time, cfg.n_ctrl)
        _, traj = objective_with_trajectory(best.best_schedule, ctx)

    qsl_block = None
    cost_block = None
    if traj is not None:
        try:
            qsl_block = analysis.qsl_estimate(traj)
            qsl_block = {
                "t_qsl": qsl_block.t_qsl,
                "t_evolution": qsl_block.t_evolution,
                "ratio": qsl_block.ratio,
                "quadrature": qsl_block.quadrature,
            }
        except DataError:
            qsl_block = None
        cost_block = analysis.cost_model(
            max(best.n_iterations, 1),
            best.best_schedule.n_parameters,
            ints.n_electrons,
            cfg.tol_mha * 1e-3,
        ).to_dict()

    out_dir.mkdir(parents=True, exist_ok=True)
    if traj is not None:
        traj.write_csv(out_dir / "trajectory.csv")
    _write_iterates(out_dir / "iterates.csv", attempts)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "oc",
        "fixture": str(cfg.fixture),
        "fixture_sha256": _sha256(cfg.fixture),
        "config": {**cfg.to_dict(), "n_steps": n_steps},
        "e_hf": ctx.e_hf,
        "e_fci": ctx.e_fci,
        "attempts": [_attempt_dict(rep, ctx.e_fci) for rep in attempts],
        "best": _attempt_dict(best, ctx.e_fci) | {
            "parameters": best.best_x.tolist()
        },
        "qsl": qsl_block,
        "cost": cost_block,
        "sweep": sweep_block,
        "chemical_accuracy_mha": CHEMICAL_ACCURACY_LINES_MHA,
        "files": {"iterates": "iterates.csv", "trajectory": "trajectory.csv"},
    }
    _write_runlog(out_dir, doc)

    err = doc["best"]["error_vs_fci_mha"]
    print(
        f"best: seed {best.seed}, {best.n_iterations} iterations, "
        f"E = {best.best_value:.8f} Ha"
        + (f", error {err:.4f} mHa" if err is not None else "")
        + f" [{best.termination_reason}]"
    )
    if ctx.e_fci is not None and best.termination_reason != "chemical_accuracy" and sweep_block is None:
        return 1
    return 0


def cmd_anneal(args) -> int:
    ints = parse_integral_file(args.fixture)
    total_time = args.T
    n_steps = args.n_steps or max(1, int(round(total_time / 0.05)))
    actx = anneal_mod.AnnealContext(ints)
    cfg = anneal_mod.AnnealConfig(total_time=total_time, n_steps=n_steps)
    traj = anneal_mod.anneal_run(ints, cfg, ctx=actx)
    compute_fci = ints.n_spin_orbitals <= MAX_SPARSE_QUBITS
    e_fci = None
    if compute_fci:
        from .pauli import exact_ground_state

        e_fci = exact_ground_state(actx.h_mol)[0]

    out_dir = Path(args.out or "runs/anneal")
    out_dir.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out_dir / "trajectory.csv")
    err = None if e_fci is None else (traj.final_molecular_energy - e_fci) * 1000.0
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": "anneal",
        "fixture": str(args.fixture),
        "fixture_sha256": _sha256(args.fixture),
        "config": {"total_time": total_time, "n_steps": n_steps, "kind": "linear"},
        "e_hf": actx.e_hf,
        "e_fci": e_fci,
        "attempts": [],
        "best": {
            "final_energy": traj.final_molecular_energy,
            "error_vs_fci_mha": err,
        },
        "qsl": None,
        "cost": None,
        "sweep": None,
        "chemical_accuracy_mha": CHEMICAL_ACCURACY_LINES_MHA,
        "files": {"trajectory": "trajectory.csv"},
    }
    _write_runlog(out_dir, doc)
    print(
        f"anneal T={total_time}: E(T) = {traj.final_molecular_energy:.8f} Ha"
        + (f", error {err:.4f} mHa" if err is not None else "")
    )
    return 0


def cmd_qsl(args) -> int:
    run_dir = Path(args.runlog)
    if run_dir.is_file():
        run_dir = run_dir.parent
    traj = read_trajectory_csv(run_dir / "trajectory.csv")
    report = analysis.qsl_estimate(traj, use_molecular_energy=args.molecular_energy)
    print(f"T_evolution = {report.t_evolution:.6g} a.u.")
    print(f"T_qsl       = {report.t_qsl:.6g} a.u.")
    print(f"T_qsl / T   = {report.ratio:.6g}")
    return 0


def cmd_cost(args) -> int:
    if args.runlog:
        doc = json.loads((Path(args.runlog) / "runlog.json").read_text())
        k = doc["best"]["n_iterations"]
        n_params = len(doc["best"]["parameters"])
        ints = parse_integral_file(doc["fixture"])
        eta = ints.n_electrons
        eps = args.epsilon
    else:
        for name, val in (("--K", args.K), ("--params", args.params), ("--eta", args.eta)):
            if val is None:
                raise DataError(f"cost needs {name} (or --runlog)")
        k, n_params, eta, eps = args.K, args.params, args.eta, args.epsilon
    report = analysis.cost_model(k, n_params, eta, eps)
    print(f"m (measurements per estimate) = {report.m_measurements}")
    print(f"circuits = {report.circuits}")
    print(f"runtime class: {report.runtime_class}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qscool",
        description="Quantum simulated cooling: optimally controlled ground-state preparation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fci = sub.add_parser("fci", help="exact/mean-field energies of a fixture")
    p_fci.add_argument("--fixture", required=True)
    p_fci.set_defaults(func=cmd_fci)

    p_val = sub.add_parser("validate", help="validate an MHX fixture")
    p_val.add_argument("--fixture", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_oc = sub.add_parser("oc", help="optimal-control run")
    p_oc.add_argument("--fixture")
    p_oc.add_argument("--config", help="TOML config file (flags override)")
    p_oc.add_argument("--seed", help="comma-separated seed list")
    p_oc.add_argument("--out")
    p_oc.add_argument("--T", type=float, dest="T")
    p_oc.add_argument("--n-ctrl", type=int, dest="n_ctrl")
    p_oc.add_argument("--n-steps", type=int, dest="n_steps")
    p_oc.add_argument("--max-iter", type=int, dest="max_iter")
    p_oc.add_argument("--tol-mha", type=float, dest="tol_mha")
    p_oc.add_argument("--sweep-T", dest="sweep_T")
    p_oc.add_argument("--sweep-nctrl", dest="sweep_nctrl")
    p_oc.set_defaults(func=cmd_oc)

    p_an = sub.add_parser("anneal", help="linear-schedule annealing baseline")
    p_an.add_argument("--fixture", required=True)
    p_an.add_argument("--T", type=float, required=True)
    p_an.add_argument("--n-steps", type=int, dest="n_steps")
    p_an.add_argument("--out")
    p_an.set_defaults(func=cmd_anneal)

    p_qsl = sub.add_parser("qsl", help="speed-limit estimate from a run log")
    p_qsl.add_argument("--runlog", required=True, help="run directory or runlog.json")
    p_qsl.add_argument(
        "--molecular-energy", action="store_true",
        help="use <H_mol> instead of <H(t)> as E(t) in the bound",
    )
    p_qsl.set_defaults(func=cmd_qsl)

    p_cost = sub.add_parser("cost", help="measurement/cost model")
    p_cost.add_argument("--runlog")
    p_cost.add_argument("--K", type=int)
    p_cost.add_argument("--params", type=int)
    p_cost.add_argument("--eta", type=int)
    p_cost.add_argument("--epsilon", type=float, default=1e-3)
    p_cost.set_defaults(func=cmd_cost)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalIntegrityError as exc:
        print(f"qscool: numerical-integrity error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"qscool: no convergence: {exc}", file=sys.stderr)
        return 1
    except (QscoolError, OSError, json.JSONDecodeError) as exc:
        print(f"qscool: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
