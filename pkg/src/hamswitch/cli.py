"""Command-line interface.

Subcommands
-----------
run              sweep a config: PG optimization per (n, p, T) grid point
refine           GRAPE pass over a stored record file
baseline         no-control fidelities and control-free reduced dynamics
controllability  the eight-model Lie-closure verdict table
landscape        gradient / Hessian diagnostics at a stored protocol
curves           re-emit CSV/JSON curve data from stored records

Exit codes: 0 on success, 2 when some sweep points failed (their errors are
listed on stderr and the surviving records are still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .controllability import (
    RecursionTable,
    controllability_table,
    recursion_determinant,
    standard_controllability_specs,
)
from .fidelity import no_control_baseline
from .models import build_switching_ansatz, build_target
from .optimize import landscape_diagnostics
from .propagate import SwitchingProtocol, reduced_dynamics_no_control


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="path to the TOML experiment config")
    p.add_argument("--seed", type=int, default=None, help="override seed.master")
    p.add_argument("--out", default=None, help="override output.directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    p.add_argument("--restarts", type=int, default=None, help="override pg.restarts")


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    if getattr(args, "restarts", None):
        cfg.pg["restarts"] = args.restarts
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, errors = harness.run_experiment(cfg, jobs=args.jobs, log=sys.stderr)
    if records:
        harness.write_records(records, out_dir / "records.jsonl")
        harness.emit_curves(records, "csv", out_dir / "curves.csv")
        summaries = harness.estimate_critical_points(records)
        with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump([dataclasses.asdict(s) for s in summaries], fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"wrote {len(records)} records to {out_dir}")
    for err in errors:
        print(f"error: {err}", file=sys.stderr)
    return 2 if errors else 0


def cmd_refine(args) -> int:
    records = harness.read_records(args.records)
    kwargs = {}
    if args.max_iterations:
        kwargs["max_iterations"] = args.max_iterations
    refined = harness.refine_records(records, kwargs)
    out = args.out or args.records
    harness.write_records(refined, out)
    for r in refined:
        if r.grape_mli is not None:
            print(f"n={r.n} p={r.p} T={r.T:g}: PG mli={r.best_mli:.2f} -> GRAPE mli={r.grape_mli:.2f}")
    return 0


def cmd_baseline(args) -> int:
    cfg = _load(args)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["kind,n,gate,T,value"]
    for n in cfg.sweep_n:
        spec = harness.build_spec(cfg.model, n)
        target = build_target(cfg.gate, n_qubits=spec.n_qubits)
        for t in cfg.sweep_T:
            rep = no_control_baseline(spec, target, t)
            lines.append(f"no_control_mli,{n},{cfg.gate},{t!r},{rep.mli!r}")
        if spec.n_qubits == 1 and spec.total_bath >= 1:
            grid = np.linspace(0.0, args.dynamics_t_max, args.dynamics_points)
            pops = reduced_dynamics_no_control(spec, grid)
            for t, pop in zip(grid, pops):
                lines.append(f"population,{n},-,{t!r},{pop!r}")
    path = out_dir / "baseline.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    return 0


def cmd_controllability(args) -> int:
    rows = controllability_table(standard_controllability_specs())
    print("coupling    frame     equal  qubit  bath   algebra-dim")
    for r in rows:
        print(
            f"{r.coupling_kind:<11} {r.frame:<9} {str(r.equal_couplings):<6} "
            f"{'Y' if r.qubit_controllable else 'N':<6} "
            f"{'Y' if r.bath_controllable else 'N':<6} {r.algebra_dimension}"
        )
    print("\nrecursion determinants (rows 1..size, l2-normalized):")
    for scheme, g, h, eps in [
        ("dipole_rotating", 0.7, 0.7, 0.0),
        ("dipole_rotating", 0.5, 0.9, 0.0),
        ("dipole_lab", 0.5, 0.9, 0.9),
        ("iso_lab", 1.0, 1.5, 0.9),
    ]:
        table = RecursionTable.build(scheme, g=g, h=h, eps=eps)
        idx = list(range(1, table.row_length + 1))
        det = recursion_determinant(table, idx)
        print(f"  {scheme:<16} g={g} h={h} eps={eps}: det={det:.3e}")
    return 0


def cmd_landscape(args) -> int:
    records = harness.read_records(args.records)
    record = records[args.index]
    spec = harness.spec_from_dict(record.model)
    ansatz = build_switching_ansatz(spec, record.ansatz)
    target = build_target(record.gate, n_qubits=spec.n_qubits)
    protocol = SwitchingProtocol(tuple(record.durations), record.p, record.T)
    diag = landscape_diagnostics(ansatz, protocol, target)
    payload = {
        "grad_inf_norm": diag.grad_inf_norm,
        "hessian_eigenvalues": list(diag.hessian_eigenvalues),
        "n_positive": diag.n_positive,
        "n_negative": diag.n_negative,
        "n_near_zero": diag.n_near_zero,
    }
    print(json.dumps(payload, indent=1))
    return 0


def cmd_curves(args) -> int:
    records = harness.read_records(args.records)
    path = harness.emit_curves(records, args.format, args.out)
    print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hamswitch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep from a config file")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ref = sub.add_parser("refine", help="GRAPE-refine stored records")
    p_ref.add_argument("--records", required=True)
    p_ref.add_argument("--out", default=None)
    p_ref.add_argument("--max-iterations", type=int, default=None)
    p_ref.set_defaults(func=cmd_refine)

    p_base = sub.add_parser("baseline", help="no-control baselines and reduced dynamics")
    _add_common(p_base)
    p_base.add_argument("--dynamics-t-max", type=float, default=100.0,
                        help="reduced-dynamics horizon in simulation units")
    p_base.add_argument("--dynamics-points", type=int, default=201)
    p_base.set_defaults(func=cmd_baseline)

    p_ctrl = sub.add_parser("controllability", help="Lie-closure verdict table")
    p_ctrl.set_defaults(func=cmd_controllability)

    p_land = sub.add_parser("landscape", help="gradient/Hessian diagnostics of a record")
    p_land.add_argument("--records", required=True)
    p_land.add_argument("--index", type=int, default=0)
    p_land.set_defaults(func=cmd_landscape)

    p_curv = sub.add_parser("curves", help="re-emit curve files from records")
    p_curv.add_argument("--records", required=True)
    p_curv.add_argument("--format", choices=("csv", "json"), default="csv")
    p_curv.add_argument("--out", required=True)
    p_curv.set_defaults(func=cmd_curves)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
