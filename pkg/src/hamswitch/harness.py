"""Declarative experiment runner: config loading, sweeps, persistence, curves.

A sweep walks the (n, p, T) grid of one TOML config, runs best-of-N policy
gradient at every point, optionally audits the winner against Haar-random
state fidelity and refines it with GRAPE, and appends one JSON record per
point to a JSONL file.  Records embed the fully resolved model so a stored
protocol re-evaluates bit-for-bit without re-running the preset logic.

Determinism contract: every sweep point derives its seed from
(master_seed, point_index), and restarts split further inside the
optimizer, so results are independent of execution order and worker count.
Volatile data (wall times) goes to the run log, never into records.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import itertools
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .fidelity import average_state_fidelity, mli
from .models import (
    SpinSystemSpec,
    build_lindblad_operators,
    build_switching_ansatz,
    build_target,
    ns_to_sim_time,
    standard_parameter_presets,
)
from .optimize import (
    GrapeConfig,
    PGConfig,
    evaluate_protocol,
    grape_refine,
    pg_optimize,
)
from .propagate import SwitchingProtocol, propagate_switching

SCHEMA_VERSION = 1

# every key a config may contain; unknown keys are hard errors
_CONFIG_SCHEMA: dict[str, set[str]] = {
    "": {"schema_version", "model", "target", "control", "sweep", "pg", "grape", "audit", "output", "seed"},
    "model": {
        "preset",
        "coupling_seed",
        "gamma",
        "t1_system_ns",
        "t1_tls_ns",
        "n_qubits",
        "coupling_kind",
        "frame",
        "qubit_splittings",
        "bath_splittings",
        "couplings",
        "control_strength_x",
        "control_strength_y",
    },
    "target": {"gate"},
    "control": {"ansatz", "fidelity_kind"},
    "sweep": {"T", "p", "n", "time_unit"},
    "pg": {
        "iterations",
        "batch_size",
        "restarts",
        "lr_mean",
        "lr_mean_end",
        "lr_log_std",
        "init_std",
        "sigma_floor",
        "sigma_floor_end",
        "random_init",
    },
    "grape": {"enabled", "max_iterations", "gradient_tolerance"},
    "audit": {"state_fidelity_samples"},
    "output": {"directory"},
    "seed": {"master"},
}


class ConfigError(ValueError):
    """Malformed experiment configuration."""


@dataclass
class ExperimentConfig:
    model: dict[str, Any]
    gate: str
    ansatz: str
    fidelity_kind: str
    sweep_T: list[float]
    sweep_p: list[int]
    sweep_n: list[Any]
    pg: dict[str, Any]
    grape_enabled: bool
    grape: dict[str, Any]
    audit_samples: int
    output_dir: str
    master_seed: int

    def __post_init__(self):
        if not self.sweep_T or not self.sweep_p or not self.sweep_n:
            raise ConfigError("sweep lists T, p, n must be non-empty")
        if self.fidelity_kind not in ("unitary", "ref_state"):
            raise ConfigError(f"unknown fidelity_kind {self.fidelity_kind!r}")

    def points(self) -> list[tuple[Any, int, float]]:
        """The sweep grid in deterministic order: n outermost, then p, then T."""
        return [
            (n, p, t)
            for n, p, t in itertools.product(self.sweep_n, self.sweep_p, self.sweep_T)
        ]


def _reject_unknown_keys(data: dict, section: str):
    allowed = _CONFIG_SCHEMA[section]
    for key in data:
        if key not in allowed:
            where = section or "top level"
            raise ConfigError(f"unknown key {key!r} in {where}; allowed: {sorted(allowed)}")


def parse_config(data: dict) -> ExperimentConfig:
    _reject_unknown_keys(data, "")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    for section in ("model", "target", "control", "sweep", "seed"):
        if section not in data:
            raise ConfigError(f"missing required section [{section}]")
    for section, content in data.items():
        if isinstance(content, dict):
            _reject_unknown_keys(content, section)

    sweep = data["sweep"]
    unit = sweep.get("time_unit", "sim")
    if unit not in ("sim", "ns"):
        raise ConfigError(f"time_unit must be 'sim' or 'ns', got {unit!r}")
    t_values = [float(t) for t in sweep["T"]]
    if unit == "ns":
        t_values = [ns_to_sim_time(t) for t in t_values]

    seed = data["seed"]
    if "master" not in seed:
        raise ConfigError("seed.master is required; wall-clock seeding is not supported")

    grape = data.get("grape", {})
    return ExperimentConfig(
        model=dict(data["model"]),
        gate=data["target"]["gate"],
        ansatz=data["control"]["ansatz"],
        fidelity_kind=data["control"].get("fidelity_kind", "unitary"),
        sweep_T=t_values,
        sweep_p=[int(p) for p in sweep["p"]],
        sweep_n=list(sweep["n"]),
        pg=dict(data.get("pg", {})),
        grape_enabled=bool(grape.get("enabled", False)),
        grape={k: v for k, v in grape.items() if k != "enabled"},
        audit_samples=int(data.get("audit", {}).get("state_fidelity_samples", 100)),
        output_dir=str(data.get("output", {}).get("directory", "results")),
        master_seed=int(seed["master"]),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(tomllib.load(fh))


def build_spec(model: dict[str, Any], n_bath) -> SpinSystemSpec:
    """Resolve the [model] section plus a sweep bath count into a concrete spec."""
    model = dict(model)
    preset = model.pop("preset", "custom")
    if preset != "custom":
        kwargs = {}
        if "coupling_seed" in model:
            kwargs["seed"] = int(model.pop("coupling_seed"))
        if "gamma" in model:
            kwargs["qubit_qubit_coupling"] = float(model.pop("gamma"))
        for key in ("t1_system_ns", "t1_tls_ns"):
            if key in model:
                kwargs[key] = float(model.pop(key))
        if model:
            raise ConfigError(f"keys {sorted(model)} are only valid with preset = 'custom'")
        n = tuple(int(x) for x in n_bath) if isinstance(n_bath, (list, tuple)) else int(n_bath)
        return standard_parameter_presets(preset, n_bath=n, **kwargs)
    # explicit model: n comes from the sweep axis
    model.pop("coupling_seed", None)
    t1_sys = model.pop("t1_system_ns", None)
    t1_tls = model.pop("t1_tls_ns", None)
    gamma = model.pop("gamma", 0.0)
    n = tuple(int(x) for x in n_bath) if isinstance(n_bath, (list, tuple)) else int(n_bath)
    return SpinSystemSpec(
        n_qubits=int(model.pop("n_qubits", 1)),
        n_bath=n,
        coupling_kind=model.pop("coupling_kind"),
        frame=model.pop("frame"),
        qubit_splittings=tuple(model.pop("qubit_splittings")),
        bath_splittings=tuple(model.pop("bath_splittings", ())),
        couplings=tuple(model.pop("couplings", ())),
        qubit_qubit_coupling=float(gamma),
        control_strength_x=model.pop("control_strength_x", None),
        control_strength_y=model.pop("control_strength_y", None),
        t1_system=ns_to_sim_time(t1_sys) if t1_sys is not None else None,
        t1_tls=ns_to_sim_time(t1_tls) if t1_tls is not None else None,
    )


def spec_to_dict(spec: SpinSystemSpec) -> dict[str, Any]:
    d = dataclasses.asdict(spec)
    d["n_bath"] = list(spec.n_bath) if isinstance(spec.n_bath, tuple) else spec.n_bath
    for key in ("qubit_splittings", "bath_splittings", "couplings"):
        d[key] = list(d[key])
    return d


def spec_from_dict(d: dict[str, Any]) -> SpinSystemSpec:
    d = dict(d)
    n_bath = d["n_bath"]
    d["n_bath"] = tuple(n_bath) if isinstance(n_bath, list) else n_bath
    for key in ("qubit_splittings", "bath_splittings", "couplings"):
        d[key] = tuple(d[key])
    return SpinSystemSpec(**d)


@dataclass
class ResultRecord:
    """One sweep point's outcome; everything needed to re-verify is embedded."""

    gate: str
    ansatz: str
    fidelity_kind: str
    n: Any
    p: int
    T: float
    best_fidelity: float
    best_mli: float
    durations: list[float]
    per_restart_fidelities: list[float]
    restart_best_index: int
    point_seed: int
    point_index: int
    master_seed: int
    model: dict[str, Any]
    amplitudes: list[float] | None = None
    grape_fidelity: float | None = None
    grape_mli: float | None = None
    state_fid_mean: float | None = None
    state_fid_std: float | None = None
    state_fid_samples: int = 0
    error: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.error is None and self.per_restart_fidelities:
            if abs(self.best_fidelity - max(self.per_restart_fidelities)) > 1e-9:
                raise ValueError("best fidelity must be the max over restarts")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "ResultRecord":
        return ResultRecord(**json.loads(line))


def point_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def _run_point(cfg: ExperimentConfig, index: int, n, p: int, t: float) -> ResultRecord:
    spec = build_spec(cfg.model, n)
    ansatz = build_switching_ansatz(spec, cfg.ansatz)
    target = build_target(cfg.gate, n_qubits=spec.n_qubits)
    seed = point_seed(cfg.master_seed, index)
    pg_cfg = PGConfig(depth=p, total_time=t, seed=seed, **cfg.pg)
    lindblads = build_lindblad_operators(spec) if cfg.fidelity_kind == "ref_state" else ()
    protocol, report, trace = pg_optimize(
        ansatz, target, pg_cfg, fidelity_kind=cfg.fidelity_kind, lindblad_ops=lindblads
    )
    record = ResultRecord(
        gate=cfg.gate,
        ansatz=cfg.ansatz,
        fidelity_kind=cfg.fidelity_kind,
        n=n,
        p=p,
        T=t,
        best_fidelity=report.fidelity,
        best_mli=report.mli,
        durations=list(protocol.durations),
        per_restart_fidelities=trace.per_restart_fidelities,
        restart_best_index=trace.restart_best_index,
        point_seed=seed,
        point_index=index,
        master_seed=cfg.master_seed,
        model=spec_to_dict(spec),
    )
    # the per-restart list tracks kernel-path values; pin the reference value
    record.per_restart_fidelities = list(record.per_restart_fidelities)
    record.per_restart_fidelities[record.restart_best_index] = report.fidelity
    record.best_fidelity = report.fidelity

    if cfg.fidelity_kind == "unitary" and cfg.audit_samples > 0:
        u = propagate_switching(ansatz, protocol).final_operator
        audit = average_state_fidelity(u, target, m_samples=cfg.audit_samples, seed=seed)
        record.state_fid_mean = audit.state_fid_mean
        record.state_fid_std = audit.state_fid_std
        record.state_fid_samples = cfg.audit_samples

    if cfg.grape_enabled:
        if cfg.fidelity_kind != "unitary":
            raise ConfigError("GRAPE refinement applies to the unitary fidelity only")
        amp, grape_report = grape_refine(
            ansatz, protocol, target, GrapeConfig(**cfg.grape)
        )
        record.amplitudes = list(amp.amplitudes)
        record.grape_fidelity = grape_report.fidelity
        record.grape_mli = grape_report.mli
    return record


def _point_task(args) -> tuple[int, ResultRecord | None, str | None]:
    cfg, index, n, p, t = args
    try:
        return index, _run_point(cfg, index, n, p, t), None
    except Exception as exc:  # noqa: BLE001 - a failed point must not kill the sweep
        return index, None, f"{type(exc).__name__}: {exc}"


def run_experiment(
    cfg: ExperimentConfig, jobs: int = 1, log=None
) -> tuple[list[ResultRecord], list[str]]:
    """All sweep points, best-of-restarts each; failures recorded, not raised."""
    points = cfg.points()
    tasks = [(cfg, i, n, p, t) for i, (n, p, t) in enumerate(points)]
    records: dict[int, ResultRecord] = {}
    errors: list[str] = []
    t0 = time.perf_counter()

    def consume(index, record, err):
        n, p, t = points[index]
        if err is not None:
            errors.append(f"point {index} (n={n}, p={p}, T={t}): {err}")
            if log is not None:
                print(f"point {index} FAILED: {errors[-1]}", file=log, flush=True)
            return
        records[index] = record
        if log is not None:
            elapsed = time.perf_counter() - t0
            print(
                f"[{elapsed:8.1f}s] point {index}: n={n} p={p} T={t:g} "
                f"mli={record.best_mli:.2f}",
                file=log,
                flush=True,
            )

    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            for index, record, err in pool.map(_point_task, tasks):
                consume(index, record, err)
    else:
        for task in tasks:
            consume(*_point_task(task))
    return [records[i] for i in sorted(records)], errors


def write_records(records: Iterable[ResultRecord], path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")


def read_records(path: str | Path) -> list[ResultRecord]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(ResultRecord.from_json(line))
    return out


def reverify_record(record: ResultRecord) -> float:
    """Re-evaluate the stored protocol through the reference path."""
    spec = spec_from_dict(record.model)
    ansatz = build_switching_ansatz(spec, record.ansatz)
    target = build_target(record.gate, n_qubits=spec.n_qubits)
    protocol = SwitchingProtocol(tuple(record.durations), record.p, record.T)
    lindblads = (
        build_lindblad_operators(spec) if record.fidelity_kind == "ref_state" else ()
    )
    report = evaluate_protocol(ansatz, protocol, target, record.fidelity_kind, lindblads)
    return report.fidelity


@dataclass
class SweepSummary:
    """Critical-point estimates for one (n, gate) group."""

    gate: str
    n: Any
    p_star: int | None
    t_star: float | None
    plateau_mli: float
    flags: list[str] = field(default_factory=list)


def estimate_critical_points(
    records: Sequence[ResultRecord],
    plateau_band: float = 0.5,
    jump_threshold: float = 2.0,
) -> list[SweepSummary]:
    """Grid-based critical time and depth estimates.

    T* is the smallest swept T whose MLI is within ``plateau_band`` of the
    grid maximum along the largest swept depth; p* is the smallest depth
    whose T-curve maximum beats the weakest curve's maximum by
    ``jump_threshold``.  Estimates are grid members, never interpolations.
    """
    groups: dict[tuple, list[ResultRecord]] = {}
    for r in records:
        if r.error is None:
            key = (r.gate, json.dumps(r.n))
            groups.setdefault(key, []).append(r)
    summaries = []
    for (gate, n_json), rows in sorted(groups.items()):
        n = json.loads(n_json)
        p_values = sorted({r.p for r in rows})
        curves = {
            p: sorted(
                [(r.T, r.best_mli) for r in rows if r.p == p], key=lambda x: x[0]
            )
            for p in p_values
        }
        flags: list[str] = []
        t_star = None
        if len(curves[p_values[-1]]) >= 2:
            top = curves[p_values[-1]]
            best = max(m for _t, m in top)
            t_star = min(t for t, m in top if m >= best - plateau_band)
            if t_star == max(t for t, _m in top):
                flags.append("no-plateau: T* sits on the largest grid point")
        else:
            flags.append("T grid too small for a critical-time estimate")
        p_star = None
        if len(p_values) >= 2:
            flat_max = min(max(m for _t, m in curves[p]) for p in p_values)
            for p in p_values:
                if max(m for _t, m in curves[p]) >= flat_max + jump_threshold:
                    p_star = p
                    break
            if p_star is None:
                p_star = p_values[-1]
                flags.append("no depth jump found; p* defaulted to the largest grid point")
        plateau = max(r.best_mli for r in rows)
        summaries.append(
            SweepSummary(gate=gate, n=n, p_star=p_star, t_star=t_star, plateau_mli=plateau, flags=flags)
        )
    return summaries


CSV_HEADER = "T,p,n,gate,mli,fidelity,state_fid_mean,state_fid_std,restart_best_index"


def emit_curves(records: Sequence[ResultRecord], fmt: str, path: str | Path) -> Path:
    """Write curve data: CSV (one row per point, series contiguous) or JSON records."""
    if not records:
        raise ValueError("no records to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        rows = sorted(
            [r for r in records if r.error is None],
            key=lambda r: (r.gate, json.dumps(r.n), r.p, r.T),
        )
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in rows:
                n_txt = (
                    "+".join(str(x) for x in r.n) if isinstance(r.n, list) else str(r.n)
                )
                fh.write(
                    f"{r.T!r},{r.p},{n_txt},{r.gate},{r.best_mli!r},{r.best_fidelity!r},"
                    f"{'' if r.state_fid_mean is None else repr(r.state_fid_mean)},"
                    f"{'' if r.state_fid_std is None else repr(r.state_fid_std)},"
                    f"{r.restart_best_index}\n"
                )
    elif fmt == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump([json.loads(r.to_json()) for r in records], fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def refine_records(
    records: Sequence[ResultRecord], grape_kwargs: dict | None = None
) -> list[ResultRecord]:
    """GRAPE-refine stored protocols (unitary-fidelity records only)."""
    out = []
    for r in records:
        if r.error is not None or r.fidelity_kind != "unitary":
            out.append(r)
            continue
        spec = spec_from_dict(r.model)
        ansatz = build_switching_ansatz(spec, r.ansatz)
        target = build_target(r.gate, n_qubits=spec.n_qubits)
        protocol = SwitchingProtocol(tuple(r.durations), r.p, r.T)
        amp, report = grape_refine(
            ansatz, protocol, target, GrapeConfig(**(grape_kwargs or {}))
        )
        refined = dataclasses.replace(
            r,
            amplitudes=list(amp.amplitudes),
            grape_fidelity=report.fidelity,
            grape_mli=report.mli,
        )
        out.append(refined)
    return out
