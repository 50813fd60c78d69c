"""Experiment configuration, grid runner and oracle comparison.

Config files use ``[section]`` headers and ``key = value`` lines; ``#`` starts
a comment.  Sections and keys::

    [model]       name (dim_heisenberg | blbq), n
    [scan]        param (delta | alpha), start, stop, steps
    [partitions]  none (true/false), p (comma list, repeatable),
                  parts (e.g. 1,2,5,6|3,4,7,8, repeatable)
    [solver]      D, max_sweeps, rel_tol, restarts, base_seed,
                  dense_threshold, max_krylov_iters, init, oracle_multistarts
    [output]      path, threads
"""
from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np

from .dmrg_solver import SolverConfig, constrained_ground_energy
from .ed_oracle import DENSE_CAP, alternating_block_oracle, dense_ground_energy, krylov_ground_energy
from .partition import PartitionSpec, p_step_partition, partition_label
from .spin_models import MODEL_NAMES, build_model, model_parameter

CSV_HEADER = ("model,n,param_name,param_value,partition,D,energy,sweeps,converged,"
              "restart_index,seed,wall_seconds")

PartitionEntry = Union[None, int, PartitionSpec]


class ConfigError(ValueError):
    def __init__(self, msg: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {msg}" if line is not None else msg)
        self.line = line


@dataclass
class ExperimentConfig:
    model: str
    n: int
    param: str
    start: float
    stop: float
    steps: int
    partitions: list = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)
    oracle_multistarts: int = 20
    output: Optional[str] = None
    threads: int = 1

    def grid(self) -> list[float]:
        return [float(x) for x in np.linspace(self.start, self.stop, self.steps)]

    def resolve(self, entry: PartitionEntry) -> PartitionSpec:
        if entry is None:
            return PartitionSpec.whole(self.n)
        if isinstance(entry, int):
            return p_step_partition(self.n, entry)
        return entry


_SOLVER_KEYS = {
    "D": int, "max_sweeps": int, "rel_tol": float, "restarts": int, "base_seed": int,
    "dense_threshold": int, "max_krylov_iters": int, "init": str,
}
_KEYS = {
    "model": {"name", "n"},
    "scan": {"param", "start", "stop", "steps"},
    "partitions": {"none", "p", "parts"},
    "solver": set(_SOLVER_KEYS) | {"oracle_multistarts"},
    "output": {"path", "threads"},
}


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _entry_key(entry):
    if entry is None:
        return (0, 0, "")
    if isinstance(entry, int):
        return (1, entry, "")
    return (2, 0, "")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment description (see module docstring)."""
    section = None
    seen: dict = {}
    lines: dict = {}
    partitions: list = []
    part_lines: list = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _KEYS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any section", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if section == "partitions":
            try:
                if key == "none":
                    if _bool(value):
                        partitions.append(None)
                        part_lines.append(lineno)
                elif key == "p":
                    for tok in value.split(","):
                        partitions.append(int(tok))
                        part_lines.append(lineno)
                else:
                    partitions.append(value)
                    part_lines.append(lineno)
            except ValueError as exc:
                raise ConfigError(f"malformed value for {key!r}: {exc}", lineno) from None
            continue
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        seen[(section, key)] = value
        lines[(section, key)] = lineno

    def get(sec, key, conv, default=None, required=False):
        if (sec, key) not in seen:
            if required:
                raise ConfigError(f"missing required key [{sec}] {key}")
            return default
        try:
            return conv(seen[(sec, key)])
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc}", lines[(sec, key)]) from None

    model = get("model", "name", str, required=True)
    if model not in MODEL_NAMES:
        raise ConfigError(f"unknown model {model!r}", lines[("model", "name")])
    n = get("model", "n", int, required=True)
    if n < 2:
        raise ConfigError(f"n must be >= 2, got {n}", lines[("model", "n")])
    param = get("scan", "param", str, model_parameter(model))
    if param != model_parameter(model):
        raise ConfigError(f"model {model} scans {model_parameter(model)!r}, not {param!r}",
                          lines.get(("scan", "param")))
    start = get("scan", "start", float, required=True)
    stop = get("scan", "stop", float, start)
    steps = get("scan", "steps", int, 1)
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}", lines.get(("scan", "steps")))
    if not (np.isfinite(start) and np.isfinite(stop)):
        raise ConfigError("scan bounds must be finite", lines.get(("scan", "start")))

    resolved = []
    for entry, lineno in zip(partitions, part_lines):
        try:
            if isinstance(entry, int):
                p_step_partition(n, entry)
            elif isinstance(entry, str):
                entry = PartitionSpec.parse(entry, n)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno) from None
        if entry in resolved:
            raise ConfigError(f"duplicate partition {partition_label(entry)}", lineno)
        resolved.append(entry)
    resolved.sort(key=_entry_key)

    kwargs = {}
    for key, conv in _SOLVER_KEYS.items():
        val = get("solver", key, conv)
        if val is not None:
            kwargs[key] = val
    try:
        solver = SolverConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    multistarts = get("solver", "oracle_multistarts", int, 20)
    output = get("output", "path", str)
    threads = get("output", "threads", int, 1)
    if threads < 1:
        raise ConfigError("threads must be >= 1", lines.get(("output", "threads")))
    return ExperimentConfig(model, n, param, start, stop, steps, resolved, solver,
                            multistarts, output, threads)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    out = ["[model]", f"name = {cfg.model}", f"n = {cfg.n}", "",
           "[scan]", f"param = {cfg.param}", f"start = {cfg.start!r}",
           f"stop = {cfg.stop!r}", f"steps = {cfg.steps}", "", "[partitions]"]
    if None in cfg.partitions:
        out.append("none = true")
    ps = [e for e in cfg.partitions if isinstance(e, int)]
    if ps:
        out.append("p = " + ", ".join(map(str, ps)))
    for e in cfg.partitions:
        if isinstance(e, PartitionSpec):
            out.append("parts = " + e.label()[len("parts:"):])
    out += ["", "[solver]"]
    for f in fields(SolverConfig):
        if f.name in _SOLVER_KEYS:
            out.append(f"{f.name} = {getattr(cfg.solver, f.name)!r}".replace("'", ""))
    out.append(f"oracle_multistarts = {cfg.oracle_multistarts}")
    out += ["", "[output]"]
    if cfg.output is not None:
        out.append(f"path = {cfg.output}")
    out.append(f"threads = {cfg.threads}")
    return "\n".join(out) + "\n"


# -- running -------------------------------------------------------------------

@dataclass
class EnergyRecord:
    model: str
    n: int
    param_name: str
    param_value: float
    partition_label: str
    D: int
    energy: float
    sweeps: int
    converged: bool
    restart_index: int
    seed: int
    wall_seconds: float

    def csv_row(self) -> list[str]:
        return [self.model, str(self.n), self.param_name, f"{self.param_value:.10g}",
                self.partition_label, str(self.D), f"{self.energy:.12f}", str(self.sweeps),
                "true" if self.converged else "false", str(self.restart_index),
                str(self.seed), f"{self.wall_seconds:.3f}"]


def point_seed(base_seed: int, point: int, part: int) -> int:
    """Stable per-job seed: ``base_seed`` xor a hash of the job coordinates."""
    mix = int(np.random.SeedSequence([point, part]).generate_state(1)[0])
    return (base_seed ^ mix) & 0x7FFFFFFF


def _jobs(cfg: ExperimentConfig):
    for pi, value in enumerate(cfg.grid()):
        for qi, entry in enumerate(cfg.partitions):
            yield (cfg, pi, value, qi, entry)


def run_job(job):
    """Solve one ``(grid point, partition)`` pair; returns ``(record, state)``."""
    cfg, pi, value, qi, entry = job
    seed = point_seed(cfg.solver.base_seed, pi, qi)
    solver = replace(cfg.solver, base_seed=seed)
    h = build_model(cfg.model, cfg.n, value)
    t0 = time.perf_counter()
    energy, state, report = constrained_ground_energy(h, cfg.resolve(entry), solver)
    wall = time.perf_counter() - t0
    rec = EnergyRecord(cfg.model, cfg.n, cfg.param, value, partition_label(entry), cfg.solver.D,
                       energy, report.sweeps_used, report.converged, report.restart_index,
                       seed, wall)
    return rec, state, report


def _record_only(job):
    return run_job(job)[0]


def _sort_key(rec: EnergyRecord):
    return (rec.param_value, rec.partition_label)


def run_records(cfg: ExperimentConfig, threads: Optional[int] = None) -> list[EnergyRecord]:
    threads = cfg.threads if threads is None else threads
    jobs = list(_jobs(cfg))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_record_only, jobs))
    else:
        records = [_record_only(j) for j in jobs]
    records.sort(key=_sort_key)
    return records


def records_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None,
                   threads: Optional[int] = None) -> list[EnergyRecord]:
    """Run the full grid and write the sorted CSV to ``out`` (or ``cfg.output``)."""
    records = run_records(cfg, threads)
    path = out if out is not None else cfg.output
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(records_to_csv(records))
    return records


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- oracle comparison ---------------------------------------------------------

@dataclass
class OracleRow:
    param_value: float
    partition_label: str
    dmrg: float
    oracle: float

    @property
    def delta(self) -> float:
        return abs(self.dmrg - self.oracle)


def oracle_energy(cfg: ExperimentConfig, value: float, entry: PartitionEntry, seed: int = 0):
    h = build_model(cfg.model, cfg.n, value)
    spec = cfg.resolve(entry)
    if spec.k == 1:
        return dense_ground_energy(h) if h.d ** h.n <= DENSE_CAP else krylov_ground_energy(h)
    if spec.k != 2:
        raise ValueError(f"no oracle for {spec.k}-part partitions")
    return alternating_block_oracle(h, spec, cfg.oracle_multistarts, seed)


def oracle_compare(cfg: ExperimentConfig) -> list[OracleRow]:
    """DMRG versus exact references for every grid point and partition."""
    rows = []
    for job in _jobs(cfg):
        rec = _record_only(job)
        _, pi, value, qi, entry = job
        ref = oracle_energy(cfg, value, entry, seed=point_seed(cfg.solver.base_seed, pi, qi))
        rows.append(OracleRow(value, rec.partition_label, rec.energy, ref))
    rows.sort(key=lambda r: (r.param_value, r.partition_label))
    return rows


def format_oracle_report(rows, tol: float) -> str:
    lines = [f"{'param':>10} {'partition':>22} {'dmrg':>18} {'oracle':>18} {'|delta|':>10}"]
    for r in rows:
        flag = "" if r.delta <= tol else "  MISMATCH"
        lines.append(f"{r.param_value:>10.4g} {r.partition_label:>22} {r.dmrg:>18.12f} "
                     f"{r.oracle:>18.12f} {r.delta:>10.2e}{flag}")
    if rows:
        lines.append(f"max |delta| = {max(r.delta for r in rows):.3e} (tol {tol:g})")
    else:
        lines.append("empty grid")
    return "\n".join(lines)
