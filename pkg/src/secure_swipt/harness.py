"""Seeded Monte-Carlo experiments comparing the solution methods; results go to CSV.

Methods
-------
``one_d``      relaxation plus 1-D search over t (the exact method)
``spca``       sequential convex approximation
``no_an``      the problem with W = 0
``fixed_rho``  the problem with every split ratio pinned to 0.5

The two baselines are solved with ``baseline_solver`` (``"spca"`` or
``"one_d"``).  Any design either baseline reports is feasible for the full
problem, so its power can never beat a globally optimal ``one_d`` value.

Seeds
-----
Trial ``i`` of an experiment with master seed ``s`` draws its channels from
``numpy.random.SeedSequence([s, i])``; the integer written to the ``seed``
column is the first 32-bit word of that sequence.  Every method runs on the
same realization and none draws random numbers of its own, so results do
not depend on execution order or on ``jobs``.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import BeamDesign, SystemConfig, check_feasibility, dbm_to_watts, generate_channels, watts_to_dbm
from .pm_sdr import extract_rank_one, line_search
from .pm_spca import spca_solve

METHODS = ("one_d", "spca", "no_an", "fixed_rho")
RANK_TOL = 1e-5
KINDS = ("convergence", "rate_sweep", "energy_sweep", "single")
SWEEP_NAMES = {"rate_sweep": "r_target", "energy_sweep": "e_cr_dbm", "convergence": "energy_dbm",
               "single": "r_target"}
CSV_COLUMNS = ("seed", "method", "sweep_name", "sweep_value", "obj_w", "obj_dbm", "an_power_w", "converged",
               "iterations", "wall_ms", "rank_ratio", "min_margin")
SUMMARY_COLUMNS = ("sweep_name", "sweep_value", "method", "feasible", "infeasible", "mean_obj_w", "mean_obj_dbm",
                   "mean_an_power_w")
CONVERGENCE_COLUMNS = ("seed", "sweep_name", "sweep_value", "iteration", "obj_w", "obj_dbm", "max_violation",
                       "converged")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.  Rate sweeps are in bits/s/Hz, energy sweeps in dBm."""

    kind: str = "single"
    base: SystemConfig = field(default_factory=SystemConfig)
    sweep: tuple = ()
    methods: tuple = METHODS
    trials: int = 1
    seed: int = 0
    grid_points: int = 20
    out: str | None = None
    spacing: str = "mixed"
    refine: bool = True
    baseline_solver: str = "spca"
    spca_max_iter: int = 50
    spca_tol: float = 1e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        sweep = tuple(float(v) for v in self.sweep)
        if self.kind == "single":
            sweep = sweep or (self.base.r_target,)
            if len(sweep) != 1:
                raise ValueError("a single experiment takes exactly one value")
        if not sweep:
            raise ValueError("sweep values must not be empty")
        if any(b <= a for a, b in zip(sweep, sweep[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "sweep", sweep)
        methods = tuple(self.methods)
        if not methods or any(m not in METHODS for m in methods) or len(set(methods)) != len(methods):
            raise ValueError(f"methods must be a nonempty subset of {METHODS}, got {methods!r}")
        object.__setattr__(self, "methods", methods)
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        if self.baseline_solver not in ("spca", "one_d"):
            raise ValueError("baseline_solver must be 'spca' or 'one_d'")

    @property
    def sweep_name(self) -> str:
        return SWEEP_NAMES[self.kind]

    def system_at(self, value: float) -> SystemConfig:
        if self.kind in ("rate_sweep", "single"):
            return self.base.replace(r_target=value)
        if self.kind == "energy_sweep":
            return self.base.replace(e_cr_target=float(dbm_to_watts(value)))
        w = float(dbm_to_watts(value))
        return self.base.replace(e_cr_target=w, e_er_target=w)


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    method: str
    sweep_name: str
    sweep_value: float
    obj_w: float
    obj_dbm: float
    an_power_w: float
    converged: bool
    iterations: int
    wall_ms: float
    rank_ratio: float
    min_margin: float
    trial: int = 0

    def row(self) -> list:
        return [_fmt(getattr(self, c)) for c in CSV_COLUMNS]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def trial_seed(master: int, trial: int) -> int:
    return int(np.random.SeedSequence([int(master), int(trial)]).generate_state(1)[0])


def _check_writable(path) -> None:
    if path is None:
        return
    p = Path(path)
    with open(p, "w"):
        pass


def _record(ec, seed, trial, method, value, design, feasible_claim, iterations, wall_ms, rank_ratio, cfg, ch,
            timing):
    if design is None or not feasible_claim:
        return TrialRecord(seed, method, ec.sweep_name, value, math.inf, math.inf, math.nan, False, iterations,
                           wall_ms if timing else math.nan, rank_ratio, math.nan, trial)
    rep = check_feasibility(cfg, ch, design)
    obj = design.info_power
    return TrialRecord(seed, method, ec.sweep_name, value, obj, float(watts_to_dbm(obj)), design.an_power,
                       rep.overall, iterations, wall_ms if timing else math.nan, rank_ratio, rep.min_margin, trial)


def run_method(ec: ExperimentConfig, method: str, cfg: SystemConfig, ch, seed: int, trial: int, value: float,
               timing: bool = False) -> TrialRecord:
    """Run one method on one channel realization and certify what it returns."""
    mode = {"one_d": "full", "spca": "full", "no_an": "no_an", "fixed_rho": "fixed_rho"}[method]
    use_1d = method == "one_d" or (method in ("no_an", "fixed_rho") and ec.baseline_solver == "one_d")
    t0 = time.perf_counter()
    if use_1d:
        tr = line_search(cfg, ch, ec.grid_points, mode=mode, refine=ec.refine, spacing=ec.spacing)
        wall = 1e3 * (time.perf_counter() - t0)
        design, ratio = None, math.nan
        if tr.best.design is not None:
            # the method's output is the dominant beam; it vouches for it only under a rank-one certificate
            q, ratio = extract_rank_one(tr.best.design.q_cov)
            design = BeamDesign(np.outer(q, q.conj()), tr.best.design.w_cov, tr.best.design.rho)
        claim = tr.feasible and ratio <= RANK_TOL
        return _record(ec, seed, trial, method, value, design, claim, len(tr.grid), wall, ratio, cfg, ch, timing)
    res = spca_solve(cfg, ch, mode=mode, max_iter=ec.spca_max_iter, tol_obj=ec.spca_tol)
    wall = 1e3 * (time.perf_counter() - t0)
    design = res.final.to_design() if res.final is not None else None
    return _record(ec, seed, trial, method, value, design, res.settled, len(res.iterations), wall, 0.0, cfg, ch,
                   timing)


def _run_trial(args):
    ec, trial, timing = args
    seed = trial_seed(ec.seed, trial)
    ch = generate_channels(ec.base, seed)
    out = []
    for value in ec.sweep:
        cfg = ec.system_at(value)
        for method in ec.methods:
            out.append(run_method(ec, method, cfg, ch, seed, trial, value, timing))
    return out


def _map_trials(fn, args, jobs: int):
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


def run_experiment(ec: ExperimentConfig, jobs: int = 1, timing: bool = False) -> list:
    """Run every method on every (trial, sweep value) and write the CSV plus a summary sidecar.

    Infeasible runs are kept as rows with ``converged = 0`` and infinite
    objective.  ``wall_ms`` is left empty unless ``timing`` is set, so that
    reruns produce identical bytes.
    """
    if ec.kind == "convergence":
        raise ValueError("use run_convergence for convergence experiments")
    _check_writable(ec.out)
    if ec.out is not None:
        _check_writable(summary_path(ec.out))
    batches = _map_trials(_run_trial, [(ec, i, timing) for i in range(ec.trials)], jobs)
    order = {m: j for j, m in enumerate(METHODS)}
    records = sorted((r for b in batches for r in b), key=lambda r: (r.sweep_value, r.trial, order[r.method]))
    if ec.out is not None:
        write_records(records, ec.out)
        write_summary(summarize(records), summary_path(ec.out))
    return records


def summary_path(out) -> Path:
    p = Path(out)
    return p.with_name(p.stem + "_summary" + (p.suffix or ".csv"))


def summarize(records) -> list:
    """Per (sweep value, method): feasible/infeasible counts and averages over feasible trials."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_name, r.sweep_value, r.method), []).append(r)
    order = {m: j for j, m in enumerate(METHODS)}
    rows = []
    for (name, value, method), recs in sorted(groups.items(), key=lambda kv: (kv[0][1], order[kv[0][2]])):
        ok = [r for r in recs if r.converged]
        mean_w = float(np.mean([r.obj_w for r in ok])) if ok else math.nan
        rows.append({
            "sweep_name": name, "sweep_value": value, "method": method, "feasible": len(ok),
            "infeasible": len(recs) - len(ok), "mean_obj_w": mean_w,
            "mean_obj_dbm": float(watts_to_dbm(mean_w)) if ok else math.nan,
            "mean_an_power_w": float(np.mean([r.an_power_w for r in ok])) if ok else math.nan,
        })
    return rows


def dump_records(records, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        dump_records(records, fh)


def write_summary(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in SUMMARY_COLUMNS])


def read_records(path) -> list:
    """Parse a CSV written by :func:`write_records` back into records."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            def num(key):
                return float(row[key]) if row[key] != "" else math.nan
            out.append(TrialRecord(int(row["seed"]), row["method"], row["sweep_name"], num("sweep_value"),
                                   num("obj_w"), num("obj_dbm"), num("an_power_w"), row["converged"] == "1",
                                   int(row["iterations"]), num("wall_ms"), num("rank_ratio"), num("min_margin")))
    return out


@dataclass(frozen=True)
class ConvergenceRow:
    seed: int
    sweep_name: str
    sweep_value: float
    iteration: int
    obj_w: float
    obj_dbm: float
    max_violation: float
    converged: bool


def _convergence_trial(args):
    ec, trial = args
    seed = trial_seed(ec.seed, trial)
    ch = generate_channels(ec.base, seed)
    rows = []
    for value in ec.sweep:
        cfg = ec.system_at(value)
        res = spca_solve(cfg, ch, max_iter=ec.spca_max_iter, tol_obj=ec.spca_tol)
        for i, it in enumerate(res.iterations, start=1):
            rows.append(ConvergenceRow(seed, ec.sweep_name, value, i, it.objective,
                                       float(watts_to_dbm(it.objective)) if math.isfinite(it.objective) else math.inf,
                                       it.max_violation, res.converged))
    return rows


def run_convergence(ec: ExperimentConfig, jobs: int = 1) -> list:
    """Per-iteration SPCA objectives for each energy target (Ē at CRs and ERs alike)."""
    if ec.kind != "convergence":
        raise ValueError("run_convergence needs kind='convergence'")
    _check_writable(ec.out)
    batches = _map_trials(_convergence_trial, [(ec, i) for i in range(ec.trials)], jobs)
    rows = [r for b in batches for r in b]
    if ec.out is not None:
        with open(ec.out, "w", newline="") as fh:
            dump_convergence(rows, fh)
    return rows


def dump_convergence(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CONVERGENCE_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in asdict(r).values()])


def experiment_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from plain data (e.g. parsed YAML).  Powers ending in ``_dbm`` are in dBm."""
    d = dict(d)
    system = dict(d.pop("system", {}) or {})
    known = {f.name for f in fields(SystemConfig)}
    for key in list(system):
        if key.endswith("_dbm"):
            name = key[:-4]
            if name not in known:
                raise ValueError(f"unknown system field {key!r}")
            system[name] = float(dbm_to_watts(system.pop(key)))
    unknown = set(system) - known
    if unknown:
        raise ValueError(f"unknown system fields {sorted(unknown)}")
    base = SystemConfig(**system)
    allowed = {f.name for f in fields(ExperimentConfig)} - {"base"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown experiment fields {sorted(unknown)}")
    if "sweep" in d:
        d["sweep"] = tuple(d["sweep"])
    if "methods" in d:
        d["methods"] = tuple(d["methods"])
    return ExperimentConfig(base=base, **d)
