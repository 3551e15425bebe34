"""Batch experiments: CDS size, density, degree sum and flooding cost versus
node density, averaged over seeded random deployments.

Each (lambda, trial) pair draws one connected graph and runs every requested
algorithm on it, so rows for different algorithms are paired comparisons.
Work units are independent; results are gathered into a dict and summed in
sorted order, so the output does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import fmean, stdev

import numpy as np

from .cds import DEFAULT_SOLVER_CAP, MPR_CDS, OPTIMAL, WU_LI, canonical_algorithm, elect
from .flood import average_flood_cost, check_valve_ratio as _valve_ratio, flooding_cost_formula
from .udg import PLACEMENTS, DeploymentSpec, Graph, derive_seed, generate_connected

CSV_COLUMNS = ("dim", "ell", "lambda", "algorithm", "trials", "mean_size", "mean_density",
               "mean_degsum", "flood_formula", "flood_measured", "ci95")

# degree-sum slope per unit length, per algorithm (1D)
SLOPE_PER_ELL = {WU_LI: 4.0, MPR_CDS: 3.0}


class SweepError(ValueError):
    pass


class SweepInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    dim: int = 1
    ell: float = 10.0
    lambdas: tuple[float, ...] = (5.0, 10.0, 20.0)
    trials: int = 100
    algorithms: tuple[str, ...] = (WU_LI, MPR_CDS)
    check_valve: bool = False
    cap: int = DEFAULT_SOLVER_CAP
    seed_base: int = 0
    placement: str = "fixed-n"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        object.__setattr__(self, "algorithms", tuple(canonical_algorithm(a) for a in self.algorithms))

    def validate(self) -> None:
        if self.dim not in (1, 2):
            raise SweepError("dim must be 1 or 2")
        if not self.ell > 0:
            raise SweepError("ell must be positive")
        if not self.lambdas or any(not x > 0 for x in self.lambdas):
            raise SweepError("lambda values must be positive")
        if self.trials < 1:
            raise SweepError("trials must be >= 1")
        if not self.algorithms:
            raise SweepError("no algorithms requested")
        if self.placement not in PLACEMENTS:
            raise SweepError(f"unknown placement {self.placement!r}")
        if self.workers < 1:
            raise SweepError("workers must be >= 1")
        if OPTIMAL in self.algorithms:
            worst = max(self.deployment(x, 0).expected_n for x in self.lambdas)
            if worst > self.cap:
                raise SweepError(f"optimal requested with expected n={worst:g} over the solver cap {self.cap}")

    def deployment(self, lam: float, trial: int) -> DeploymentSpec:
        seed = derive_seed(self.seed_base, round(lam * 1000), trial)
        return DeploymentSpec(self.dim, self.ell, lam, seed, self.placement)

    @property
    def measured_length(self) -> float:
        """Length (1D) or area (2D) over which density is counted."""
        if self.dim == 1:
            return self.ell - 2 if self.ell > 2 else self.ell
        return self.ell


@dataclass(frozen=True)
class TrialResult:
    n: int
    resamples: int
    size: int
    counted: int
    degsum: int
    formula: Fraction
    measured: Fraction


@dataclass(frozen=True)
class SweepRow:
    dim: int
    ell: float
    lam: float
    algorithm: str
    trials: int
    mean_size: float
    mean_density: float
    mean_degsum: float
    flood_formula: float
    flood_measured: float
    ci95: float
    mean_n: float = 0.0
    resamples: int = 0

    def csv_fields(self) -> list[str]:
        return [str(self.dim), f"{self.ell:g}", f"{self.lam:g}", self.algorithm, str(self.trials),
                f"{self.mean_size:.6f}", f"{self.mean_density:.6f}", f"{self.mean_degsum:.6f}",
                f"{self.flood_formula:.6f}", f"{self.flood_measured:.6f}", f"{self.ci95:.6f}"]


def _counted(g: Graph, members, spec: SweepSpec) -> int:
    # 1D: only the interior [1, ell - 1] counts, boundary nodes see fewer neighbors
    if spec.dim == 1 and spec.ell > 2:
        return sum(1 for u in members if 1.0 <= g.positions[u][0] <= spec.ell - 1.0)
    return len(members)


def run_trial(spec: SweepSpec, lam: float, trial: int) -> dict[str, TrialResult]:
    g, resamples = generate_connected(spec.deployment(lam, trial))
    out = {}
    for algo in spec.algorithms:
        if algo == OPTIMAL and g.n > spec.cap:
            raise SweepError(f"lambda={lam:g} trial {trial}: n={g.n} exceeds solver cap {spec.cap}")
        r = elect(g, algo, spec.cap)
        formula = flooding_cost_formula(g, r.members)
        measured = average_flood_cost(g, r.members, spec.check_valve)
        if not spec.check_valve and measured != formula:
            raise SweepInvariantError(
                f"lambda={lam:g} trial {trial} {algo}: measured {measured} != formula {formula}")
        out[algo] = TrialResult(g.n, resamples, r.size, _counted(g, r.members, spec), r.degree_sum,
                                formula, measured)
    return out


def _unit(args):
    spec, lam, trial = args
    return (lam, trial), run_trial(spec, lam, trial)


def _ci95(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return 1.96 * stdev(values) / math.sqrt(len(values))


def _map(spec: SweepSpec, units: list) -> dict:
    if spec.workers == 1 or len(units) == 1:
        return dict(map(_unit, units))
    with ProcessPoolExecutor(max_workers=spec.workers) as pool:
        return dict(pool.map(_unit, units, chunksize=max(1, len(units) // (4 * spec.workers))))


def sweep(spec: SweepSpec) -> list[SweepRow]:
    spec.validate()
    units = [(spec, lam, t) for lam in spec.lambdas for t in range(spec.trials)]
    results = _map(spec, units)
    rows = []
    for lam in spec.lambdas:
        for algo in spec.algorithms:
            per = [results[(lam, t)][algo] for t in range(spec.trials)]
            measured = [float(p.measured) for p in per]
            rows.append(SweepRow(
                dim=spec.dim, ell=spec.ell, lam=lam, algorithm=algo, trials=spec.trials,
                mean_size=fmean(p.size for p in per),
                mean_density=fmean(p.counted for p in per) / spec.measured_length,
                mean_degsum=fmean(p.degsum for p in per),
                flood_formula=float(sum((p.formula for p in per), Fraction(0)) / spec.trials),
                flood_measured=float(sum((p.measured for p in per), Fraction(0)) / spec.trials),
                ci95=_ci95(measured),
                mean_n=fmean(p.n for p in per),
                resamples=sum(p.resamples for p in per),
            ))
    return rows


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_fields())
    return buf.getvalue()


def rows_from_csv(text: str) -> list[SweepRow]:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(SweepRow(int(rec["dim"]), float(rec["ell"]), float(rec["lambda"]), rec["algorithm"],
                             int(rec["trials"]), float(rec["mean_size"]), float(rec["mean_density"]),
                             float(rec["mean_degsum"]), float(rec["flood_formula"]),
                             float(rec["flood_measured"]), float(rec["ci95"])))
    return rows


# -- degree-sum slopes -------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    algorithm: str
    slope: float
    intercept: float
    points: int
    expected: float | None

    @property
    def relative_error(self) -> float | None:
        if self.expected is None:
            return None
        return (self.slope - self.expected) / self.expected


def slope_fit(rows: list[SweepRow]) -> dict[str, SlopeFit]:
    """Least-squares slope of mean degree sum against lambda, per algorithm."""
    by_algo: dict[str, list[SweepRow]] = {}
    for r in rows:
        if r.dim != 1:
            raise SweepError("degree-sum slopes are defined for 1D rows only")
        by_algo.setdefault(r.algorithm, []).append(r)
    fits = {}
    for algo, rs in sorted(by_algo.items()):
        lams = sorted({r.lam for r in rs})
        if len(lams) < 3:
            raise SweepError(f"{algo}: need at least 3 lambda values, got {len(lams)}")
        ells = {r.ell for r in rs}
        if len(ells) != 1:
            raise SweepError(f"{algo}: rows mix segment lengths {sorted(ells)}")
        x = np.array([r.lam for r in rs])
        y = np.array([r.mean_degsum for r in rs])
        slope, intercept = np.polyfit(x, y, 1)
        per_ell = SLOPE_PER_ELL.get(algo)
        expected = per_ell * ells.pop() if per_ell is not None else None
        fits[algo] = SlopeFit(algo, float(slope), float(intercept), len(rs), expected)
    return fits


# -- check valve ---------------------------------------------------------------

@dataclass(frozen=True)
class ValveRow:
    lam: float
    algorithm: str
    trials: int
    mean_ratio: float
    ci95: float


def check_valve_ratio(spec: SweepSpec) -> list[ValveRow]:
    """Measured share of backbone sends left once the check valve is on.

    An observation for the report; nothing here asserts a target value.
    """
    spec.validate()
    rows = []
    for lam in spec.lambdas:
        ratios: dict[str, list[float]] = {a: [] for a in spec.algorithms}
        for t in range(spec.trials):
            g, _ = generate_connected(spec.deployment(lam, t))
            for algo in spec.algorithms:
                r = elect(g, algo, spec.cap)
                ratios[algo].append(float(_valve_ratio(g, r.members)))
        for algo in spec.algorithms:
            rows.append(ValveRow(lam, algo, spec.trials, fmean(ratios[algo]), _ci95(ratios[algo])))
    return rows


# -- shape checks on sweep output ---------------------------------------------

@dataclass
class ShapeReport:
    failures: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def shape_checks(rows: list[SweepRow]) -> ShapeReport:
    """Orderings the curves must respect: optimal has the smallest degree sum at
    every lambda, and flooding cost grows with lambda for every algorithm."""
    rep = ShapeReport()
    table = {(r.lam, r.algorithm): r for r in rows}
    lams = sorted({r.lam for r in rows})
    algos = sorted({r.algorithm for r in rows})
    for lam in lams:
        opt = table.get((lam, OPTIMAL))
        for algo in algos:
            r = table.get((lam, algo))
            if opt is not None and r is not None and algo != OPTIMAL and opt.mean_degsum > r.mean_degsum:
                rep.failures.append(f"lambda={lam:g}: optimal degsum {opt.mean_degsum} > {algo} {r.mean_degsum}")
        wl, mpr = table.get((lam, WU_LI)), table.get((lam, MPR_CDS))
        if wl is not None and mpr is not None:
            better = "wu-li" if wl.mean_degsum < mpr.mean_degsum else "mpr-cds"
            rep.notes.append(f"lambda={lam:g}: lower mean degree sum: {better} "
                             f"({wl.mean_degsum:.3f} vs {mpr.mean_degsum:.3f})")
    for algo in algos:
        series = [table[(lam, algo)].flood_measured for lam in lams if (lam, algo) in table]
        for a, b in zip(series, series[1:]):
            if not b > a:
                rep.failures.append(f"{algo}: flood cost not increasing ({a} -> {b})")
    return rep


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)

