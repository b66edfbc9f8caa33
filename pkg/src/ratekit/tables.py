"""Off-line table construction and persistence.

Builds the per-rate/per-level cost table, the per-rate power table, the
windowed cost/energy totals, and the profit-sorted tables used by the
best-first search.  Files store periods in milliseconds; everything internal
is seconds and joules.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .energy import floor_cycles
from .lqg import LqgController, design, evaluate_cost
from .plant import PlantModel


def _max_workers(n_tasks: int) -> int:
    cap = os.environ.get("RATEKIT_THREADS", "").strip()
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_tasks, limit))


@dataclass(frozen=True)
class RateSet:
    """Strictly increasing admissible sampling periods, in seconds."""

    periods: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in self.periods)
        if not p:
            raise ValueError("rate set must not be empty")
        if any(v <= 0.0 for v in p):
            raise ValueError("all periods must be positive")
        if any(b <= a for a, b in zip(p, p[1:])):
            raise ValueError("periods must be strictly increasing")
        object.__setattr__(self, "periods", p)

    @classmethod
    def from_milliseconds(cls, ms) -> "RateSet":
        return cls(tuple(float(v) / 1000.0 for v in ms))

    @property
    def periods_ms(self) -> tuple:
        return tuple(v * 1000.0 for v in self.periods)

    def __len__(self) -> int:
        return len(self.periods)

    def index_of(self, h: float, tol: float = 1e-12) -> int:
        for i, v in enumerate(self.periods):
            if abs(v - h) <= tol * max(1.0, abs(v)):
                return i
        raise ValueError(f"period {h} s is not in the rate set")


@dataclass(frozen=True)
class LevelSpec:
    """Disturbance levels as right-closed intervals of the intensity estimate.

    ``thresholds`` holds the k+1 increasing boundaries; level j (1-based)
    covers (thresholds[j-1], thresholds[j]].  ``representative_r`` supplies
    the single evaluation intensity per level.
    """

    thresholds: tuple
    representative_r: tuple

    def __post_init__(self):
        thr = tuple(float(v) for v in self.thresholds)
        rep = tuple(float(v) for v in self.representative_r)
        if len(thr) < 2:
            raise ValueError("need at least two thresholds (one level)")
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if len(rep) != len(thr) - 1:
            raise ValueError(f"expected {len(thr) - 1} representative values, got {len(rep)}")
        for j, r in enumerate(rep):
            if not (thr[j] < r <= thr[j + 1]):
                raise ValueError(
                    f"representative_r[{j}] = {r} outside level interval "
                    f"({thr[j]}, {thr[j + 1]}]")
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "representative_r", rep)

    @property
    def k(self) -> int:
        return len(self.representative_r)


@dataclass
class CostTable:
    """Stationary cost J[i][j] for period i at level j (cost per second)."""

    rates: RateSet
    entries: np.ndarray  # (n, k)
    violations: tuple = ()  # (i, j) pairs where J decreased along i

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    def rate_index(self, h: float) -> int:
        return self.rates.index_of(h)


@dataclass
class PowerTable:
    """Average power per rate (mW) under constant energy per cycle phi (mJ)."""

    rates: RateSet
    power_mw: np.ndarray  # (n,)
    phi_mj: float


@dataclass
class WindowTotals:
    """Cost/energy totals of every (rate, level) pair over one window.

    cc_total[i][j] = J[i][j] * T_j with T_j = fraction_j * window;
    ec_total[i] is the full-window energy at rate i (the profit denominator);
    ec_by_level[i][j] is the per-level energy used for budget feasibility.
    Energies in joules.
    """

    rates: RateSet
    fractions: tuple
    window: float
    cc_total: np.ndarray   # (n, k)
    ec_total: np.ndarray   # (n,)
    ec_by_level: np.ndarray  # (n, k)
    phi_mj: float

    @property
    def n(self) -> int:
        return self.cc_total.shape[0]

    @property
    def k(self) -> int:
        return self.cc_total.shape[1]


@dataclass
class ProfitTables:
    """Per-level tables sorted by descending profit B = 1/(CCTotal * ECTotal).

    ``order[j]`` maps rank -> rate index; parallel arrays carry the stored
    cost, energy and profit rows.  Profit ties break toward the longer
    period.
    """

    order: np.ndarray    # (k, n) int
    profit: np.ndarray   # (k, n)
    cc: np.ndarray       # (k, n)
    ec: np.ndarray       # (k, n)


def design_all(plant: PlantModel, rates: RateSet) -> list:
    """Design the LQG controller for every rate (parallel over rates)."""
    def one(h):
        return design(plant, h)

    with ThreadPoolExecutor(max_workers=_max_workers(len(rates))) as pool:
        return list(pool.map(one, rates.periods))


def build_cost_table(plant: PlantModel, rates: RateSet, levels: LevelSpec,
                     controllers=None) -> CostTable:
    """Evaluate J at every (rate, representative intensity) pair.

    Monotonicity violations along the period axis are recorded on the table
    and reported as warnings; they disable dominance pruning downstream.
    """
    if controllers is None:
        controllers = design_all(plant, rates)
    n, k = len(rates), levels.k

    def row(args):
        i, ctrl = args
        return [evaluate_cost(plant, ctrl, levels.representative_r[j]).J for j in range(k)]

    with ThreadPoolExecutor(max_workers=_max_workers(n)) as pool:
        rows = list(pool.map(row, enumerate(controllers)))
    entries = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(entries)) or entries.min() < 0.0:
        raise ValueError("cost table has non-finite or negative entries")
    violations = []
    for j in range(k):
        for i in range(1, n):
            if entries[i, j] < entries[i - 1, j]:
                violations.append((i, j))
    if violations:
        warnings.warn(f"cost table not monotone in the period at {violations}; "
                      "dominance pruning will fall back to the exhaustive scan")
    return CostTable(rates=rates, entries=entries, violations=tuple(violations))


def build_power_table(rates: RateSet, peak_power_mw: float) -> PowerTable:
    """Power per rate from constant energy per cycle: P[i] = peak * h_1 / h_i."""
    if peak_power_mw <= 0.0:
        raise ValueError(f"peak power must be positive, got {peak_power_mw}")
    h1 = rates.periods[0]
    power = np.array([peak_power_mw * h1 / h for h in rates.periods])
    # mW * s = mJ: energy per cycle is constant across rates
    return PowerTable(rates=rates, power_mw=power, phi_mj=peak_power_mw * h1)


def totals_over_window(ct: CostTable, pt: PowerTable, fractions, window: float) -> WindowTotals:
    """Expand the tables into window totals for a disturbance pattern."""
    fr = tuple(float(f) for f in fractions)
    if len(fr) != ct.k:
        raise ValueError(f"expected {ct.k} fractions, got {len(fr)}")
    if any(f < 0.0 for f in fr):
        raise ValueError("pattern fractions must be non-negative")
    if abs(sum(fr) - 1.0) > 1e-12:
        raise ValueError(f"pattern fractions must sum to 1, got {sum(fr)}")
    if window <= 0.0:
        raise ValueError(f"window must be positive, got {window}")
    n, k = len(ct.rates), ct.k
    phi_j = pt.phi_mj * 1e-3
    cc = np.empty((n, k))
    ec_lvl = np.empty((n, k))
    ec_tot = np.empty(n)
    for i, h in enumerate(ct.rates.periods):
        ec_tot[i] = floor_cycles(window, h) * phi_j
        for j in range(k):
            tj = fr[j] * window
            cc[i, j] = ct.entries[i, j] * tj
            ec_lvl[i, j] = floor_cycles(tj, h) * phi_j
    return WindowTotals(rates=ct.rates, fractions=fr, window=float(window),
                        cc_total=cc, ec_total=ec_tot, ec_by_level=ec_lvl,
                        phi_mj=pt.phi_mj)


def build_profit_tables(totals: WindowTotals) -> ProfitTables:
    """Sort every level's rows by descending profit; ties to the longer period."""
    n, k = totals.n, totals.k
    if np.any(totals.cc_total <= 0.0):
        bad = np.argwhere(totals.cc_total <= 0.0)[0]
        raise ValueError(
            f"profit undefined: CCTotal[{bad[0]}][{bad[1]}] is zero "
            "(level with zero cost share); supply a pattern with positive fractions")
    if np.any(totals.ec_total <= 0.0):
        bad = int(np.argwhere(totals.ec_total <= 0.0)[0][0])
        raise ValueError(f"profit undefined: ECTotal[{bad}] is zero")
    order = np.empty((k, n), dtype=np.int64)
    profit = np.empty((k, n))
    cc = np.empty((k, n))
    ec = np.empty((k, n))
    for j in range(k):
        b = 1.0 / (totals.cc_total[:, j] * totals.ec_total)
        idx = np.lexsort((-np.arange(n), -b))
        order[j] = idx
        profit[j] = b[idx]
        cc[j] = totals.cc_total[idx, j]
        ec[j] = totals.ec_total[idx]
    return ProfitTables(order=order, profit=profit, cc=cc, ec=ec)


# ---------------------------------------------------------------------------
# Persistence: CSV tables plus a JSON sidecar with provenance.
# ---------------------------------------------------------------------------


def save_tables(out_dir, ct: CostTable, pt: PowerTable, profit: ProfitTables,
                meta: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n, k = len(ct.rates), ct.k
    ms = ct.rates.periods_ms
    with open(out / "ct.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h_ms"] + [f"J_l{j + 1}" for j in range(k)])
        for i in range(n):
            w.writerow([repr(ms[i])] + [repr(float(v)) for v in ct.entries[i]])
    with open(out / "pt.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h_ms", "power_mw"])
        for i in range(n):
            w.writerow([repr(ms[i]), repr(float(pt.power_mw[i]))])
    for j in range(k):
        with open(out / f"profit_l{j + 1}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h_ms", "cc_total", "ec_total", "profit"])
            for rank in range(n):
                i = int(profit.order[j, rank])
                w.writerow([repr(ms[i]), repr(float(profit.cc[j, rank])),
                            repr(float(profit.ec[j, rank])),
                            repr(float(profit.profit[j, rank]))])
    sidecar = dict(meta)
    sidecar.setdefault("schema", 1)
    sidecar["rates_ms"] = list(ms)
    sidecar["phi_mj"] = pt.phi_mj
    sidecar["cost_monotonicity_violations"] = [list(v) for v in ct.violations]
    sidecar["built_at"] = datetime.now(timezone.utc).isoformat()
    (out / "tables.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def load_tables(table_dir):
    """Read (CostTable, PowerTable, meta) back from a table directory."""
    base = Path(table_dir)
    ct_path = base / "ct.csv"
    pt_path = base / "pt.csv"
    for p in (ct_path, pt_path):
        if not p.exists():
            raise FileNotFoundError(f"table file not found: {p}")
    meta = {}
    sidecar = base / "tables.json"
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
    with open(ct_path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    k = len(header) - 1
    ms = [float(r[0]) for r in body]
    entries = np.array([[float(v) for v in r[1:]] for r in body])
    rates = RateSet(tuple(m / 1000.0 for m in ms))
    with open(pt_path, newline="") as fh:
        prow = list(csv.reader(fh))[1:]
    power = np.array([float(r[1]) for r in prow])
    phi_mj = meta.get("phi_mj", float(power[0] * rates.periods[0] * 1000.0))
    violations = tuple(tuple(v) for v in meta.get("cost_monotonicity_violations", ()))
    ct = CostTable(rates=rates, entries=entries, violations=violations)
    pt = PowerTable(rates=rates, power_mw=power, phi_mj=float(phi_mj))
    return ct, pt, meta
