"""Figure data: capacity sweeps over p_on or E, and the U(p_on) curve.

Results are tabular and serialise to CSV or JSON.  Row evaluation is a pure
function of its parameters, so rows may be computed by a process pool; output is
always ordered by the axis value.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ehcap import __version__
from ehcap.onoff import OnOffProblem, baselines, u_threshold
from ehcap.solver import DEFAULT_KMAX, DEFAULT_TOL

SWEEP_COLUMNS = ("axis", "c_causal_nats", "c_si_both_nats", "c_battery_nats", "support_size")
BITS_COLUMNS = ("c_causal_bits", "c_si_both_bits", "c_battery_bits")
UCURVE_COLUMNS = ("p_on", "u_threshold")
LN2 = math.log(2.0)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    c_causal: float
    c_si_both: float
    c_battery: float
    support_size: int
    support_size_si_both: int
    converged: bool

    def ordered(self, slack: float = 1e-6) -> bool:
        return (self.c_causal >= -slack
                and self.c_causal <= self.c_si_both + slack
                and self.c_si_both <= self.c_battery + slack)


@dataclass
class SweepResult:
    axis_name: str
    rows: list
    meta: dict = field(default_factory=dict)
    columns: tuple = SWEEP_COLUMNS

    def __post_init__(self):
        values = [self._axis(r) for r in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep rows must be strictly increasing in the axis value")

    @staticmethod
    def _axis(row):
        return row.axis_value if isinstance(row, SweepRow) else row[0]

    @property
    def converged(self) -> bool:
        return all(getattr(r, "converged", True) for r in self.rows)

    def records(self, bits: bool = False) -> list[dict]:
        out = []
        for r in self.rows:
            if isinstance(r, SweepRow):
                rec = dict(zip(SWEEP_COLUMNS, (r.axis_value, r.c_causal, r.c_si_both,
                                               r.c_battery, r.support_size)))
                if bits:
                    rec.update(zip(BITS_COLUMNS, (r.c_causal / LN2, r.c_si_both / LN2,
                                                  r.c_battery / LN2)))
            else:
                rec = dict(zip(self.columns, r))
            out.append(rec)
        return out

    def header(self, bits: bool = False) -> tuple:
        return self.columns + (BITS_COLUMNS if bits and self.columns == SWEEP_COLUMNS else ())

    def to_csv(self, bits: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = self.header(bits)
        writer.writerow(header)
        for rec in self.records(bits):
            writer.writerow([repr(float(rec[c])) if isinstance(rec[c], float) else rec[c]
                             for c in header])
        return buf.getvalue()

    def to_json(self, bits: bool = False) -> str:
        return dumps_json({"meta": self.meta, "rows": self.records(bits)})


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _transition(values: np.ndarray, sizes: list[int]):
    """Midpoint between the last binary row and the first row with more points."""
    for a, b, sa, sb in zip(values, values[1:], sizes, sizes[1:]):
        if sa <= 2 < sb:
            return 0.5 * (a + b)
    return None


def _row(args) -> SweepRow:
    axis, axis_value, fixed, tol, K_max, ppu = args
    p_on, energy = (axis_value, fixed) if axis == "pon" else (fixed, axis_value)
    b = baselines(OnOffProblem(p_on, energy), tol, K_max=K_max, points_per_unit=ppu)
    return SweepRow(
        axis_value=float(axis_value),
        c_causal=b.c_causal,
        c_si_both=b.c_si_both,
        c_battery=b.c_battery,
        support_size=b.causal_solution.support_size,
        support_size_si_both=b.si_both_solution.support_size,
        converged=b.causal_solution.converged and b.si_both_solution.converged,
    )


def _map(fn, jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def run_sweep(axis: str, fixed: float, lo: float, hi: float, steps: int, *,
              tol: float = DEFAULT_TOL, K_max: int = DEFAULT_KMAX, points_per_unit: int = 32,
              workers: int = 1) -> SweepResult:
    """Capacities along ``axis`` ("pon" or "energy") with the other parameter fixed."""
    if axis not in ("pon", "energy"):
        raise ValueError("axis must be 'pon' or 'energy'")
    if not lo < hi or steps < 2:
        raise ValueError("need lo < hi and steps >= 2")
    started = time.perf_counter()
    grid = np.round(np.linspace(lo, hi, steps), 12)
    rows = _map(_row, [(axis, float(v), fixed, tol, K_max, points_per_unit) for v in grid], workers)
    values = np.array([r.axis_value for r in rows])
    meta = {
        "axis": axis,
        "fixed": {"energy" if axis == "pon" else "p_on": fixed},
        "range": [lo, hi, steps],
        "tolerances": {"kkt_tol": tol, "K_max": K_max},
        "quadrature": {"points_per_unit": points_per_unit, "tail": 10.0},
        "support_transitions": {
            "c_causal": _transition(values, [r.support_size for r in rows]),
            "c_si_both": _transition(values, [r.support_size_si_both for r in rows]),
        },
        "converged": all(r.converged for r in rows),
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    return SweepResult(axis, rows, meta)


def _u_row(args):
    p_on, tol_x, ppu = args
    return (float(p_on), u_threshold(p_on, tol_x, points_per_unit=ppu))


def u_curve(p_grid, *, tol_x: float = 1e-4, points_per_unit: int = 32,
            workers: int = 1) -> SweepResult:
    """U(p_on) on the given grid of arrival probabilities."""
    grid = sorted(float(p) for p in p_grid)
    if any(not (0.0 < p <= 1.0) for p in grid):
        raise ValueError("p_on values must lie in (0, 1]")
    started = time.perf_counter()
    rows = _map(_u_row, [(p, tol_x, points_per_unit) for p in grid], workers)
    meta = {
        "axis": "p_on",
        "tolerances": {"tol_x": tol_x, "kkt_tol": 1e-7, "t2_grid": 512},
        "quadrature": {"points_per_unit": points_per_unit, "tail": 10.0},
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    return SweepResult("p_on", rows, meta, UCURVE_COLUMNS)
