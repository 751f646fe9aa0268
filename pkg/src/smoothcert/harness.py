"""Monte Carlo harness checking the closed-form predictions against simulation.

Three experiments, one per headline claim:

* ``run_bound_comparison``: exact vs CLT lower bounds over a (p_A, n) grid,
  including the p_hat = 1 edge where they genuinely part ways.
* ``run_ratio_experiment``: the measured finite-n / infinite-n average-radius
  ratio against the 1 - Theta z / sqrt(n) prediction.
* ``run_accuracy_curves``: certified accuracy as a function of the radius
  threshold at several sample counts, with the z / sqrt(n) drop cap.

Every draw is keyed by (global seed, a role string, point or trial index),
never by loop schedule, so reports are reproducible byte for byte at any
worker count.  Vote
tallies are keyed without the noise scale on purpose: the vote law depends
only on p_A, so sigma values share tallies and the cross-sigma scaling of
every radius statistic is exact rather than statistical.  Sample counts
reuse one stream per point as well, which correlates cells along n and
sharpens ratio estimates.  The largest entry of ``n_list`` plays the role
of the infinite-sample reference.
"""

from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Callable, Sequence, TypeVar

import numpy as np

from ._version import __version__
from .bounds import ConfidenceSpec, ProbEstimate, clt_lower_bound, cp_lower_bound
from .population import (
    EMPIRICAL,
    PIECEWISE,
    PADistribution,
    accuracy_drop_bound,
    load_empirical_csv,
    ratio_theoretical,
)
from .radius import certified_radius
from .rng import CounterStream, binomial, derive_stream_key

__all__ = [
    "SweepGrid",
    "ReportRow",
    "ExperimentReport",
    "run_bound_comparison",
    "run_ratio_experiment",
    "run_accuracy_curves",
    "default_radius_grid",
    "grid_from_dict",
    "grid_to_dict",
]

_DOMAIN_VOTES = 1

_T = TypeVar("_T")
_U = TypeVar("_U")


def _keyed_map(fn: Callable[[_T], _U], items: Sequence[_T], jobs: int) -> list[_U]:
    """Apply ``fn`` to every item, optionally on a thread pool.

    Results always come back in input order, so worker count never leaks
    into anything downstream.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs!r}")
    if jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SweepGrid:
    """Parameter grid for one harness run.

    ``p_list`` feeds the bound comparison (known per-cell p_A); ``dist``
    feeds the population experiments (p_A sampled per point).  At least one
    must be present.
    """

    n_list: tuple[int, ...]
    sigma_list: tuple[float, ...]
    alpha: float
    trials: int = 100
    points_per_cell: int = 2000
    global_seed: int = 0
    p_list: tuple[float, ...] | None = None
    dist: PADistribution | None = None

    def __post_init__(self) -> None:
        if len(self.n_list) == 0:
            raise ValueError("n_list cannot be empty")
        if any(n < 1 for n in self.n_list):
            raise ValueError("every n must be >= 1")
        if len(self.n_list) != len(set(self.n_list)):
            raise ValueError("n_list entries must be distinct")
        if len(self.sigma_list) == 0:
            raise ValueError("sigma_list cannot be empty")
        if any(s <= 0.0 for s in self.sigma_list):
            raise ValueError("every sigma must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials!r}")
        if self.points_per_cell < 1:
            raise ValueError(f"points_per_cell must be >= 1, got {self.points_per_cell!r}")
        if self.p_list is None and self.dist is None:
            raise ValueError("a grid needs p_list or dist")
        if self.p_list is not None:
            if len(self.p_list) == 0:
                raise ValueError("p_list cannot be empty when given")
            if any(not 0.0 <= p <= 1.0 for p in self.p_list):
                raise ValueError("every p in p_list must lie in [0, 1]")

    @property
    def conf(self) -> ConfidenceSpec:
        return ConfidenceSpec(alpha=self.alpha)

    @property
    def reference_n(self) -> int:
        return max(self.n_list)


@dataclass(frozen=True)
class ReportRow:
    """One statistic of one grid cell; ``cell`` is ordered key-value pairs."""

    cell: tuple[tuple[str, float | int], ...]
    statistic: str
    value: float
    stderr: float | None = None

    def cell_dict(self) -> dict[str, float | int]:
        return dict(self.cell)


@dataclass
class ExperimentReport:
    """Harness result: rows plus the metadata needed to reproduce them.

    (cell, statistic) pairs are unique.  ``created_at`` stays None unless a
    caller stamps it, so identical seeds give identical bytes by default.
    """

    rows: list[ReportRow]
    seed: int
    toolkit_version: str = __version__
    created_at: str | None = None

    def __post_init__(self) -> None:
        seen = set()
        for row in self.rows:
            key = (row.cell, row.statistic)
            if key in seen:
                raise ValueError(f"duplicate report row for cell={row.cell} statistic={row.statistic!r}")
            seen.add(key)

    def value(self, statistic: str, **cell: float | int) -> float:
        """Look up one row's value; raises ``KeyError`` when absent."""
        want = dict(cell)
        for row in self.rows:
            if row.statistic == statistic and row.cell_dict() == want:
                return row.value
        raise KeyError(f"no row with statistic={statistic!r} cell={want!r}")

    def to_json_dict(self) -> dict:
        metadata: dict = {"seed": self.seed, "toolkit_version": self.toolkit_version}
        if self.created_at is not None:
            metadata["created_at"] = self.created_at
        return {
            "metadata": metadata,
            "rows": [
                {
                    "cell": row.cell_dict(),
                    "statistic": row.statistic,
                    "value": row.value,
                    "stderr": row.stderr,
                }
                for row in self.rows
            ],
        }

    def write_json(self, fp: IO[str]) -> None:
        json.dump(self.to_json_dict(), fp, indent=2)
        fp.write("\n")

    def write_csv(self, fp: IO[str]) -> None:
        if not self.rows:
            fp.write("statistic,value,stderr\n")
            return
        keys = [k for k, _ in self.rows[0].cell]
        fp.write(",".join([*keys, "statistic", "value", "stderr"]) + "\n")
        for row in self.rows:
            cells = row.cell_dict()
            if list(cells) != keys:
                raise ValueError("rows with differing cell keys cannot share one CSV")
            parts = [_format_cell(cells[k]) for k in keys]
            parts.append(row.statistic)
            parts.append(repr(float(row.value)))
            parts.append("" if row.stderr is None else repr(float(row.stderr)))
            fp.write(",".join(parts) + "\n")

    def write_gnuplot(self, outdir: str, x_key: str | None = None) -> list[str]:
        """Emit one whitespace-separated .dat file per (statistic, series).

        The x axis defaults to ``radius`` when cells carry one, else ``n``.
        Returns the written paths, sorted.
        """
        if not self.rows:
            return []
        keys = [k for k, _ in self.rows[0].cell]
        if x_key is None:
            x_key = "radius" if "radius" in keys else "n"
        if x_key not in keys:
            raise ValueError(f"x_key {x_key!r} is not a cell key ({keys})")
        series: dict[tuple, list[ReportRow]] = {}
        for row in self.rows:
            cells = row.cell_dict()
            label = tuple((k, cells[k]) for k in keys if k != x_key)
            series.setdefault((row.statistic, label), []).append(row)
        os.makedirs(outdir, exist_ok=True)
        written = []
        for (statistic, label), rows in sorted(series.items(), key=lambda kv: repr(kv[0])):
            tag = "_".join(f"{k}{_format_cell(v)}" for k, v in label)
            name = _sanitize(f"{statistic}_{tag}" if tag else statistic) + ".dat"
            path = os.path.join(outdir, name)
            rows = sorted(rows, key=lambda r: r.cell_dict()[x_key])
            with open(path, "w", encoding="utf-8", newline="\n") as fp:
                fp.write(f"# {x_key} value stderr\n")
                for row in rows:
                    se = 0.0 if row.stderr is None else row.stderr
                    fp.write(f"{_format_cell(row.cell_dict()[x_key])} {row.value!r} {se!r}\n")
            written.append(path)
        return sorted(written)


def _format_cell(value: float | int) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "-", name)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def run_bound_comparison(grid: SweepGrid, jobs: int = 1) -> ExperimentReport:
    """Compare exact and CLT lower bounds cell by cell.

    Each (p_A, n) cell draws ``trials`` independent tallies and bounds each
    one both ways.  Emits per-cell means of both bounds, the mean signed gap
    (cp - clt), and the mean absolute gap, all with standard errors.
    """
    if grid.p_list is None:
        raise ValueError("run_bound_comparison needs a grid with p_list")
    conf = grid.conf

    def one_cell(cell_spec: tuple[float, int]) -> tuple[np.ndarray, np.ndarray]:
        p, n = cell_spec
        cp_vals = np.empty(grid.trials)
        clt_vals = np.empty(grid.trials)
        for trial in range(grid.trials):
            key = derive_stream_key(
                grid.global_seed, f"bounds:p={p!r}:n={n}:trial={trial}"
            )
            k = binomial(CounterStream(key, domain=_DOMAIN_VOTES), n, p)
            est = ProbEstimate(successes=k, n=n)
            cp_vals[trial] = cp_lower_bound(est, conf)
            clt_vals[trial] = clt_lower_bound(est, conf)
        return cp_vals, clt_vals

    cells = [(p, n) for p in grid.p_list for n in grid.n_list]
    results = _keyed_map(one_cell, cells, jobs)
    rows: list[ReportRow] = []
    for (p, n), (cp_vals, clt_vals) in zip(cells, results):
        cell = (("p_a", float(p)), ("n", int(n)))
        for name, values in (
            ("cp_mean", cp_vals),
            ("clt_mean", clt_vals),
            ("gap_mean", cp_vals - clt_vals),
            ("abs_gap_mean", np.abs(cp_vals - clt_vals)),
        ):
            mean, se = _mean_se(values)
            rows.append(ReportRow(cell=cell, statistic=name, value=mean, stderr=se))
    return ExperimentReport(rows=rows, seed=grid.global_seed)


def _population_radii(
    grid: SweepGrid, role: str, jobs: int = 1
) -> tuple[np.ndarray, dict[int, np.ndarray], dict[int, np.ndarray]]:
    """Sample p_A per point, then bounds and unit-sigma radii per (point, n).

    One vote stream per point, shared across every n (smaller counts read a
    prefix of larger ones) and across every sigma (tallies do not depend on
    the noise scale at all).  Radii are zero wherever the bound abstains.
    """
    conf = grid.conf
    count = grid.points_per_cell
    p_vals = grid.dist.sample(count, derive_stream_key(grid.global_seed, f"{role}:points"))
    keys = [derive_stream_key(grid.global_seed, f"{role}:point{i}") for i in range(count)]

    def one_n(n: int) -> tuple[np.ndarray, np.ndarray]:
        b = np.empty(count)
        r = np.empty(count)
        for i in range(count):
            k = binomial(CounterStream(keys[i], domain=_DOMAIN_VOTES), n, float(p_vals[i]))
            b[i] = cp_lower_bound(ProbEstimate(successes=k, n=n), conf)
            r[i] = certified_radius(b[i], 1.0)
        return b, r

    results = _keyed_map(one_n, list(grid.n_list), jobs)
    bounds = {n: b for n, (b, _) in zip(grid.n_list, results)}
    radii = {n: r for n, (_, r) in zip(grid.n_list, results)}
    return p_vals, bounds, radii


def run_ratio_experiment(grid: SweepGrid, jobs: int = 1) -> ExperimentReport:
    """Average certified radius per (n, sigma), and its ratio to the reference n.

    The reference is the largest n in the grid.  For piecewise populations
    the 1 - Theta z / sqrt(n) prediction is emitted beside the measurement,
    both against the infinite-sample limit and renormalized against the
    reference cell (the latter only where the prediction stays positive).
    """
    if grid.dist is None:
        raise ValueError("run_ratio_experiment needs a grid with dist")
    conf = grid.conf
    _, _, radii = _population_radii(grid, "ratio", jobs)
    ref_n = grid.reference_n
    ref = radii[ref_n]
    ref_mean = float(ref.mean())
    rows: list[ReportRow] = []
    for n in grid.n_list:
        r = radii[n]
        for sigma in grid.sigma_list:
            cell = (("n", int(n)), ("sigma", float(sigma)))
            mean, se = _mean_se(sigma * r)
            rows.append(ReportRow(cell=cell, statistic="avg_radius_mean", value=mean, stderr=se))
            if ref_mean > 0.0:
                ratio = float(r.mean()) / ref_mean
                # paired delta-method error; sigma cancels from the ratio
                resid = r - ratio * ref
                if resid.size > 1:
                    ratio_se = float(resid.std(ddof=1) / math.sqrt(resid.size)) / ref_mean
                else:
                    ratio_se = 0.0
                rows.append(
                    ReportRow(cell=cell, statistic="ratio_measured", value=ratio, stderr=ratio_se)
                )
            if grid.dist.kind == PIECEWISE:
                predicted = ratio_theoretical(conf, n, grid.dist.beta)
                rows.append(
                    ReportRow(cell=cell, statistic="ratio_theory_vs_limit", value=predicted, stderr=None)
                )
                predicted_ref = ratio_theoretical(conf, ref_n, grid.dist.beta)
                if predicted_ref > 0.0 and predicted > 0.0:
                    rows.append(
                        ReportRow(
                            cell=cell,
                            statistic="ratio_theory_vs_ref",
                            value=predicted / predicted_ref,
                            stderr=None,
                        )
                    )
    return ExperimentReport(rows=rows, seed=grid.global_seed)


def default_radius_grid(sigma: float, points: int = 20) -> tuple[float, ...]:
    """Evenly spaced thresholds from 0 to the radius certified by p_A = 0.999."""
    from .bounds import normal_quantile

    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if points < 2:
        raise ValueError(f"points must be >= 2, got {points!r}")
    top = sigma * normal_quantile(0.999)
    return tuple(float(x) for x in np.linspace(0.0, top, points))


def run_accuracy_curves(
    grid: SweepGrid, radius_grid: tuple[float, ...] | None = None, jobs: int = 1
) -> ExperimentReport:
    """Certified accuracy versus radius threshold, per (n, sigma).

    A point counts toward accuracy at threshold R0 when its bound certifies
    (p_lower >= 1/2) and the certified radius reaches R0.  Emits the
    accuracy per cell, the paired drop against the reference n, and the
    distribution-free drop cap z / sqrt(n).
    """
    if grid.dist is None:
        raise ValueError("run_accuracy_curves needs a grid with dist")
    if radius_grid is None:
        radius_grid = default_radius_grid(max(grid.sigma_list))
    if len(radius_grid) == 0:
        raise ValueError("radius_grid cannot be empty")
    if any(r < 0.0 for r in radius_grid):
        raise ValueError("radius thresholds must be >= 0")
    if any(b < a for a, b in zip(radius_grid, radius_grid[1:])):
        raise ValueError("radius_grid must be sorted ascending")
    conf = grid.conf
    _, bounds, radii = _population_radii(grid, "accuracy", jobs)
    # certification is p_lower >= 1/2 (a bound exactly at 1/2 certifies
    # radius zero, which still counts at threshold zero)
    certified = {n: bounds[n] >= 0.5 for n in grid.n_list}
    ref_n = grid.reference_n
    rows: list[ReportRow] = []
    count = grid.points_per_cell
    for n in grid.n_list:
        drop_cap = accuracy_drop_bound(conf, n)
        for sigma in grid.sigma_list:
            scaled = sigma * radii[n]
            scaled_ref = sigma * radii[ref_n]
            for r0 in radius_grid:
                cell = (("n", int(n)), ("sigma", float(sigma)), ("radius", float(r0)))
                hits = certified[n] & (scaled >= r0)
                acc = float(hits.mean())
                se = math.sqrt(acc * (1.0 - acc) / count)
                rows.append(
                    ReportRow(cell=cell, statistic="certified_accuracy", value=acc, stderr=se)
                )
                if n != ref_n:
                    ref_hits = certified[ref_n] & (scaled_ref >= r0)
                    diff = ref_hits.astype(np.float64) - hits.astype(np.float64)
                    mean, dse = _mean_se(diff)
                    rows.append(
                        ReportRow(
                            cell=cell, statistic="accuracy_drop_vs_ref", value=mean, stderr=dse
                        )
                    )
                rows.append(
                    ReportRow(cell=cell, statistic="accuracy_drop_bound", value=drop_cap, stderr=None)
                )
    return ExperimentReport(rows=rows, seed=grid.global_seed)


def grid_to_dict(grid: SweepGrid) -> dict:
    """JSON-ready form of a grid; inverse of ``grid_from_dict``."""
    out: dict = {
        "n_list": list(grid.n_list),
        "sigma_list": list(grid.sigma_list),
        "alpha": grid.alpha,
        "trials": grid.trials,
        "points_per_cell": grid.points_per_cell,
        "global_seed": grid.global_seed,
    }
    if grid.p_list is not None:
        out["p_list"] = list(grid.p_list)
    if grid.dist is not None:
        dist = grid.dist
        if dist.kind == PIECEWISE:
            out["dist"] = {
                "kind": PIECEWISE,
                "kappa1": dist.kappa1,
                "kappa2": dist.kappa2,
                "beta": dist.beta,
            }
        else:
            out["dist"] = {
                "kind": EMPIRICAL,
                "bin_edges": list(dist.bin_edges),
                "masses": list(dist.masses),
            }
    return out


_GRID_KEYS = {
    "n_list",
    "sigma_list",
    "alpha",
    "trials",
    "points_per_cell",
    "global_seed",
    "p_list",
    "dist",
}


def grid_from_dict(payload: dict, base_dir: str | None = None) -> SweepGrid:
    """Build a grid from parsed JSON.

    An empirical dist may be given inline (``bin_edges`` + ``masses``) or by
    ``path`` to a histogram CSV, resolved against ``base_dir``.  Unknown
    keys are rejected so typos fail loudly.
    """
    unknown = set(payload) - _GRID_KEYS
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    for required in ("n_list", "sigma_list", "alpha"):
        if required not in payload:
            raise ValueError(f"grid file is missing {required!r}")
    dist = None
    if payload.get("dist") is not None:
        spec = dict(payload["dist"])
        kind = spec.pop("kind", None)
        if kind == PIECEWISE:
            unknown = set(spec) - {"kappa1", "kappa2", "beta"}
            if unknown:
                raise ValueError(f"unknown piecewise dist keys: {sorted(unknown)}")
            dist = PADistribution.piecewise(
                spec.get("kappa1", 0.0), spec.get("kappa2", 0.0), spec["beta"]
            )
        elif kind == EMPIRICAL:
            if "path" in spec:
                unknown = set(spec) - {"path"}
                if unknown:
                    raise ValueError(f"unknown empirical dist keys: {sorted(unknown)}")
                path = spec["path"]
                if base_dir is not None and not os.path.isabs(path):
                    path = os.path.join(base_dir, path)
                dist = load_empirical_csv(path)
            else:
                unknown = set(spec) - {"bin_edges", "masses"}
                if unknown:
                    raise ValueError(f"unknown empirical dist keys: {sorted(unknown)}")
                dist = PADistribution.empirical(spec["bin_edges"], spec["masses"])
        else:
            raise ValueError(f"unknown dist kind {kind!r}")
    kwargs: dict = {
        "n_list": tuple(int(n) for n in payload["n_list"]),
        "sigma_list": tuple(float(s) for s in payload["sigma_list"]),
        "alpha": float(payload["alpha"]),
        "dist": dist,
    }
    if payload.get("p_list") is not None:
        kwargs["p_list"] = tuple(float(p) for p in payload["p_list"])
    for name in ("trials", "points_per_cell", "global_seed"):
        if name in payload:
            kwargs[name] = int(payload[name])
    return SweepGrid(**kwargs)
