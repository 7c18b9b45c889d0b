"""Synthetic traces, prediction noise, adversarial pairs, and the batch experiment runner.

Randomness is PCG64 seeded through numpy SeedSequence, so every trace is a
pure function of its seed material and reruns are machine-independent.  The
experiment runner derives per-trial streams from one master seed:

    instance stream     SeedSequence([master, 0, dist_index, seed])
    perturbation stream SeedSequence([master, 1, dist_index, seed, r_index])
"""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np

from dap.core import FormatError, Instance
from dap.offline import optimal_value
from dap.policies import (
    AdaptiveBudgetPolicy,
    BlindPolicy,
    BudgetPolicy,
    GreedyPolicy,
    PrimalDualPolicy,
    RobustPolicy,
    run_policy,
)

CSV_HEADER = ("distribution", "r", "seed", "algorithm", "parameter", "cost", "opt", "ratio")

#: (beta, lambda) pairs giving the primal-dual baseline and the robust policy
#: the same consistency ratio, used as the comparison axes of the figures
MATCHED_PAIRS: tuple[tuple[float, float], ...] = ((1.0, 0.58), (0.6, 0.32), (0.2, 0.1))

DEFAULT_R_GRID: tuple[float, ...] = tuple(round(i / 10, 1) for i in range(11))

DEFAULT_ALGORITHMS: tuple[tuple[str, float | None], ...] = (
    ("greedy", None),
    ("blind", None),
    ("pdla", 1.0),
    ("pdla", 0.6),
    ("pdla", 0.2),
    ("robust", 0.58),
    ("robust", 0.32),
    ("robust", 0.1),
)


@dataclass(frozen=True)
class DistributionSpec:
    """Per-step demand distribution: poisson(mean), pareto(shape), iterated_poisson(init mean)."""

    name: str
    param: float

    _NAMES = ("poisson", "pareto", "iterated_poisson")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise ValueError(f"unknown distribution {self.name!r}; expected one of {self._NAMES}")
        if not (math.isfinite(self.param) and self.param > 0):
            raise ValueError(f"distribution parameter must be positive, got {self.param}")

    @property
    def label(self) -> str:
        return f"{self.name}({self.param:g})"

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        m = re.fullmatch(r"\s*([a-z_]+)\s*\(\s*([0-9.eE+-]+)\s*\)\s*", text)
        if not m:
            raise FormatError(f"bad distribution spec {text!r}; expected e.g. 'poisson(1)'")
        return cls(m.group(1), float(m.group(2)))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _sample_block(rng: np.random.Generator, dist: DistributionSpec, size: int) -> np.ndarray:
    if dist.name == "poisson":
        return rng.poisson(dist.param, size).astype(np.float64)
    if dist.name == "pareto":
        return rng.pareto(dist.param, size) + 1.0
    # iterated poisson: each step's mean is the previous sample, restarting at
    # the initial mean whenever a sample comes out 0 (else the chain would
    # freeze at 0 forever)
    out = np.empty(size)
    mean = dist.param
    for i in range(size):
        v = float(rng.poisson(mean))
        out[i] = v
        mean = v if v > 0 else dist.param
    return out


def generate_instance(dist: DistributionSpec, d: float, horizon: int, seed) -> Instance:
    """Deterministic synthetic trace; bitwise-identical per (dist, horizon, seed)."""
    rng = _rng(seed)
    return Instance(d, tuple(_sample_block(rng, dist, horizon)))


def perturb_instance(instance: Instance, r: float, dist: DistributionSpec, seed) -> Instance:
    """Noisy copy: per step, zero out with probability r, then add fresh noise with probability r.

    The two coin flips are independent and applied in that order; noise values
    are pre-drawn per step from the given distribution.
    """
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"perturbation probability must be in [0, 1], got {r}")
    rng = _rng(seed)
    n = instance.horizon
    u_zero = rng.random(n)
    u_add = rng.random(n)
    noise = _sample_block(rng, dist, n)
    out = list(instance.demands)
    for i in range(n):
        if u_zero[i] < r:
            out[i] = 0.0
        if u_add[i] < r:
            out[i] += noise[i]
    return Instance(instance.d, tuple(out))


def adversarial_pair(lam: float, epsilon: float, probe_factory, d: float = 100.0,
                     spike: float | None = None) -> tuple[Instance, Instance]:
    """Instance/prediction pair realizing the deterministic lower-bound construction.

    The prediction is a single step of volume epsilon*d.  The probe policy is
    played against that lone demand followed by silence; if it acks while its
    accrued delay is still below lam - epsilon, a spike lands one step after
    the ack, otherwise the stream simply stays silent.
    """
    if lam <= 0 or epsilon <= 0 or epsilon >= lam:
        raise ValueError("need 0 < epsilon < lambda")
    predicted = Instance(d, (epsilon * d,))
    horizon = int(math.ceil((lam - epsilon) / epsilon)) + 2
    probe = probe_factory(predicted)
    first_ack = None
    for t in range(1, horizon + 1):
        p = epsilon * d if t == 1 else 0.0
        if probe.step(t, p).ack:
            first_ack = t
            break
    if first_ack is not None and (first_ack - 1) * epsilon < lam - epsilon:
        demands = [epsilon * d] + [0.0] * first_ack
        demands[first_ack] = 2.0 * d if spike is None else spike
        return Instance(d, tuple(demands)), predicted
    return Instance(d, (epsilon * d,) + (0.0,) * (horizon - 1)), predicted


@dataclass(frozen=True)
class ExperimentConfig:
    distributions: tuple[DistributionSpec, ...]
    d: float = 100.0
    horizon: int = 1000
    r_grid: tuple[float, ...] = DEFAULT_R_GRID
    seeds: int = 5
    algorithms: tuple[tuple[str, float | None], ...] = DEFAULT_ALGORITHMS
    master_seed: int = 0
    output: str | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.distributions:
            raise ValueError("need at least one distribution")
        if any(not 0.0 <= r <= 1.0 for r in self.r_grid):
            raise ValueError("perturbation probabilities must lie in [0, 1]")
        if self.seeds < 1:
            raise ValueError("need at least one seed")


@dataclass(frozen=True)
class TrialRecord:
    distribution: str
    r: float
    seed: int
    algorithm: str
    parameter: str
    cost: float
    opt: float
    ratio: float

    @property
    def flagged(self) -> bool:
        """True when opt = 0 but the policy paid something; excluded from means."""
        return math.isnan(self.ratio)


def _ratio(cost: float, opt: float) -> float:
    if opt > 0.0:
        return cost / opt
    return 1.0 if cost == 0.0 else float("nan")


def build_policy(name: str, param: float | None, predicted: Instance, d: float):
    if name == "greedy":
        return GreedyPolicy(d)
    if name == "blind":
        return BlindPolicy(predicted)
    if name == "pdla":
        return PrimalDualPolicy(predicted, 1.0 if param is None else param)
    if name == "pbb":
        return BudgetPolicy(predicted, 0.1 if param is None else param)
    if name == "apb":
        return AdaptiveBudgetPolicy(predicted, 0.1 if param is None else param)
    if name == "robust":
        return RobustPolicy(predicted, 0.1 if param is None else param)
    raise ValueError(f"unknown algorithm {name!r}")


def _param_str(param: float | None) -> str:
    return "" if param is None else f"{param:g}"


def run_trial(cfg: ExperimentConfig, dist_index: int, r_index: int, seed: int) -> list[TrialRecord]:
    dist = cfg.distributions[dist_index]
    r = cfg.r_grid[r_index]
    instance = generate_instance(
        dist, cfg.d, cfg.horizon, np.random.SeedSequence([cfg.master_seed, 0, dist_index, seed])
    )
    predicted = perturb_instance(
        instance, r, dist, np.random.SeedSequence([cfg.master_seed, 1, dist_index, seed, r_index])
    )
    opt = optimal_value(instance)
    rows = [TrialRecord(dist.label, r, seed, "opt", "", opt, opt, _ratio(opt, opt))]
    for name, param in cfg.algorithms:
        run = run_policy(instance, build_policy(name, param, predicted, cfg.d))
        cost = run.cost.total
        rows.append(TrialRecord(dist.label, r, seed, name, _param_str(param), cost, opt, _ratio(cost, opt)))
    return rows


def _trial_worker(args) -> list[TrialRecord]:
    return run_trial(*args)


def _record_key(row: TrialRecord):
    return (row.distribution, row.r, row.seed, row.algorithm, row.parameter)


def run_experiment(cfg: ExperimentConfig) -> list[TrialRecord]:
    """Run every (distribution, r, seed) trial; deterministic per config.

    Trials are independent and may fan out over worker processes; rows are
    canonically sorted before any output is written.
    """
    keys = [
        (cfg, di, ri, seed)
        for di in range(len(cfg.distributions))
        for ri in range(len(cfg.r_grid))
        for seed in range(cfg.seeds)
    ]
    if cfg.workers > 1:
        with Pool(cfg.workers) as pool:
            chunks = pool.map(_trial_worker, keys)
    else:
        chunks = [run_trial(*key) for key in keys]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=_record_key)
    if cfg.output:
        write_trials(cfg.output, rows)
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trials(path: str | os.PathLike, rows: list[TrialRecord]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(
                    [row.distribution, _fmt(row.r), row.seed, row.algorithm, row.parameter,
                     _fmt(row.cost), _fmt(row.opt), _fmt(row.ratio)]
                )
    except OSError as exc:
        raise OSError(f"cannot write trial CSV {path}: {exc}") from exc


def read_trials(path: str | os.PathLike) -> list[TrialRecord]:
    rows: list[TrialRecord] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise FormatError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(CSV_HEADER):
                raise FormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, found {len(rec)}")
            try:
                rows.append(
                    TrialRecord(rec[0], float(rec[1]), int(rec[2]), rec[3], rec[4],
                                float(rec[5]), float(rec[6]), float(rec[7]))
                )
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return rows


def aggregate_ratios(rows: list[TrialRecord]) -> dict[tuple[str, float, str, str], tuple[float, float, int]]:
    """Mean ratio and standard error per (distribution, r, algorithm, parameter)."""
    groups: dict[tuple[str, float, str, str], list[float]] = {}
    for row in rows:
        if row.flagged:
            continue
        groups.setdefault((row.distribution, row.r, row.algorithm, row.parameter), []).append(row.ratio)
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals)
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out[key] = (float(arr.mean()), stderr, len(arr))
    return out


FIGURE_DATA_HEADER = ("r", "algorithm", "mean_ratio", "stderr")


def emit_plots(csv_path: str | os.PathLike, out_dir: str | os.PathLike,
               pairs: tuple[tuple[float, float], ...] = MATCHED_PAIRS, render: bool = True) -> list[str]:
    """Write one plot-ready data file per (distribution, matched pair), plus a render script.

    Returns the paths written.  With render=True the SVG figures are produced
    immediately as well.
    """
    rows = read_trials(csv_path)
    stats = aggregate_ratios(rows)
    out_dir = str(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    distributions = sorted({row.distribution for row in rows})
    r_values = sorted({row.r for row in rows})
    written: list[str] = []
    for dist in distributions:
        for beta, lam in pairs:
            wanted = [
                ("greedy", ""),
                ("blind", ""),
                ("pdla", f"{beta:g}"),
                ("apb", f"{lam:g}"),
                ("robust", f"{lam:g}"),
            ]
            data_rows = []
            for r in r_values:
                for name, param in wanted:
                    hit = stats.get((dist, r, name, param))
                    if hit is None:
                        continue
                    label = name if not param else f"{name}({param})"
                    data_rows.append((r, label, hit[0], hit[1]))
            if not data_rows:
                continue
            slug = re.sub(r"[^a-z0-9]+", "_", dist.lower()).strip("_")
            path = os.path.join(out_dir, f"fig_{slug}_beta{beta:g}_lambda{lam:g}.csv")
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(FIGURE_DATA_HEADER)
                for rec in data_rows:
                    writer.writerow([_fmt(rec[0]), rec[1], _fmt(rec[2]), _fmt(rec[3])])
            written.append(path)
    script = os.path.join(out_dir, "render_figures.py")
    with open(script, "w") as fh:
        fh.write(_RENDER_SCRIPT)
    written.append(script)
    if render:
        written.extend(render_figures(out_dir))
    return written


def render_figures(out_dir: str | os.PathLike) -> list[str]:
    """Render every fig_*.csv in a directory to an SVG next to it."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out: list[str] = []
    out_dir = str(out_dir)
    for name in sorted(os.listdir(out_dir)):
        if not (name.startswith("fig_") and name.endswith(".csv")):
            continue
        path = os.path.join(out_dir, name)
        series: dict[str, list[tuple[float, float, float]]] = {}
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for rec in reader:
                series.setdefault(rec[1], []).append((float(rec[0]), float(rec[2]), float(rec[3])))
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for label, pts in series.items():
            pts.sort()
            rs = [p[0] for p in pts]
            means = [p[1] for p in pts]
            errs = [p[2] for p in pts]
            ax.errorbar(rs, means, yerr=errs, marker="o", markersize=3, capsize=2, label=label)
        ax.set_xlabel("perturbation probability r")
        ax.set_ylabel("mean cost / opt")
        ax.set_title(name[4:-4].replace("_", " "))
        ax.legend(fontsize=7)
        fig.tight_layout()
        svg = path[:-4] + ".svg"
        fig.savefig(svg)
        plt.close(fig)
        out.append(svg)
    return out


_RENDER_SCRIPT = '''#!/usr/bin/env python3
"""Render the fig_*.csv files in this directory to SVG."""

from pathlib import Path

from dap.harness import render_figures

if __name__ == "__main__":
    for path in render_figures(Path(__file__).resolve().parent):
        print(path)
'''


def parse_experiment_config(text: str, source: str = "<config>") -> dict:
    """Parse 'key = value' lines into ExperimentConfig keyword arguments."""
    kwargs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key == "distributions":
                kwargs["distributions"] = tuple(
                    DistributionSpec.parse(tok) for tok in value.split(",") if tok.strip()
                )
            elif key == "d":
                kwargs["d"] = float(value)
            elif key in ("T", "horizon"):
                kwargs["horizon"] = int(value)
            elif key == "r_grid":
                kwargs["r_grid"] = tuple(float(tok) for tok in value.split(",") if tok.strip())
            elif key == "seeds":
                kwargs["seeds"] = int(value)
            elif key == "algorithms":
                algs = []
                for tok in value.split(","):
                    tok = tok.strip()
                    if not tok:
                        continue
                    if ":" in tok:
                        name, param = tok.split(":", 1)
                        algs.append((name.strip(), float(param)))
                    else:
                        algs.append((tok, None))
                kwargs["algorithms"] = tuple(algs)
            elif key == "master_seed":
                kwargs["master_seed"] = int(value)
            elif key == "output":
                kwargs["output"] = value
            elif key == "workers":
                kwargs["workers"] = int(value)
            else:
                raise FormatError(f"{source}:{lineno}: unknown config key {key!r}")
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: {exc}") from None
    return kwargs
