"""Seeded experiment runs, on-disk traces and summaries, lemma checks, plots."""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .bandit import ALGORITHMS, AlgoConfig, RunTrace, run
from .cover import constants
from .gp import dense_information_gain
from .kernel import KernelSpec
from .testbed import BENCHMARKS, Problem, benchmark_problem, problem_from_manifest, synthetic_problem

log = logging.getLogger(__name__)

OUT_ENV = "PIGPUCB_OUT"
DEFAULT_HORIZONS = (500, 1000, 2000, 4000)


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "results"))


@dataclass
class ExperimentConfig:
    algorithm: str = "pi-gp-ucb"
    problem: str = "synthetic"
    dim: int = 1
    nu: float = 1.5
    ell: float = 0.2
    horizon: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    delta: float = 0.1
    alpha: float | None = 1.0
    rkhs_norm: float | None = None
    noise: float | None = None
    grid: int = 30
    initial_cover: str = "grid"
    full_argmax: bool = False
    jobs: int = 1
    out: Path = field(default_factory=default_out)
    name: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.problem != "synthetic" and self.problem not in BENCHMARKS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.problem != "synthetic":
            self.dim = 2
        if not self.seeds:
            raise ValueError("seed list must not be empty")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.seeds = [int(s) for s in self.seeds]
        self.out = Path(self.out)
        if not self.name:
            tag = f"d{self.dim}" if self.problem == "synthetic" else self.problem
            self.name = f"{tag}-T{self.horizon}"

    @property
    def run_dir(self) -> Path:
        return self.out / self.name / self.algorithm


def parse_seeds(text) -> list:
    """``"0,1,2"``, ``"0-4"`` or a mix of both."""
    if isinstance(text, (list, tuple)):
        return [int(s) for s in text]
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


_FIELD_TYPES = {
    "algorithm": str, "problem": str, "dim": int, "nu": float, "ell": float, "horizon": int,
    "seeds": parse_seeds, "delta": float, "alpha": float, "rkhs_norm": float, "noise": float,
    "grid": int, "initial_cover": str, "jobs": int, "out": Path, "name": str,
    "full_argmax": lambda v: str(v).strip().lower() in ("1", "true", "yes", "on"),
}


def load_config(path) -> dict:
    """Read a ``key = value`` config file; every section is flattened into one mapping."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown config key {key!r} in [{section}]")
            if key == "alpha" and raw.strip().lower() in ("default", "none"):
                values[key] = None
            else:
                values[key] = _FIELD_TYPES[key](raw)
    return values


def make_problem(cfg: ExperimentConfig, seed: int) -> Problem:
    if cfg.problem == "synthetic":
        noise = 1.0 if cfg.noise is None else cfg.noise
        return synthetic_problem(cfg.dim, cfg.nu, cfg.ell, seed=seed, g=cfg.grid, noise=noise)
    noise = 0.1 if cfg.noise is None else cfg.noise
    return benchmark_problem(cfg.problem, g=cfg.grid, noise=noise)


def algo_config(cfg: ExperimentConfig, problem: Problem, seed: int) -> AlgoConfig:
    B = problem.B if cfg.rkhs_norm is None else cfg.rkhs_norm
    return AlgoConfig(B=B, L=problem.noise.L, delta=cfg.delta, T=cfg.horizon, alpha=cfg.alpha,
                      seed=seed, nu=cfg.nu, ell=cfg.ell, initial_cover=cfg.initial_cover,
                      full_argmax=cfg.full_argmax)


def run_seed(cfg: ExperimentConfig, seed: int):
    problem = make_problem(cfg, seed)
    return run(cfg.algorithm, algo_config(cfg, problem, seed), problem), problem


# -- trace files ---------------------------------------------------------------------

def trace_header(dim: int) -> list:
    return ["t", *[f"x{i}" for i in range(dim)], "y", "regret", "ucb", "element_id", "n_splits"]


def write_trace_csv(trace: RunTrace, path) -> None:
    """One row per step.  Wall-clock lives in a separate timing file so traces stay reproducible."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(trace.dim))
        for i in range(trace.steps):
            x = trace.arms[trace.arm[i]]
            w.writerow([i + 1, *[repr(float(v)) for v in x], repr(float(trace.y[i])),
                        repr(float(trace.regret[i])), repr(float(trace.ucb[i])),
                        int(trace.element_id[i]), int(trace.n_splits[i])])


def write_timing_csv(trace: RunTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "wall_clock_s"])
        for i in range(trace.steps):
            w.writerow([i + 1, repr(float(trace.wall_clock[i]))])


def read_trace_csv(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def read_timing_csv(path) -> np.ndarray:
    return np.atleast_1d(np.genfromtxt(path, delimiter=",", names=True)["wall_clock_s"])


# -- experiments ---------------------------------------------------------------------

def _run_and_write(cfg: ExperimentConfig, seed: int) -> dict:
    trace, problem = run_seed(cfg, seed)
    d = cfg.run_dir
    write_trace_csv(trace, d / f"trace_seed{seed}.csv")
    write_timing_csv(trace, d / f"timing_seed{seed}.csv")
    (d / f"problem_seed{seed}.json").write_text(problem.to_json())
    info = trace.summary()
    info["uniform_expected_regret"] = cfg.horizon * problem.mean_gap
    (d / f"run_seed{seed}.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    return info


def _percentiles(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"median": None, "lo": None, "hi": None}
    return {"median": float(np.median(v)), "lo": float(np.percentile(v, 2.5)),
            "hi": float(np.percentile(v, 97.5))}


def regret_fraction(R_T: float, uniform_regret: float):
    """Regret as a fraction of the expected regret of uniform arm pulls; None when undefined."""
    if uniform_regret <= 0:
        return None
    return R_T / uniform_regret


def summarize_dir(run_dir) -> dict:
    """Experiment summary recomputed from the trace, timing and problem files alone."""
    run_dir = Path(run_dir)
    per_seed = []
    for trace_path in sorted(run_dir.glob("trace_seed*.csv"), key=lambda p: int(p.stem[10:])):
        seed = int(trace_path.stem[len("trace_seed"):])
        tr = read_trace_csv(trace_path)
        problem = problem_from_manifest((run_dir / f"problem_seed{seed}.json").read_text())
        T = len(tr["t"])
        R_T = float(tr["regret"].sum())
        uniform = T * problem.mean_gap
        row = {"seed": seed, "T": T, "R_T": R_T, "uniform_expected_regret": uniform,
               "regret_fraction": regret_fraction(R_T, uniform)}
        timing = run_dir / f"timing_seed{seed}.csv"
        if timing.exists():
            wc = read_timing_csv(timing)
            row["wall_clock_total_s"] = float(wc.sum())
            row["wall_clock_last_quarter_mean_s"] = float(wc[3 * T // 4:].mean())
        extra = run_dir / f"run_seed{seed}.json"
        if extra.exists():
            info = json.loads(extra.read_text())
            for key in ("history_count", "max_element_gamma", "capacity_violations",
                        "validity_pairs", "validity_violations", "diagnostics"):
                row[key] = info.get(key)
        per_seed.append(row)
    fractions = [r["regret_fraction"] for r in per_seed if r["regret_fraction"] is not None]
    summary = {
        "n_runs": len(per_seed),
        "cumulative_regret": _percentiles([r["R_T"] for r in per_seed]),
        "regret_fraction": _percentiles(fractions),
        "regret_fraction_defined": len(fractions) == len(per_seed),
        "wall_clock_total_s": _percentiles([r.get("wall_clock_total_s", np.nan) for r in per_seed
                                            if "wall_clock_total_s" in r]),
        "runs": per_seed,
    }
    return summary


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every seed, write one trace per seed and one summary; failed seeds are reported."""
    cfg.run_dir.mkdir(parents=True, exist_ok=True)
    failures = {}
    if cfg.jobs > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {s: pool.submit(_run_and_write, cfg, s) for s in cfg.seeds}
            for s, fut in futures.items():
                try:
                    fut.result()
                except Exception as exc:  # a failed seed must not abort its siblings
                    failures[s] = repr(exc)
    else:
        for s in cfg.seeds:
            try:
                _run_and_write(cfg, s)
            except Exception as exc:
                failures[s] = repr(exc)
    for s, err in failures.items():
        log.error("seed %s failed: %s", s, err)
    summary = summarize_dir(cfg.run_dir)
    summary["config"] = {k: (str(v) if isinstance(v, Path) else v) for k, v in asdict(cfg).items()}
    summary["failures"] = {str(k): v for k, v in failures.items()}
    (cfg.run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary


# -- lemma verification --------------------------------------------------------------

def loglog_slope(xs, ys) -> float:
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def _lemma_run(cfg: ExperimentConfig, T: int, seed: int, global_gain_max_T: int) -> dict:
    c = replace(cfg, algorithm="pi-gp-ucb", horizon=T, seeds=[seed], name=cfg.name)
    trace, problem = run_seed(c, seed)
    row = {
        "T": T, "seed": seed, "R_T": trace.R_T,
        "history_count": int(trace.history_count[-1]),
        # splits at the last step only create elements for step T + 1
        "n_splits": int(trace.n_splits[: trace.steps - 1].sum()),
        "initial_cover_size": trace.initial_size,
        "max_element_gamma": trace.max_element_gamma,
        "capacity_violations": trace.capacity_violations(),
        "capacity_violations_literal": trace.capacity_violations(literal=True),
        "cover": trace.cover_lines,
    }
    if T <= global_gain_max_T:
        kernel = KernelSpec(nu=cfg.nu, ell=cfg.ell, dim=problem.dim)
        played = problem.arms[trace.arm[: trace.steps]]
        row["global_gamma"] = dense_information_gain(kernel, trace.cfg.alpha, played)
    return row


def verify_lemmas(cfg: ExperimentConfig, horizons=DEFAULT_HORIZONS, global_gain_max_T: int = 2000,
                  write: bool = True) -> dict:
    """Empirical checks of the cover-size, per-element gain, capacity and regret scalings."""
    horizons = sorted(int(T) for T in horizons)
    jobs = [(T, s) for T in horizons for s in cfg.seeds]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_lemma_run, [cfg] * len(jobs), *zip(*jobs),
                                 [global_gain_max_T] * len(jobs)))
    else:
        rows = [_lemma_run(cfg, T, s, global_gain_max_T) for T, s in jobs]

    c = constants(cfg.dim, cfg.nu)
    by_T = {T: [r for r in rows if r["T"] == T] for T in horizons}
    med = lambda T, key: float(np.median([r[key] for r in by_T[T]]))  # noqa: E731
    report = {"dim": cfg.dim, "nu": cfg.nu, "b": c.b, "q": c.q, "horizons": horizons,
              "seeds": list(cfg.seeds), "complete": len(horizons) >= 2}

    # log T log log T is only positive from T = 3 on
    ratios = {T: med(T, "max_element_gamma") / (math.log(T) * math.log(math.log(T)))
              for T in horizons if T >= 3}
    late = [T for T in ratios if T >= 1000]
    gain_ok = all(ratios[b] <= 1.2 * ratios[a] for a, b in zip(late, late[1:]))
    report["element_gain"] = {"ratio_by_T": {str(T): r for T, r in ratios.items()},
                              "slack": 0.2, "pass": gain_ok if len(late) >= 2 else None}

    sizes = {T: med(T, "history_count") for T in horizons}
    report["splits"] = {str(T): med(T, "n_splits") for T in horizons}
    size_slope = loglog_slope(horizons, [sizes[T] for T in horizons]) if len(horizons) >= 2 else None
    report["cover_size"] = {"median_by_T": {str(T): v for T, v in sizes.items()}, "slope": size_slope,
                            "limit": c.q + 0.1,
                            "pass": None if size_slope is None else size_slope <= c.q + 0.1}

    report["capacity"] = {
        "violations": int(sum(r["capacity_violations"] for r in rows)),
        "violations_literal": int(sum(r["capacity_violations_literal"] for r in rows)),
    }
    report["capacity"]["pass"] = report["capacity"]["violations"] == 0

    gT = [T for T in horizons if T <= global_gain_max_T]
    if len(gT) >= 2:
        gains = {T: med(T, "global_gamma") for T in gT}
        g_slope = loglog_slope(gT, [gains[T] for T in gT])
        report["global_gain"] = {"median_by_T": {str(T): v for T, v in gains.items()},
                                 "slope": g_slope, "limit": c.q + 0.15, "pass": g_slope <= c.q + 0.15}
    else:
        report["global_gain"] = {"pass": None}
        report["complete"] = False

    d, nu = cfg.dim, cfg.nu
    exponent = (d * (2 * d + 3) + 2 * nu) / (d * (2 * d + 4) + 4 * nu)
    regrets = {T: med(T, "R_T") for T in horizons}
    r_slope = loglog_slope(horizons, [max(regrets[T], 1e-12) for T in horizons]) if len(horizons) >= 2 else None
    report["regret"] = {"median_by_T": {str(T): v for T, v in regrets.items()}, "slope": r_slope,
                        "limit": exponent + 0.15,
                        "pass": None if r_slope is None else r_slope <= exponent + 0.15}
    report["runs"] = [{k: v for k, v in r.items() if k != "cover"} for r in rows]

    if write:
        out = cfg.out / (cfg.name or f"lemmas-d{cfg.dim}")
        out.mkdir(parents=True, exist_ok=True)
        (out / "lemma_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
        (out / "lemma_report.txt").write_text("\n".join(format_report(report)) + "\n")
        for r in rows:
            (out / f"cover_T{r['T']}_seed{r['seed']}.txt").write_text("\n".join(r["cover"]) + "\n")
    return report


def format_report(report: dict) -> list:
    def verdict(v):
        return "n/a" if v is None else ("PASS" if v else "FAIL")

    lines = [f"d={report['dim']} nu={report['nu']} b={report['b']:.4f} q={report['q']:.4f}"]
    eg = report["element_gain"]
    lines.append(f"[{verdict(eg['pass'])}] max element gain / (log T loglog T): "
                 + ", ".join(f"T={T}: {v:.3f}" for T, v in eg["ratio_by_T"].items()))
    cs = report["cover_size"]
    if cs["slope"] is not None:
        lines.append(f"[{verdict(cs['pass'])}] cover size slope {cs['slope']:.3f} (limit {cs['limit']:.3f})")
    cap = report["capacity"]
    lines.append(f"[{verdict(cap['pass'])}] capacity violations {cap['violations']} "
                 f"(against N_t alone: {cap['violations_literal']})")
    gg = report["global_gain"]
    if gg.get("slope") is not None:
        lines.append(f"[{verdict(gg['pass'])}] global gain slope {gg['slope']:.3f} (limit {gg['limit']:.3f})")
    rg = report["regret"]
    if rg["slope"] is not None:
        lines.append(f"[{verdict(rg['pass'])}] regret slope {rg['slope']:.3f} (limit {rg['limit']:.3f})")
    if not report["complete"]:
        lines.append("report incomplete: not enough horizons")
    return lines


# -- plots ---------------------------------------------------------------------------

def smooth(x, window: int = 200) -> np.ndarray:
    """Top-hat moving average; edges average over the part of the window inside the series."""
    x = np.asarray(x, dtype=float)
    if len(x) < window:
        window = max(1, len(x) // 2)
    kernel = np.ones(window)
    return np.convolve(x, kernel, mode="same") / np.convolve(np.ones(len(x)), kernel, mode="same")


def plot_data(runs: dict, window: int = 200) -> list:
    """Rows of per-step plot data; ``runs`` maps algorithm -> list of (regret, wall_clock) arrays."""
    rows = []
    for algo, series in runs.items():
        T = min(len(r) for r, _ in series)
        reg = np.array([r[:T] for r, _ in series])
        cum = np.cumsum(reg, axis=1)
        med = np.median(cum, axis=0)
        lo = np.percentile(cum, 2.5, axis=0)
        hi = np.percentile(cum, 97.5, axis=0)
        sm = smooth(reg.mean(axis=0), window)
        walls = [w[:T] for _, w in series if w is not None]
        wc = np.median(np.array(walls), axis=0) if walls else np.full(T, np.nan)
        for i in range(T):
            rows.append([algo, i + 1, med[i], lo[i], hi[i], sm[i], wc[i]])
    return rows


def emit_plots(runs: dict, out_dir, window: int = 200, title: str = "") -> tuple:
    """Write ``plot_data.csv`` and a three-panel ``plot.png``; returns both paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if not runs:
        raise ValueError("need at least one trace to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = plot_data(runs, window)
    csv_path = out_dir / "plot_data.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "t", "cum_regret_median", "cum_regret_lo", "cum_regret_hi",
                    "regret_smoothed", "wall_clock_s"])
        w.writerows(rows)

    fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
    for algo in runs:
        r = [row for row in rows if row[0] == algo]
        t = np.array([row[1] for row in r])
        cols = np.array([row[2:] for row in r], dtype=float)
        (line,) = axes[0].plot(t, cols[:, 0], label=algo)
        axes[0].plot(t, cols[:, 1], ":", color=line.get_color())
        axes[0].plot(t, cols[:, 2], ":", color=line.get_color())
        axes[1].plot(t, cols[:, 3], color=line.get_color())
        axes[2].plot(t, cols[:, 4], color=line.get_color())
    axes[0].set_ylabel("cumulative regret")
    axes[1].set_ylabel(f"per-step regret (window {window})")
    axes[2].set_ylabel("wall-clock per step [s]")
    for ax in axes:
        ax.set_xlabel("t")
    axes[0].legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    png_path = out_dir / "plot.png"
    fig.savefig(png_path, dpi=110)
    plt.close(fig)
    return csv_path, png_path


def load_runs(run_dirs) -> dict:
    """Collect (regret, wall_clock) series from experiment directories, keyed by algorithm."""
    runs = {}
    for d in map(Path, run_dirs):
        algo = d.name
        for trace_path in sorted(d.glob("trace_seed*.csv")):
            seed = trace_path.stem[len("trace_seed"):]
            tr = read_trace_csv(trace_path)
            timing = d / f"timing_seed{seed}.csv"
            wc = read_timing_csv(timing) if timing.exists() else None
            runs.setdefault(algo, []).append((tr["regret"], wc))
    return runs
