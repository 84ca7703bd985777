"""π-GP-UCB, IGP-UCB and the uniform baseline on finite grids of arms.

All three share the same loop shape: pick an arm, observe a noisy reward, update,
record a ``StepRecord``.  π-GP-UCB keeps one independent GP per cover element,
each tracking the posterior at the arms inside its cube; the UCB of an arm is the
largest index over the elements that contain it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cover import Cover, Hypercube, Constants, capacity_bound, constants, initial_cover, should_split
from .gp import GPState
from .kernel import KernelSpec
from .testbed import Problem


@dataclass
class AlgoConfig:
    B: float
    L: float
    delta: float = 0.1
    T: int = 1000
    alpha: float | None = None
    seed: int = 0
    nu: float = 1.5
    ell: float = 0.2
    initial_cover: str = "grid"
    full_argmax: bool = False

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.T < 1:
            raise ValueError("horizon must be >= 1")
        if self.B < 0 or self.L < 0:
            raise ValueError("B and L must be non-negative")
        if self.alpha is None:
            self.alpha = 1.0 + 2.0 / self.T
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.initial_cover not in ("grid", "root"):
            raise ValueError("initial_cover must be 'grid' or 'root'")


def beta(B: float, L: float, delta_eff: float, gamma: float) -> float:
    """Confidence width multiplier ``B + L sqrt(2 (gamma + 1 + log(1/delta)))``."""
    return B + L * math.sqrt(2.0 * (gamma + 1.0 + math.log(1.0 / delta_eff)))


def rng_streams(seed) -> tuple:
    """Independent (noise, arm-draw) generators derived from one seed."""
    noise, draws = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(noise), np.random.default_rng(draws)


@dataclass
class StepRecord:
    t: int
    arm: int
    x: tuple
    y: float
    regret: float
    ucb: float
    element_id: int
    splits: tuple = ()
    wall_clock: float = 0.0


@dataclass
class ElementState:
    cube: Hypercube
    gp: GPState
    arms: np.ndarray
    obs_arms: list = field(default_factory=list)
    obs_y: list = field(default_factory=list)

    @property
    def n_points(self) -> int:
        return self.gp.n


class RunTrace:
    """Everything recorded over one run; per-step quantities are numpy arrays."""

    def __init__(self, algorithm: str, problem: Problem, cfg: AlgoConfig):
        self.algorithm = algorithm
        self.problem_name = problem.name
        self.cfg = cfg
        self.dim = problem.dim
        self.arms = problem.arms
        T = cfg.T
        self.arm = np.zeros(T, dtype=np.int64)
        self.y = np.zeros(T)
        self.regret = np.zeros(T)
        self.ucb = np.full(T, np.nan)
        self.element_id = np.full(T, -1, dtype=np.int64)
        self.n_splits = np.zeros(T, dtype=np.int64)
        self.wall_clock = np.zeros(T)
        self.history_count = np.zeros(T, dtype=np.int64)
        self.n_active = np.zeros(T, dtype=np.int64)
        self.split_ids: list = [()] * T
        self.elements: list = []
        self.cover_lines: list = []
        self.initial_size = 0
        self.validity_pairs = 0
        self.validity_violations = 0
        self.diagnostics = {"jitter_events": 0, "children_over_threshold": 0}
        self.steps = 0

    def record(self, rec: StepRecord, history: int = 0, active: int = 0):
        i = rec.t - 1
        self.arm[i] = rec.arm
        self.y[i] = rec.y
        self.regret[i] = rec.regret
        self.ucb[i] = rec.ucb
        self.element_id[i] = rec.element_id
        self.n_splits[i] = len(rec.splits)
        self.split_ids[i] = tuple(rec.splits)
        self.wall_clock[i] = rec.wall_clock
        self.history_count[i] = history
        self.n_active[i] = active
        self.steps = rec.t

    @property
    def T(self) -> int:
        return self.steps

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.regret[: self.steps])

    @property
    def R_T(self) -> float:
        return float(self.regret[: self.steps].sum())

    @property
    def max_element_gamma(self) -> float:
        return max((e["gamma"] for e in self.elements), default=0.0)

    def records(self):
        for i in range(self.steps):
            yield StepRecord(i + 1, int(self.arm[i]), tuple(self.arms[self.arm[i]].tolist()),
                             float(self.y[i]), float(self.regret[i]), float(self.ucb[i]),
                             int(self.element_id[i]), self.split_ids[i], float(self.wall_clock[i]))

    def capacity_violations(self, literal: bool = False) -> int:
        """Steps where the count of elements ever active exceeds the capacity bound.

        The bound is ``max(|A_1|, N_t)``; with ``literal`` it is ``N_t`` alone, which
        an initial grid finer than one cell exceeds at small ``t``.
        """
        if self.algorithm != "pi-gp-ucb":
            return 0
        c = constants(self.dim, self.cfg.nu)
        bad = 0
        for t in range(1, self.steps + 1):
            cap = capacity_bound(t, c.b, self.dim)
            if not literal:
                cap = max(cap, self.initial_size)
            bad += int(self.history_count[t - 1] > cap)
        return bad

    def summary(self) -> dict:
        cfg = self.cfg
        return {
            "algorithm": self.algorithm,
            "problem": self.problem_name,
            "config": {"B": cfg.B, "L": cfg.L, "delta": cfg.delta, "T": cfg.T, "alpha": cfg.alpha,
                       "seed": cfg.seed, "nu": cfg.nu, "ell": cfg.ell,
                       "initial_cover": cfg.initial_cover, "full_argmax": cfg.full_argmax},
            "R_T": self.R_T,
            "history_count": int(self.history_count[self.steps - 1]) if self.steps else 0,
            "initial_cover_size": self.initial_size,
            "max_element_gamma": self.max_element_gamma,
            "validity_pairs": self.validity_pairs,
            "validity_violations": self.validity_violations,
            "capacity_violations": self.capacity_violations(),
            "diagnostics": dict(self.diagnostics),
        }


class PiGPUCB:
    """Stateful π-GP-UCB; call ``step`` ``T`` times or use ``run_pi_gp_ucb``."""

    def __init__(self, cfg: AlgoConfig, problem: Problem, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.problem = problem
        self.d = problem.dim
        self.kernel = KernelSpec(nu=cfg.nu, ell=cfg.ell, dim=self.d)
        self.consts: Constants = constants(self.d, cfg.nu)
        self.rng = rng if rng is not None else rng_streams(cfg.seed)[0]
        self.cover: Cover = initial_cover(cfg.T, self.d, self.consts.q, root=cfg.initial_cover == "root")
        self.elements: dict = {}
        for cube in self.cover.active:
            self.elements[cube.id] = self._make_element(cube, [], [])
        self.t = 0
        self.retired: list = []
        self.jitter_events = 0
        self.children_over_threshold = 0
        self.validity_pairs = 0
        self.validity_violations = 0
        self.last_counts = (self.cover.history_count, len(self.cover.active))
        self._restructure()

    def _make_element(self, cube: Hypercube, obs_arms, obs_y) -> ElementState:
        arms = np.flatnonzero(cube.contains_many(self.problem.arms))
        X = self.problem.arms[np.asarray(obs_arms, dtype=np.int64)]
        gp = GPState.from_data(self.kernel, self.cfg.alpha, X, obs_y, probes=self.problem.arms[arms])
        return ElementState(cube, gp, arms, list(obs_arms), list(obs_y))

    def _restructure(self):
        """Rebuild the flat (element, arm) pair layout after the cover changes."""
        self.order_ids = sorted(self.elements)
        elems = [self.elements[i] for i in self.order_ids]
        self.position = {eid: p for p, eid in enumerate(self.order_ids)}
        sizes = np.array([len(e.arms) for e in elems], dtype=np.int64)
        self.offsets = np.concatenate(([0], np.cumsum(sizes)))
        self.pair_arm = np.concatenate([e.arms for e in elems])
        self.pair_pos = np.repeat(np.arange(len(elems)), sizes)
        self.pair_local = np.concatenate([np.arange(s) for s in sizes])
        self.mu = np.concatenate([e.gp.probe_mean for e in elems])
        self.sd = np.concatenate([e.gp.probe_std() for e in elems])
        self.gamma = np.array([e.gp.information_gain() for e in elems])
        # pairs grouped by arm, smaller element id first within a group
        self.order = np.lexsort((self.pair_pos, self.pair_arm))
        counts = np.bincount(self.pair_arm, minlength=self.problem.n_arms)
        if np.any(counts == 0):
            raise RuntimeError("cover does not contain every arm")
        self.starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        self.ends = self.starts + counts

    def _refresh_all(self):
        for p, eid in enumerate(self.order_ids):
            e = self.elements[eid]
            if len(e.arms):
                mu, sd = e.gp.posterior(self.problem.arms[e.arms])
                self.mu[self.offsets[p]:self.offsets[p + 1]] = mu
                self.sd[self.offsets[p]:self.offsets[p + 1]] = sd

    def betas(self, t: int) -> np.ndarray:
        cfg = self.cfg
        n_t = capacity_bound(t, self.consts.b, self.d)
        return cfg.B + cfg.L * np.sqrt(2.0 * (self.gamma + 1.0 + math.log(n_t / cfg.delta)))

    def ucb_index(self, arm: int, t: int | None = None):
        """(UCB value, element id) of ``arm`` at step ``t`` (default: the next step)."""
        t = self.t + 1 if t is None else t
        betas = self.betas(t)
        pairs = self.order[self.starts[arm]:self.ends[arm]]
        vals = self.mu[pairs] + betas[self.pair_pos[pairs]] * self.sd[pairs]
        k = int(np.argmax(vals))
        return float(vals[k]), self.order_ids[self.pair_pos[pairs[k]]]

    def step(self) -> StepRecord:
        cfg, problem = self.cfg, self.problem
        t = self.t + 1
        if t > cfg.T:
            raise RuntimeError("horizon exceeded")
        start = time.perf_counter()
        if cfg.full_argmax:
            self._refresh_all()
        betas = self.betas(t)
        ucb_pairs = self.mu + betas[self.pair_pos] * self.sd
        grouped = ucb_pairs[self.order]
        arm_ucb = np.maximum.reduceat(grouped, self.starts)
        arm = int(np.argmax(arm_ucb))
        best = arm_ucb[arm]
        pairs = self.order[self.starts[arm]:self.ends[arm]]
        winner = pairs[int(np.argmax(grouped[self.starts[arm]:self.ends[arm]] == best))]
        element_id = self.order_ids[self.pair_pos[winner]]

        y = problem.observe(arm, self.rng)
        x = problem.arms[arm]
        f_x = problem.values[arm]
        for pair in pairs:
            p = self.pair_pos[pair]
            self.validity_pairs += 1
            if abs(self.mu[pair] - f_x) > betas[p] * self.sd[pair]:
                self.validity_violations += 1
            e = self.elements[self.order_ids[p]]
            e.gp.add_observation(x, y, probe=int(self.pair_local[pair]))
            e.obs_arms.append(arm)
            e.obs_y.append(y)
            lo, hi = self.offsets[p], self.offsets[p + 1]
            self.mu[lo:hi] = e.gp.probe_mean
            self.sd[lo:hi] = e.gp.probe_std()
            self.gamma[p] = e.gp.information_gain()

        history = self.cover.history_count
        active = len(self.cover.active)
        to_split = [e for eid, e in self.elements.items() if should_split(e.cube, e.n_points, self.consts.b)]
        for e in to_split:
            self._split(e, t)
        if to_split:
            self._restructure()
        wall = time.perf_counter() - start
        self.t = t
        rec = StepRecord(t, arm, tuple(x.tolist()), y, float(problem.gaps[arm]), float(best),
                         element_id, tuple(e.cube.id for e in to_split), wall)
        self.last_counts = (history, active)
        return rec

    def _split(self, e: ElementState, t: int):
        self.retired.append(self._element_summary(e, terminal=t))
        self.jitter_events += e.gp.jitter_events
        del self.elements[e.cube.id]
        obs_arms = np.asarray(e.obs_arms, dtype=np.int64)
        obs_y = np.asarray(e.obs_y)
        for child in self.cover.refine(e.cube, created_at=t + 1):
            inside = child.contains_many(self.problem.arms[obs_arms]) if len(obs_arms) else np.zeros(0, bool)
            ce = self._make_element(child, obs_arms[inside], obs_y[inside])
            if should_split(child, ce.n_points, self.consts.b):
                self.children_over_threshold += 1
            self.elements[child.id] = ce

    @staticmethod
    def _element_summary(e: ElementState, terminal: int) -> dict:
        c = e.cube
        return {"id": c.id, "level": c.level, "created_at": c.created_at, "terminal": terminal,
                "rho": c.rho, "n": e.n_points, "gamma": e.gp.information_gain()}

    def finish(self, trace: RunTrace):
        trace.elements = self.retired + [
            self._element_summary(self.elements[i], terminal=self.t) for i in self.order_ids
        ]
        trace.initial_size = self.cover.initial_size
        trace.cover_lines = self.cover.to_lines()
        trace.validity_pairs = self.validity_pairs
        trace.validity_violations = self.validity_violations
        trace.diagnostics["jitter_events"] = self.jitter_events + sum(
            e.gp.jitter_events for e in self.elements.values())
        trace.diagnostics["children_over_threshold"] = self.children_over_threshold


def pi_gp_ucb_step(state: PiGPUCB, problem: Problem | None = None):
    """One select/observe/split round; returns ``(record, state)``."""
    return state.step(), state


def run_pi_gp_ucb(cfg: AlgoConfig, problem: Problem) -> RunTrace:
    algo = PiGPUCB(cfg, problem)
    trace = RunTrace("pi-gp-ucb", problem, cfg)
    for _ in range(cfg.T):
        rec = algo.step()
        trace.record(rec, *algo.last_counts)
    algo.finish(trace)
    return trace


def run_igp_ucb(cfg: AlgoConfig, problem: Problem) -> RunTrace:
    """One GP over the whole domain with width ``beta(B, L, delta, gamma)``."""
    kernel = KernelSpec(nu=cfg.nu, ell=cfg.ell, dim=problem.dim)
    gp = GPState(kernel, cfg.alpha, probes=problem.arms, capacity=cfg.T)
    rng, _ = rng_streams(cfg.seed)
    trace = RunTrace("igp-ucb", problem, cfg)
    arms = problem.arms
    pairs = violations = 0
    for t in range(1, cfg.T + 1):
        start = time.perf_counter()
        if cfg.full_argmax:
            mu, sd = gp.posterior(arms)
        else:
            mu, sd = gp.probe_mean, gp.probe_std()
        width = beta(cfg.B, cfg.L, cfg.delta, gp.information_gain())
        ucb = mu + width * sd
        arm = int(np.argmax(ucb))
        pairs += 1
        violations += int(abs(mu[arm] - problem.values[arm]) > width * sd[arm])
        y = problem.observe(arm, rng)
        gp.add_observation(arms[arm], y, probe=arm)
        wall = time.perf_counter() - start
        trace.record(StepRecord(t, arm, tuple(arms[arm].tolist()), y, float(problem.gaps[arm]),
                                float(ucb[arm]), 0, (), wall), history=1, active=1)
    trace.initial_size = 1
    trace.elements = [{"id": 0, "level": 0, "created_at": 1, "terminal": cfg.T, "rho": 1.0,
                       "n": gp.n, "gamma": gp.information_gain()}]
    trace.validity_pairs, trace.validity_violations = pairs, violations
    trace.diagnostics["jitter_events"] = gp.jitter_events
    return trace


def run_uniform(cfg: AlgoConfig, problem: Problem) -> RunTrace:
    rng, draws = rng_streams(cfg.seed)
    trace = RunTrace("uniform", problem, cfg)
    for t in range(1, cfg.T + 1):
        start = time.perf_counter()
        arm = int(draws.integers(problem.n_arms))
        y = problem.observe(arm, rng)
        wall = time.perf_counter() - start
        trace.record(StepRecord(t, arm, tuple(problem.arms[arm].tolist()), y,
                                float(problem.gaps[arm]), float("nan"), -1, (), wall))
    return trace


ALGORITHMS = {
    "pi-gp-ucb": run_pi_gp_ucb,
    "igp-ucb": run_igp_ucb,
    "uniform": run_uniform,
}


def run(algorithm: str, cfg: AlgoConfig, problem: Problem) -> RunTrace:
    try:
        runner = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(ALGORITHMS)}") from None
    return runner(cfg, problem)
