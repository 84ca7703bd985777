"""Test problems: synthetic RKHS functions and scaled 2-d benchmarks on regular grids."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelSpec

MAX_ARMS = 10_000_000


@dataclass(frozen=True)
class UniformNoise:
    """Additive noise uniform on ``[-scale, scale]``; bounded, hence ``scale``-subGaussian."""

    scale: float

    @property
    def L(self) -> float:
        return self.scale

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(-self.scale, self.scale, size)


def sample_noise(model: UniformNoise, rng: np.random.Generator) -> float:
    return float(model.sample(rng))


def make_grid(d: int, g: int) -> np.ndarray:
    """Regular lattice with ``g`` points per axis including 0 and 1, row-major order."""
    if g < 2:
        raise ValueError("need at least 2 points per axis")
    if g**d > MAX_ARMS:
        raise ValueError(f"grid of {g}^{d} arms is too large")
    axis = np.arange(g) / (g - 1)
    return np.array(list(itertools.product(axis, repeat=d)), dtype=float).reshape(-1, d)


@dataclass
class SyntheticRKHSFunction:
    centers: np.ndarray
    coeffs: np.ndarray
    kernel: KernelSpec
    norm: float

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, self.kernel.dim)
        return self.kernel.gram(X, self.centers) @ self.coeffs


def rkhs_norm(kernel: KernelSpec, centers, coeffs) -> float:
    coeffs = np.asarray(coeffs, dtype=float)
    sq = float(coeffs @ kernel.gram(centers) @ coeffs)
    return float(np.sqrt(max(sq, 0.0)))


def gen_synthetic(d: int, kernel: KernelSpec, seed, m: int | None = None) -> SyntheticRKHSFunction:
    """Random kernel expansion with ``30 d`` centres and coefficients uniform on [-1, 1]."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    m = 30 * d if m is None else m
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0.0, 1.0, size=(m, d))
    coeffs = rng.uniform(-1.0, 1.0, size=m)
    return SyntheticRKHSFunction(centers, coeffs, kernel, rkhs_norm(kernel, centers, coeffs))


def eval_synthetic(f: SyntheticRKHSFunction, x) -> float:
    return float(f(x)[0])


# Benchmarks are minimisation problems on their usual boxes; the bandit maximises,
# so they are negated before min-max scaling to [-1, 1].

def branin(x1, x2):
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5 / np.pi
    r, s, t = 6.0, 10.0, 1 / (8 * np.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


def six_hump_camel(x1, x2):
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def goldstein_price(x1, x2):
    a = 1 + (x1 + x2 + 1) ** 2 * (19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2)
    b = 30 + (2 * x1 - 3 * x2) ** 2 * (18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2)
    return a * b


def beale(x1, x2):
    return (
        (1.5 - x1 + x1 * x2) ** 2
        + (2.25 - x1 + x1 * x2**2) ** 2
        + (2.625 - x1 + x1 * x2**3) ** 2
    )


BENCHMARKS = {
    "branin": (branin, ((-5.0, 10.0), (0.0, 15.0))),
    "six-hump-camel": (six_hump_camel, ((-3.0, 3.0), (-2.0, 2.0))),
    "goldstein-price": (goldstein_price, ((-2.0, 2.0), (-2.0, 2.0))),
    "beale": (beale, ((-4.5, 4.5), (-4.5, 4.5))),
}


@dataclass
class Problem:
    """A finite-armed problem: arms, noiseless rewards on the arms, and a noise model."""

    name: str
    arms: np.ndarray
    values: np.ndarray
    noise: UniformNoise
    B: float
    manifest: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.arms.shape[1]

    @property
    def n_arms(self) -> int:
        return self.arms.shape[0]

    @property
    def fstar(self) -> float:
        return float(self.values.max())

    @property
    def gaps(self) -> np.ndarray:
        return self.fstar - self.values

    @property
    def mean_gap(self) -> float:
        return float(self.gaps.mean())

    def observe(self, arm: int, rng: np.random.Generator) -> float:
        return float(self.values[arm] + self.noise.sample(rng))

    def to_json(self) -> str:
        return json.dumps(self.manifest, indent=2, sort_keys=True)


def synthetic_problem(d: int, nu: float = 1.5, ell: float = 0.2, seed=0, g: int = 30,
                      noise: float = 1.0) -> Problem:
    kernel = KernelSpec(nu=nu, ell=ell, dim=d)
    f = gen_synthetic(d, kernel, seed)
    arms = make_grid(d, g)
    manifest = {
        "kind": "synthetic", "dim": d, "nu": nu, "ell": ell, "seed": seed, "grid": g,
        "noise": noise, "norm": f.norm,
        "centers": f.centers.tolist(), "coeffs": f.coeffs.tolist(),
    }
    return Problem(f"synthetic-d{d}-s{seed}", arms, f(arms), UniformNoise(noise), f.norm, manifest)


def benchmark_problem(name: str, g: int = 30, noise: float = 0.1) -> Problem:
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    func, bounds = BENCHMARKS[name]
    arms = make_grid(2, g)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    z = lo + arms * (hi - lo)
    raw = -func(z[:, 0], z[:, 1])
    scaled = 2.0 * (raw - raw.min()) / (raw.max() - raw.min()) - 1.0
    manifest = {"kind": "benchmark", "name": name, "grid": g, "noise": noise}
    return Problem(name, arms, scaled, UniformNoise(noise), 1.0, manifest)


def benchmark_suite(g: int = 30, names=None) -> list:
    return [benchmark_problem(n, g) for n in (names or BENCHMARKS)]


def problem_from_manifest(manifest) -> Problem:
    """Rebuild a problem from its manifest (a dict or JSON text)."""
    if isinstance(manifest, str):
        manifest = json.loads(manifest)
    if manifest["kind"] == "benchmark":
        return benchmark_problem(manifest["name"], manifest["grid"], manifest["noise"])
    d = manifest["dim"]
    kernel = KernelSpec(nu=manifest["nu"], ell=manifest["ell"], dim=d)
    centers = np.asarray(manifest["centers"], dtype=float).reshape(-1, d)
    coeffs = np.asarray(manifest["coeffs"], dtype=float)
    f = SyntheticRKHSFunction(centers, coeffs, kernel, rkhs_norm(kernel, centers, coeffs))
    arms = make_grid(d, manifest["grid"])
    return Problem(f"synthetic-d{d}-s{manifest['seed']}", arms, f(arms),
                   UniformNoise(manifest["noise"]), f.norm, dict(manifest))
