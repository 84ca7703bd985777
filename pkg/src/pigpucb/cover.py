"""Adaptive cover of the unit cube by closed dyadic hypercubes.

A cell is stored as integer coordinates on a level-dependent lattice: at level
``l`` a cube has side ``1 / (base * 2**l)`` where ``base`` is the number of
initial cells per axis.  Corners are produced by dividing integers, so closed
membership tests against rational grid arms are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Constants:
    b: float
    q: float
    d: int
    nu: float


def constants(d: int, nu: float) -> Constants:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if nu <= 1:
        raise ValueError(f"nu must exceed 1 for a sublinear regret guarantee, got {nu}")
    return Constants(b=(d + 1) / (d + 2 * nu), q=d * (d + 1) / (d * (d + 2) + 2 * nu), d=d, nu=nu)


def _safe_ceil(x: float) -> int:
    # T**(q/d) lands a few ulps above an integer for exact powers
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return math.ceil(x)


def capacity_bound(t: int, b: float, d: int) -> int:
    """Upper bound on the number of cover elements realisable by step ``t``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return _safe_ceil(4.0 * (t + 1) ** (b * d))


def cells_per_axis(T: int, d: int, q: float) -> int:
    if T < 1:
        raise ValueError("horizon must be >= 1")
    return _safe_ceil(T ** (q / d))


@dataclass(frozen=True)
class Hypercube:
    index: tuple
    level: int
    base: int
    id: int
    created_at: int = 1

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def denom(self) -> int:
        return self.base << self.level

    @property
    def rho(self) -> float:
        return 1.0 / self.denom

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.index, dtype=float) / self.denom

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 1.0) / self.denom

    @property
    def volume(self) -> float:
        return self.rho**self.dim

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).ravel()
        return bool(np.all(self.lower <= x) and np.all(x <= self.upper))

    def contains_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def split(self, first_id: int, created_at: int) -> list:
        """The ``2**d`` half-side children, ids assigned consecutively from ``first_id``."""
        children = []
        for k, bits in enumerate(itertools.product((0, 1), repeat=self.dim)):
            idx = tuple(2 * i + bit for i, bit in zip(self.index, bits))
            children.append(Hypercube(idx, self.level + 1, self.base, first_id + k, created_at))
        return children


def contains(cube: Hypercube, x) -> bool:
    return cube.contains(x)


def split(cube: Hypercube, first_id: int = 0, created_at: int = 1) -> list:
    return cube.split(first_id, created_at)


def should_split(cube: Hypercube, n_points: int, b: float) -> bool:
    return cube.rho ** (-1.0 / b) < n_points + 1


@dataclass
class Cover:
    """The active cells together with a count of every cell ever activated."""

    dim: int
    base: int
    active: list = field(default_factory=list)
    history_count: int = 0
    next_id: int = 0

    @classmethod
    def grid(cls, dim: int, base: int, created_at: int = 1) -> "Cover":
        cover = cls(dim=dim, base=base)
        for k, idx in enumerate(itertools.product(range(base), repeat=dim)):
            cover.active.append(Hypercube(tuple(idx), 0, base, k, created_at))
        cover.history_count = cover.next_id = len(cover.active)
        return cover

    @property
    def initial_size(self) -> int:
        return self.base**self.dim

    def members(self, x) -> list:
        return [c for c in self.active if c.contains(x)]

    def refine(self, cube: Hypercube, created_at: int) -> list:
        """Replace ``cube`` by its children; returns the children."""
        children = cube.split(self.next_id, created_at)
        self.next_id += len(children)
        self.history_count += len(children)
        self.active.remove(cube)
        self.active.extend(children)
        return children

    def to_lines(self) -> list:
        lines = [f"# dim={self.dim} base={self.base} history_count={self.history_count}",
                 "# id level created_at rho lower..."]
        for c in sorted(self.active, key=lambda c: c.id):
            lower = " ".join(repr(v) for v in c.lower.tolist())
            lines.append(f"{c.id} {c.level} {c.created_at} {c.rho!r} {lower}")
        return lines

    @classmethod
    def from_lines(cls, lines) -> "Cover":
        header = dict(tok.split("=") for tok in lines[0].lstrip("# ").split())
        cover = cls(dim=int(header["dim"]), base=int(header["base"]))
        cover.history_count = int(header["history_count"])
        for line in lines:
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            cid, level, created = int(parts[0]), int(parts[1]), int(parts[2])
            denom = cover.base << level
            idx = tuple(int(round(float(v) * denom)) for v in parts[4:])
            cover.active.append(Hypercube(idx, level, cover.base, cid, created))
            cover.next_id = max(cover.next_id, cid + 1)
        return cover


def initial_cover(T: int, d: int, q: float, root: bool = False) -> Cover:
    """Regular grid with ``ceil(T**(q/d))`` cells per axis, or the whole cube when ``root``."""
    return Cover.grid(d, 1 if root else cells_per_axis(T, d, q))
