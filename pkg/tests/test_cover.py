import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pigpucb.cover import (
    Cover,
    Hypercube,
    capacity_bound,
    cells_per_axis,
    constants,
    contains,
    initial_cover,
    should_split,
    split,
)
from pigpucb.testbed import make_grid


@pytest.mark.parametrize("d,b,q", [
    (1, Fraction(1, 2), Fraction(1, 3)),
    (2, Fraction(3, 5), Fraction(6, 11)),
    (3, Fraction(2, 3), Fraction(2, 3)),
])
def test_constants(d, b, q):
    c = constants(d, 1.5)
    assert c.b == pytest.approx(float(b), abs=1e-15)
    assert c.q == pytest.approx(float(q), abs=1e-15)


def test_constants_reject_rough_kernels():
    with pytest.raises(ValueError):
        constants(1, 1.0)
    with pytest.raises(ValueError):
        constants(0, 1.5)


def test_initial_cover_sizes():
    assert initial_cover(1, 3, constants(3, 1.5).q).initial_size == 1
    cov = initial_cover(1000, 2, constants(2, 1.5).q)
    assert cov.base == 7 and len(cov.active) == 49 and cov.history_count == 49
    assert cells_per_axis(10000, 1, constants(1, 1.5).q) == 22
    # exact cube: 1000**(1/3) is 9.999999999999998 in floating point
    assert cells_per_axis(1000, 1, 1 / 3) == 10
    assert cells_per_axis(1001, 1, 1 / 3) == 11
    assert initial_cover(500, 2, 0.5, root=True).initial_size == 1


def test_initial_cover_tiles_unit_cube():
    cov = initial_cover(1000, 2, constants(2, 1.5).q)
    assert sum(c.volume for c in cov.active) == pytest.approx(1.0, abs=1e-12)
    assert all(np.all(c.lower >= 0) and np.all(c.upper <= 1) for c in cov.active)


def test_contains_corners_and_shared_facets():
    root = Hypercube((0, 0, 0), 0, 1, 0)
    for corner in itertools.product((0.0, 1.0), repeat=3):
        assert contains(root, corner)
    assert not contains(root, [1.0, 0.5, 1.0000001])
    left, right = Hypercube((0,), 1, 1, 0), Hypercube((1,), 1, 1, 1)
    assert contains(left, [0.5]) and contains(right, [0.5])


def test_memberships_between_one_and_two_pow_d():
    rng = np.random.default_rng(0)
    cov = initial_cover(1000, 3, constants(3, 1.5).q)
    pts = np.vstack([rng.uniform(size=(200, 3)), make_grid(3, 5)])
    for x in pts:
        assert 1 <= len(cov.members(x)) <= 8
    # a grid vertex shared by eight cells
    v = np.full(3, 1.0 / cov.base)
    assert len(cov.members(v)) == 8


def test_should_split_examples():
    assert not should_split(Hypercube((0,), 0, 1, 0), 0, 0.5)
    quarter = Hypercube((0,), 2, 1, 0)
    assert not should_split(quarter, 15, 0.5)
    assert should_split(quarter, 16, 0.5)
    half = Hypercube((0, 0), 1, 1, 0)
    assert not should_split(half, 4, 3 / 7)
    assert should_split(half, 5, 3 / 7)
    # with b = 3/5 the threshold is 2**(5/3) ~ 3.17
    assert not should_split(half, 2, 0.6)
    assert should_split(half, 3, 0.6)


def test_split_unit_square():
    kids = split(Hypercube((0, 0), 0, 1, 0), first_id=10, created_at=4)
    assert [tuple(c.lower) for c in kids] == [(0, 0), (0, 0.5), (0.5, 0), (0.5, 0.5)]
    assert [c.id for c in kids] == [10, 11, 12, 13]
    assert all(c.rho == 0.5 and c.created_at == 4 for c in kids)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_split_tiles_parent(d):
    parent = Hypercube(tuple([1] * d), 2, 3, 0)
    kids = parent.split(1, 2)
    assert len(kids) == 2**d
    assert sum(c.volume for c in kids) == parent.volume
    centre = (parent.lower + parent.upper) / 2
    assert all(c.contains(centre) for c in kids)
    lo = np.min([c.lower for c in kids], axis=0)
    hi = np.max([c.upper for c in kids], axis=0)
    assert np.array_equal(lo, parent.lower) and np.array_equal(hi, parent.upper)


def test_capacity_bound_examples():
    assert capacity_bound(1, 0.5, 1) == 6
    assert capacity_bound(99, 3 / 7, 2) == 208
    assert capacity_bound(99, 0.6, 2) == math.ceil(4 * 100**1.2)
    vals = [capacity_bound(t, 0.6, 2) for t in range(1, 500)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        capacity_bound(0, 0.5, 1)


def test_snapshot_round_trip():
    cov = initial_cover(100, 2, 0.5)
    cov.refine(cov.active[3], created_at=5)
    cov.refine(cov.active[-1], created_at=9)
    back = Cover.from_lines(cov.to_lines())
    assert back.history_count == cov.history_count
    assert back.next_id == cov.next_id
    assert sorted(back.active, key=lambda c: c.id) == sorted(cov.active, key=lambda c: c.id)


def _rule_driven_refinement(d, picks, g):
    """Feed grid arms through the split rule from the root cover, checking invariants each step."""
    b = constants(d, 1.5).b
    cov = initial_cover(1, d, 0.5, root=True)
    arms = make_grid(d, g)
    points = {cov.active[0].id: []}
    violations = 0
    for t, pick in enumerate(picks, start=1):
        # elements alive during step t, before this step's splits
        if cov.history_count > capacity_bound(t, b, d):
            violations += 1
        arm = pick % len(arms)
        for c in cov.members(arms[arm]):
            points[c.id].append(arm)
        for cube in [c for c in cov.active if should_split(c, len(points[c.id]), b)]:
            inherited = np.array(points.pop(cube.id))
            kids = cov.refine(cube, created_at=t + 1)
            if sum(k.volume for k in kids) != cube.volume:
                violations += 1
            for k in kids:
                points[k.id] = inherited[k.contains_many(arms[inherited])].tolist()
        counts = np.zeros(len(arms), dtype=int)
        for c in cov.active:
            counts += c.contains_many(arms)
        if counts.min() < 1 or counts.max() > 2**d:
            violations += 1
    if cov.history_count > capacity_bound(len(picks) + 1, b, d):
        violations += 1
    return violations


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.lists(st.integers(0, 10**6), max_size=120))
def test_random_split_sequences(d, picks):
    assert _rule_driven_refinement(d, picks, g=9 if d < 3 else 5) == 0


@pytest.mark.parametrize("d", [1, 2])
def test_adversarial_repeated_point(d):
    # hammering the centre forces the deepest possible refinement there
    g = 9
    centre = (g**d - 1) // 2
    assert _rule_driven_refinement(d, [centre] * 400, g) == 0


def test_repeated_centre_overshoots_capacity_in_three_dims():
    # The centre lies in all eight children. Each inherits the first copy, receives the
    # second at t=2 and splits, so 1 + 8 + 64 = 73 elements are alive at t=3 while
    # ceil(4 * 4**2) = 64. This single start-up step is the only overshoot.
    b = constants(3, 1.5).b
    cov = initial_cover(1, 3, 0.5, root=True)
    first = cov.refine(cov.active[0], created_at=2)
    for c in first:
        cov.refine(c, created_at=3)
    assert cov.history_count == 73
    assert capacity_bound(3, b, 3) == 64
    assert _rule_driven_refinement(3, [62] * 400, 5) == 1
