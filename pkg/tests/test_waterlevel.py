from fractions import Fraction

import numpy as np
import pytest

from tidalwf.rng import Stream, mix64
from tidalwf.waterlevel import target_allocation, water_level


def test_two_server_levels():
    assert water_level([1, 0], 2) == Fraction(3, 2)
    assert water_level([1, 0], 3) == Fraction(2)
    assert water_level([5, 5, 5], 0) == Fraction(5)
    assert water_level([4, 0], 4) == Fraction(4)


def test_target_allocation_examples():
    ta = target_allocation([1, 0], 2)
    assert ta.g_star == (Fraction(1, 2), Fraction(3, 2))
    assert ta.support_count == 2
    assert ta.q_star == (Fraction(3, 2), Fraction(3, 2))

    ta = target_allocation([0, 0], 4)
    assert ta.g_star == (Fraction(2), Fraction(2))
    assert ta.support_count == 2

    ta = target_allocation([4, 0], 4)
    assert ta.g_star == (Fraction(0), Fraction(4))
    assert ta.support_count == 1
    assert ta.q_star == (Fraction(4), Fraction(4))


def test_zero_arrivals_pours_nothing():
    ta = target_allocation([3, 7, 5], 0)
    assert ta.water_level == 3
    assert ta.support_count == 0
    assert all(g == 0 for g in ta.g_star)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        water_level([], 1)
    with pytest.raises(ValueError):
        water_level([1, -2], 1)
    with pytest.raises(ValueError):
        water_level([1, 2], -1)


def test_conservation_and_structure_random():
    s = Stream(mix64(0xABCD))
    for _ in range(500):
        n = 1 + s.randint(64)
        q = [s.randint(101) for _ in range(n)]
        a = s.randint(501)
        ta = target_allocation(q, a)
        assert ta.total_fill == a
        assert ta.water_level.denominator <= n
        for qn, gn in zip(q, ta.g_star):
            if gn > 0:
                assert qn + gn == ta.water_level
            else:
                assert qn >= ta.water_level


def test_monotone_in_arrivals_and_queues():
    s = Stream(mix64(0x1234))
    for _ in range(300):
        n = 1 + s.randint(12)
        q = [s.randint(30) for _ in range(n)]
        a = s.randint(40)
        wl = water_level(q, a)
        assert water_level(q, a + 1) > wl
        q2 = list(q)
        q2[s.randint(n)] += 1
        assert water_level(q2, a) >= wl


def test_permutation_invariance():
    s = Stream(mix64(0x77))
    for _ in range(100):
        n = 2 + s.randint(8)
        q = np.array([s.randint(12) for _ in range(n)])
        a = s.randint(20)
        perm = s.sample_distinct(n, n)
        assert water_level(q[perm], a) == water_level(q, a)
        g = np.array(target_allocation(q, a).g_star)
        gp = np.array(target_allocation(q[perm], a).g_star)
        assert (g[perm] == gp).all()
