from collections import Counter, deque
from fractions import Fraction

import numpy as np
import pytest

from tidalwf import policies
from tidalwf.rng import Stream, mix64


def _stream(label=0):
    return Stream(mix64(0x5151 ^ label))


def test_stwf_golden_values():
    assert policies.stwf_probs([1, 0], 2).tolist() == [0.0, 1.0]
    assert policies.stwf_probs([1, 0], 3).tolist() == [0.25, 0.75]
    assert policies.stwf_probs([0, 0], 4).tolist() == [0.5, 0.5]


def test_wfie_golden_values():
    assert policies.wfie_probs([1, 0], 2).tolist() == [0.25, 0.75]
    assert policies.wfie_probs([1, 0], 3).tolist() == [float(Fraction(1, 3)), float(Fraction(2, 3))]
    assert policies.wfie_probs([0, 0], 2).tolist() == [0.5, 0.5]


def test_utwf_golden_values():
    assert policies.utwf_probs([1, 0], 1, 2).tolist() == [0.0, 1.0]
    assert policies.utwf_probs([0, 0], 2, 2).tolist() == [0.5, 0.5]
    assert policies.utwf_probs([4, 0], 2, 2).tolist() == [0.0, 1.0]


def test_probability_policy_errors():
    with pytest.raises(ValueError):
        policies.stwf_probs([1, 0], 0)
    with pytest.raises(ValueError):
        policies.wfie_probs([1, 0], -1)
    with pytest.raises(ValueError):
        policies.utwf_probs([1, 0], 0, 2)
    with pytest.raises(ValueError):
        policies.utwf_probs([1, 0], 1, 0)
    with pytest.raises(ValueError):
        policies.stwf_probs([], 1)


def test_single_arrival_uniform_over_shortest():
    p = policies.stwf_probs([2, 0, 0, 5], 1)
    assert p.tolist() == [0.0, 0.5, 0.5, 0.0]
    p = policies.utwf_probs([2, 0, 0, 5], 3, 1)
    assert p.tolist() == [0.0, 0.5, 0.5, 0.0]


def test_probability_vectors_on_random_instances():
    s = _stream(1)
    for _ in range(800):
        n = 1 + s.randint(12)
        q = np.array([s.randint(20) for _ in range(n)])
        a_m = 1 + s.randint(4)
        m = 1 + s.randint(4)
        for p in (
            policies.stwf_probs(q, m * a_m),
            policies.wfie_probs(q, m * a_m),
            policies.utwf_probs(q, a_m, m),
        ):
            assert (p >= 0).all() and (p <= 1).all()
            assert abs(p.sum() - 1.0) < 1e-9


def test_coincidence_single_job_batches():
    s = _stream(2)
    for _ in range(300):
        n = 2 + s.randint(10)
        q = np.array([s.randint(15) for _ in range(n)])
        m = 2 + s.randint(4)
        assert np.max(np.abs(policies.utwf_probs(q, 1, m) - policies.stwf_probs(q, m))) <= 1e-12


def test_sample_decision_degenerate():
    counts = policies.sample_decision(np.array([0.0, 1.0]), 5, splittable=True, rng=_stream(3))
    assert counts.tolist() == [0, 5]
    counts = policies.sample_decision(np.array([0.0, 1.0]), 5, splittable=False, rng=_stream(3))
    assert counts.tolist() == [0, 5]


def test_sample_decision_laws():
    # splittable: two fair coin flips -> (2,0)/(1,1)/(0,2) w.p. 1/4, 1/2, 1/4
    p = np.array([0.5, 0.5])
    hits = Counter()
    trials = 40000
    for i in range(trials):
        counts = policies.sample_decision(p, 2, True, Stream(mix64(i)))
        hits[tuple(counts.tolist())] += 1
    assert abs(hits[(2, 0)] / trials - 0.25) < 0.01
    assert abs(hits[(1, 1)] / trials - 0.50) < 0.01
    assert abs(hits[(0, 2)] / trials - 0.25) < 0.01
    # unsplittable: one draw moves the whole batch
    hits = Counter()
    for i in range(trials):
        counts = policies.sample_decision(p, 2, False, Stream(mix64(i ^ 0xF00)))
        hits[tuple(counts.tolist())] += 1
    assert hits[(1, 1)] == 0
    assert abs(hits[(2, 0)] / trials - 0.5) < 0.01


def test_sample_decision_rejects_bad_vector():
    with pytest.raises(ValueError):
        policies.sample_decision(np.array([0.7, 0.7]), 1, True, _stream(4))
    with pytest.raises(ValueError):
        policies.sample_decision(np.array([-0.1, 1.1]), 1, True, _stream(4))


def test_jsq_unique_argmin():
    counts = policies.jsq_dispatch([3, 1, 2], 1, splittable=False, rng=_stream(5))
    assert counts.tolist() == [0, 1, 0]


def test_jsq_splittable_private_water_filling():
    counts = policies.jsq_dispatch([1, 0], 3, splittable=True, rng=_stream(6))
    assert counts.tolist() == [1, 2]


def test_jsq_tie_break_uniform():
    hits = np.zeros(2)
    trials = 20000
    for i in range(trials):
        counts = policies.jsq_dispatch([2, 2], 1, splittable=False, rng=Stream(mix64(i)))
        hits += counts
    assert np.all(np.abs(hits / trials - 0.5) < 0.015)


def test_jsqd_probing():
    counts = policies.jsqd_dispatch([0, 9], 1, 2, splittable=False, rng=_stream(7))
    assert counts.tolist() == [1, 0]
    with pytest.raises(ValueError):
        policies.jsqd_dispatch([0, 9], 1, 3, splittable=False, rng=_stream(7))
    # d=1 degenerates to a uniform random pick
    hits = np.zeros(3)
    trials = 15000
    for i in range(trials):
        hits += policies.jsqd_dispatch([5, 0, 2], 1, 1, False, Stream(mix64(i ^ 0xAB)))
    assert np.all(np.abs(hits / trials - 1 / 3) < 0.02)


def test_jsqd_full_probe_matches_jsq():
    # probing all servers sees the same minimum jsq does
    view = [4, 1, 3, 2]
    for i in range(200):
        probed = policies.jsqd_dispatch(view, 2, 4, splittable=False, rng=Stream(mix64(i)))
        assert probed.tolist() == [0, 2, 0, 0]


def test_jiq_rules():
    counts = policies.jiq_dispatch(deque([7]), 10, 1, splittable=False, rng=_stream(8))
    assert counts[7] == 1 and counts.sum() == 1
    # empty list falls back to a uniform pick
    hits = np.zeros(4)
    trials = 12000
    for i in range(trials):
        hits += policies.jiq_dispatch(deque(), 4, 1, False, Stream(mix64(i ^ 0xC0)))
    assert np.all(np.abs(hits / trials - 0.25) < 0.02)
    # splittable consumes one idle server per job
    idle = deque([3, 5])
    counts = policies.jiq_dispatch(idle, 8, 3, splittable=True, rng=_stream(9))
    assert counts[3] == 1 and counts[5] == 1 and counts.sum() == 3
    assert not idle


def test_lsq_self_update():
    est = np.array([5, 0, 9], dtype=np.int64)
    counts = policies.lsq_dispatch(est, 2, splittable=False, rng=_stream(10))
    assert counts.tolist() == [0, 2, 0]
    assert est.tolist() == [5, 2, 9]
    est = np.array([1, 0], dtype=np.int64)
    counts = policies.lsq_dispatch(est, 3, splittable=True, rng=_stream(11))
    assert counts.tolist() == [1, 2]
    # all-equal estimates break ties uniformly
    hits = np.zeros(3)
    trials = 15000
    for i in range(trials):
        est = np.zeros(3, dtype=np.int64)
        hits += policies.lsq_dispatch(est, 1, False, Stream(mix64(i ^ 0x9D)))
    assert np.all(np.abs(hits / trials - 1 / 3) < 0.02)


def test_policy_parsing():
    spec = policies.parse_policy("jsq2")
    assert spec.kind == "jsqd" and spec.d == 2 and spec.info == "complete"
    spec = policies.parse_policy("jsq2", 4)
    assert spec.d == 4
    spec = policies.parse_policy("utwf-ts")
    assert spec.kind == "utwf" and spec.info == "timestamped"
    with pytest.raises(ValueError):
        policies.parse_policy("nope")
    with pytest.raises(ValueError):
        policies.parse_policy("stwf", 3)
    with pytest.raises(ValueError):
        policies.parse_policy("jsq2", 0)


def test_zero_batch_sends_nothing():
    assert policies.jsq_dispatch([1, 2], 0, True, _stream(12)).sum() == 0
    assert policies.sample_decision(np.array([0.5, 0.5]), 0, True, _stream(12)).sum() == 0
