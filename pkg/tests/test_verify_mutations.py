"""The verification suite must catch deliberately injected policy bugs."""

import numpy as np

from tidalwf import verify
from tidalwf.policies import _check_view, _support_stats, _uniform_argmin


def _stwf_denominator_off_by_one(view, a_est):
    """Denominator a instead of a - 1, no renormalization."""
    v = _check_view(view)
    if a_est == 1:
        return _uniform_argmin(v)
    j, big_a = _support_stats(v, a_est)
    den = j * a_est
    p = np.zeros(v.shape[0])
    for n in range(v.shape[0]):
        num = big_a - j * int(v[n]) - 1
        if num > 0:
            p[n] = num / den
    return p


def _stwf_wrong_share(view, a_est):
    """Subtracts 1 instead of 1/support from each fill (renormalized)."""
    v = _check_view(view)
    if a_est == 1:
        return _uniform_argmin(v)
    j, big_a = _support_stats(v, a_est)
    p = np.zeros(v.shape[0])
    for n in range(v.shape[0]):
        num = big_a - j * int(v[n]) - j
        if num > 0:
            p[n] = float(num)
    total = p.sum()
    return p / total if total > 0 else _uniform_argmin(v)


def _utwf_wrong_support(view, a_m, m):
    """Uses the M a_m level for the support set instead of (M-1) a_m."""
    v = _check_view(view)
    if m == 1:
        return _uniform_argmin(v)
    j, big_a = _support_stats(np.sort(v), m * a_m)
    p = np.zeros(v.shape[0])
    for n in range(v.shape[0]):
        num = big_a - j * int(v[n])
        if num > 0:
            p[n] = float(num)
    return p / p.sum()


def test_denominator_mutation_breaks_simplex_contract():
    res = verify.check_probability_contracts(300, stwf_fn=_stwf_denominator_off_by_one)
    assert not res.ok
    assert res.instance is not None  # failing instance is serialized


def test_wrong_share_mutation_breaks_optimality_or_golden():
    golden = verify.check_golden_examples(stwf_fn=_stwf_wrong_share)
    optimal = verify.check_optimality(40, stwf_fn=_stwf_wrong_share)
    assert not (golden.ok and optimal.ok)


def test_wrong_support_mutation_caught():
    contracts = verify.check_probability_contracts(300, utwf_fn=_utwf_wrong_support)
    optimal = verify.check_optimality(40, utwf_fn=_utwf_wrong_support)
    assert not (contracts.ok and optimal.ok)


def test_clean_policies_pass_the_same_checks():
    assert verify.check_probability_contracts(300).ok
    assert verify.check_optimality(40).ok
    assert verify.check_golden_examples().ok
