import operator
from functools import reduce

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parsmooth.parsmoother import combine_smoother
from parsmooth.parfilter import combine_filter
from parsmooth.scan import ScanPlan, inclusive_scan, parallel_combine_count, reverse_scan

from oracles import assert_elements_close, random_filter_element, random_smoother_element, stack

SEQ = ScanPlan("sequential")
PAR = ScanPlan("parallel")


@pytest.mark.parametrize("plan", [SEQ, PAR, ScanPlan("parallel", worker_budget=3)])
def test_integer_prefix_sum(plan):
    assert inclusive_scan([1, 2, 3, 4], operator.add, plan) == [1, 3, 6, 10]
    assert inclusive_scan([5], operator.add, plan) == [5]


@pytest.mark.parametrize("plan", [SEQ, PAR])
def test_string_suffix(plan):
    assert reverse_scan(["a", "b", "c"], operator.add, plan) == ["abc", "bc", "c"]
    assert reverse_scan(["z"], operator.add, plan) == ["z"]


def test_empty_rejected():
    with pytest.raises(ValueError):
        inclusive_scan([], operator.add)
    with pytest.raises(ValueError):
        reverse_scan([], operator.add, SEQ)


def test_plan_validation():
    with pytest.raises(ValueError):
        ScanPlan("gpu")
    with pytest.raises(ValueError):
        ScanPlan(worker_budget=0)


@given(st.lists(st.text(max_size=3), min_size=1, max_size=70), st.integers(1, 4))
def test_non_commutative_order_preserved(items, workers):
    expected = [reduce(operator.add, items[: k + 1]) for k in range(len(items))]
    assert inclusive_scan(items, operator.add, ScanPlan("parallel", workers)) == expected
    suffixes = ["".join(items[k:]) for k in range(len(items))]
    assert reverse_scan(items, operator.add, ScanPlan("parallel", workers)) == suffixes


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=200))
def test_sequential_is_left_fold(items):
    expected, acc = [], None
    for x in items:
        acc = x if acc is None else acc + x
        expected.append(acc)
    assert inclusive_scan(items, operator.add, SEQ) == expected
    assert inclusive_scan(items, operator.add, PAR) == expected


@given(st.lists(st.text(max_size=2), min_size=1, max_size=40))
def test_reverse_equals_flipped_reversed_prefix(items):
    flipped = lambda a, b: b + a  # noqa: E731
    via_prefix = inclusive_scan(items[::-1], flipped, PAR)[::-1]
    assert reverse_scan(items, operator.add, PAR) == via_prefix


@pytest.mark.parametrize("m", range(0, 12))
def test_power_of_two_combine_count(m):
    n = 2**m
    plan = ScanPlan("parallel", count_combines=True)
    inclusive_scan(list(range(n)), operator.add, plan)
    assert plan.combine_calls == parallel_combine_count(n) == 2 * n - m - 2
    assert plan.combine_calls <= 2 * n


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 100, 1001])
def test_combine_count_general_n(n):
    plan = ScanPlan("parallel", count_combines=True)
    inclusive_scan(list(range(n)), operator.add, plan)
    assert plan.combine_calls == parallel_combine_count(n)
    seq = ScanPlan("sequential", count_combines=True)
    inclusive_scan(list(range(n)), operator.add, seq)
    assert seq.combine_calls == n - 1


def test_stacked_count_matches_list_count():
    rng = np.random.default_rng(0)
    elems = stack([random_smoother_element(rng, 2) for _ in range(37)])
    plan = ScanPlan("parallel", count_combines=True)
    inclusive_scan(elems, combine_smoother, plan)
    assert plan.combine_calls == parallel_combine_count(37)


def test_filter_elements_parallel_vs_sequential():
    rng = np.random.default_rng(1)
    # contractive elements keep the 1000-long products well scaled
    raw = [random_filter_element(rng, 3) for _ in range(1000)]
    elems = stack([e._replace(A=0.5 * e.A, C=0.1 * e.C, J=0.1 * e.J) for e in raw])
    seq = inclusive_scan(elems, combine_filter, SEQ)
    par = inclusive_scan(elems, combine_filter, PAR)
    assert_elements_close(par, seq, rtol=1e-9, atol=1e-9)


def test_stacked_and_list_inputs_agree():
    rng = np.random.default_rng(2)
    items = [random_filter_element(rng, 2) for _ in range(19)]
    as_list = inclusive_scan(items, combine_filter, PAR)
    as_stack = inclusive_scan(stack(items), combine_filter, PAR)
    assert_elements_close(stack(as_list), as_stack, rtol=1e-12, atol=1e-12)


def test_worker_budget_does_not_change_result():
    rng = np.random.default_rng(3)
    elems = stack([random_smoother_element(rng, 3) for _ in range(200)])
    one = reverse_scan(elems, combine_smoother, ScanPlan("parallel", 1))
    four = reverse_scan(elems, combine_smoother, ScanPlan("parallel", 4))
    assert_elements_close(one, four, rtol=1e-12, atol=1e-12)


def test_reverse_scan_smoother_against_suffix_products():
    rng = np.random.default_rng(4)
    items = [random_smoother_element(rng, 3) for _ in range(500)]
    got = reverse_scan(stack(items), combine_smoother, PAR)
    for k in range(0, 500, 7):
        ref = items[-1]
        for e in reversed(items[k:-1]):
            ref = combine_smoother(e, ref)
        for name, a, b in zip(ref._fields, (got.E[k], got.g[k], got.L[k]), ref):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10, err_msg=name)
