"""Inclusive prefix scans over associative (non-commutative) operators.

Two execution strategies:

``sequential``
    a left fold, ``out[k] = combine(out[k-1], x[k])``.
``parallel``
    the work-efficient up-sweep / down-sweep tree. Every tree level is a
    set of independent combines; they are dispatched as one batched call
    when the elements are a stacked NamedTuple of arrays, or mapped over a
    thread pool for plain Python sequences. Odd lengths are handled by
    carrying the unpaired tail element through the level, so no identity
    element is ever required.

For ``n = 2**m`` the parallel strategy performs exactly ``2 n - m - 2``
combines (``n - 1`` on the way up, ``n - m - 1`` on the way down).
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

WORKERS_ENV = "PARSMOOTH_WORKERS"


class ScanError(RuntimeError):
    """A combine failed; ``index_range`` locates the offending elements."""

    def __init__(self, message, index_range=None):
        if index_range is not None:
            message = f"{message} (elements {index_range[0]}..{index_range[1]})"
        super().__init__(message)
        self.index_range = index_range


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ScanPlan:
    """How to execute a scan.

    ``combine_calls`` accumulates the number of element-level combines across
    scans run with this plan when ``count_combines`` is set.
    """

    mode: str = "parallel"
    worker_budget: int = 1
    count_combines: bool = False
    combine_calls: int = 0

    def __post_init__(self):
        if self.mode not in ("sequential", "parallel"):
            raise ValueError(f"unknown scan mode {self.mode!r}")
        if self.worker_budget < 1:
            raise ValueError("worker_budget must be >= 1")

    def reset(self):
        self.combine_calls = 0


def parallel_combine_count(n):
    """Number of combines the parallel strategy uses for ``n`` elements."""
    if n < 1:
        raise ValueError("n must be positive")
    total = 0
    while n >= 2:
        total += n - 1
        n //= 2
    return total


def _is_stacked(elements):
    return isinstance(elements, tuple) and hasattr(elements, "_fields")


def _length(elements):
    return elements[0].shape[0] if _is_stacked(elements) else len(elements)


class _Stacked:
    """Index helpers for a NamedTuple whose fields share a leading axis."""

    @staticmethod
    def take(tree, idx):
        return type(tree)(*(f[idx] for f in tree))

    @staticmethod
    def interleave(first, odd, even):
        n = 1 + odd[0].shape[0] + even[0].shape[0]
        fields = []
        for f0, fo, fe in zip(first, odd, even):
            out = np.empty((n,) + fo.shape[1:], dtype=np.result_type(f0, fo, fe))
            out[0] = f0[0]
            out[1::2] = fo
            out[2::2] = fe
            fields.append(out)
        return type(first)(*fields)


class _Runner:
    """Executes one level of independent combines, counting and threading."""

    def __init__(self, combine, plan, stacked, pool):
        self.combine = combine
        self.plan = plan
        self.stacked = stacked
        self.pool = pool

    def __call__(self, left, right):
        count = _length(right)
        if self.plan is not None and self.plan.count_combines:
            self.plan.combine_calls += count
        if count == 0:
            return right
        if self.stacked:
            return self._batched(left, right, count)
        if self.pool is not None:
            return list(self.pool.map(self.combine, left, right))
        return [self.combine(a, b) for a, b in zip(left, right)]

    def _batched(self, left, right, count):
        workers = self.plan.worker_budget
        if self.pool is None or count < 2 * workers:
            return self.combine(left, right)
        bounds = np.linspace(0, count, workers + 1).astype(int)
        chunks = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
        parts = list(
            self.pool.map(
                lambda s: self.combine(_Stacked.take(left, s), _Stacked.take(right, s)),
                chunks,
            )
        )
        return type(parts[0])(*(np.concatenate(fs) for fs in zip(*parts)))


def _tree_scan(elems, run, stacked):
    n = _length(elems)
    if n < 2:
        return elems
    if stacked:
        take = _Stacked.take
        evens_l, odds_l = take(elems, slice(0, n - 1, 2)), take(elems, slice(1, n, 2))
    else:
        evens_l, odds_l = elems[0 : n - 1 : 2], elems[1:n:2]
    # up-sweep: pairwise reduce, then recurse on the half-length sequence
    odd = _tree_scan(run(evens_l, odds_l), run, stacked)
    # down-sweep: fill the even positions from the preceding odd prefix
    n_even = (n - 1) // 2
    if stacked:
        even = run(take(odd, slice(0, n_even)), take(elems, slice(2, n, 2)))
        return _Stacked.interleave(take(elems, slice(0, 1)), odd, even)
    even = run(odd[:n_even], elems[2:n:2])
    out = [None] * n
    out[0] = elems[0]
    out[1::2] = odd
    out[2::2] = even
    return out


def _sequential_scan(elems, combine, plan, stacked):
    n = _length(elems)
    if stacked:
        items = [_Stacked.take(elems, k) for k in range(n)]
    else:
        items = list(elems)
    out = [items[0]]
    for k in range(1, n):
        out.append(combine(out[-1], items[k]))
    if plan is not None and plan.count_combines:
        plan.combine_calls += n - 1
    if stacked:
        return type(elems)(*(np.stack(fs) for fs in zip(*out)))
    return out


def inclusive_scan(elements, combine, plan=None):
    """All prefixes ``e_0 * e_1 * ... * e_k`` under ``combine``.

    Args:
        elements: a non-empty sequence, or a NamedTuple of arrays stacked
            along axis 0 (then ``combine`` must accept stacked operands).
        combine: associative binary operator; argument order is preserved.
        plan: a :class:`ScanPlan`; defaults to parallel with one worker.

    Returns:
        Prefix results in the same container kind as ``elements``.
    """
    plan = ScanPlan() if plan is None else plan
    stacked = _is_stacked(elements)
    if _length(elements) == 0:
        raise ValueError("cannot scan an empty sequence")
    if plan.mode == "sequential":
        return _sequential_scan(elements, combine, plan, stacked)
    if plan.worker_budget > 1:
        with ThreadPoolExecutor(plan.worker_budget) as pool:
            return _tree_scan(elements, _Runner(combine, plan, stacked, pool), stacked)
    return _tree_scan(elements, _Runner(combine, plan, stacked, None), stacked)


def _reverse(elements):
    if _is_stacked(elements):
        return type(elements)(*(f[::-1] for f in elements))
    return list(elements)[::-1]


def reverse_scan(elements, combine, plan=None):
    """All suffixes ``e_k * ... * e_{n-1}``, operand order preserved.

    Implemented as a prefix scan of the reversed sequence with the operator's
    arguments swapped.
    """
    flipped = lambda a, b: combine(b, a)  # noqa: E731
    return _reverse(inclusive_scan(_reverse(elements), flipped, plan))
