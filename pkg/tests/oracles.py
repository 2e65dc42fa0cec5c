"""Independent reference implementations used as test oracles.

These deliberately re-derive everything from scratch (different algorithms,
different code paths) so they can catch bugs in the production
implementations rather than mirror them.
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache
from typing import Callable, Sequence


def lcs_oracle(a: Sequence[str], b: Sequence[str]) -> int:
    """Full-table recursive LCS with memoization."""
    a = tuple(a)
    b = tuple(b)

    @lru_cache(maxsize=None)
    def rec(i: int, j: int) -> int:
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + rec(i + 1, j + 1)
        return max(rec(i + 1, j), rec(i, j + 1))

    return rec(0, 0)


def staged_quotas(
    pred: Sequence[str], ref: Sequence[str], stem_fn: Callable[[str], str]
) -> tuple[dict[str, int], dict[str, int], int]:
    """Exact-then-stem match counts, recomputed independently."""
    cp = Counter(pred)
    cr = Counter(ref)
    exact = {w: min(c, cr[w]) for w, c in cp.items() if cr[w]}
    pred_rem: Counter[str] = Counter()
    ref_rem: Counter[str] = Counter()
    for w, c in cp.items():
        leftover = c - exact.get(w, 0)
        if leftover:
            pred_rem[stem_fn(w)] += leftover
    for w, c in cr.items():
        leftover = c - exact.get(w, 0)
        if leftover:
            ref_rem[stem_fn(w)] += leftover
    stems = {s: min(c, ref_rem[s]) for s, c in pred_rem.items() if ref_rem[s]}
    m = sum(exact.values()) + sum(stems.values())
    return exact, stems, m


def min_chunks_bruteforce(
    pred: Sequence[str], ref: Sequence[str], stem_fn: Callable[[str], str]
) -> tuple[int, int]:
    """Enumerate every maximum staged alignment; return (m, min chunks).

    Exponential; only for short sequences (the acceptance domain is <= 8
    tokens per side).
    """
    exact, stems, m = staged_quotas(pred, ref, stem_fn)
    if m == 0:
        return 0, 0

    n_pred, n_ref = len(pred), len(ref)
    used = [False] * n_ref
    best = [m]  # an alignment never has more chunks than matches

    def chunks_of(pairs: list[tuple[int, int]]) -> int:
        count = 0
        prev = None
        for p, r in pairs:  # pairs are built in increasing pred order
            if prev is None or p != prev[0] + 1 or r != prev[1] + 1:
                count += 1
            prev = (p, r)
        return count

    def rec(i: int, pairs: list[tuple[int, int]], e_used: Counter, s_used: Counter) -> None:
        if len(pairs) + (n_pred - i) < m:
            return
        if i == n_pred:
            if len(pairs) == m:
                best[0] = min(best[0], chunks_of(pairs))
            return
        token = pred[i]
        token_stem = stem_fn(token)
        for j in range(n_ref):
            if used[j]:
                continue
            if ref[j] == token:
                if e_used[token] >= exact.get(token, 0):
                    continue
                e_used[token] += 1
                used[j] = True
                rec(i + 1, pairs + [(i, j)], e_used, s_used)
                used[j] = False
                e_used[token] -= 1
            elif stem_fn(ref[j]) == token_stem:
                if s_used[token_stem] >= stems.get(token_stem, 0):
                    continue
                s_used[token_stem] += 1
                used[j] = True
                rec(i + 1, pairs + [(i, j)], e_used, s_used)
                used[j] = False
                s_used[token_stem] -= 1
        rec(i + 1, pairs, e_used, s_used)

    rec(0, [], Counter(), Counter())
    return m, best[0]
