"""Slow, obviously-correct reference implementations used by the tests.

None of these share code with the package; they exist to cross-check it.
"""

from __future__ import annotations

import itertools
import random
import unicodedata

GREEK_BASES = "αβγδεζηθικλμνξοπρστυφχψω"
MARKS = ("", "\u0301", "\u0300", "\u0342", "\u0313", "\u0314", "\u0313\u0301", "\u0314\u0342", "\u0345")
POLYTONIC = [
    unicodedata.normalize("NFC", b + m)
    for b in "αεηιουω"
    for m in MARKS
    if not (m == "\u0345" and b not in "αηω")
]
POLYTONIC = [c for c in POLYTONIC if len(c) == 1]
ALPHABET = list(GREEK_BASES) + POLYTONIC + [" ", ",", "·"]


def dp_edit_ops(ref, hyp) -> tuple[int, int, int]:
    """Quadratic DP, then a traceback preferring diagonal > up > left.

    Returns (substitutions, insertions, deletions).
    """
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(
                d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
            )
    s = ins = dels = 0
    i, j = n, m
    while i or j:
        if i and j and d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i and d[i][j] == d[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return s, ins, dels


def dp_distance(a, b) -> int:
    return sum(dp_edit_ops(a, b))


def brute_lcs(a, b) -> int:
    """Longest common subsequence by enumerating every subsequence of ``a``."""
    best = 0
    for k in range(len(a), 0, -1):
        for idx in itertools.combinations(range(len(a)), k):
            if _is_subsequence([a[i] for i in idx], b):
                return k
    return best


def _is_subsequence(seq, of) -> bool:
    it = iter(of)
    return all(any(x == y for y in it) for x in seq)


def f1_from_counts(matched: int, n_ref: int, n_hyp: int) -> float:
    if n_ref == 0 and n_hyp == 0:
        return 1.0
    if matched == 0:
        return 0.0
    p, r = matched / n_hyp, matched / n_ref
    return 2 * p * r / (p + r)


def oracle_similarity(a: str, b: str) -> float:
    if not a and not b:
        return 1.0
    return 1 - dp_distance(a, b) / max(len(a), len(b))


def exhaustive_splits(dense: str, pages: list[str]) -> list[int]:
    """Split ends maximizing exact suffix agreement, scanning every cut greedily."""
    ends, cursor = [], 0
    for page in pages:
        suffix = page[-min(40, len(page)):]
        scored = [
            (oracle_similarity(suffix, dense[max(0, e - len(suffix)):e]), -abs(e - cursor - len(page)), e)
            for e in range(cursor + 1, len(dense) + 1)
        ]
        best = max(scored)
        ends.append(best[2])
        cursor = best[2]
    return ends


def random_polytonic(rng: random.Random, n: int) -> str:
    return "".join(rng.choice(ALPHABET) for _ in range(n))


def perturb(text: str, n_errors: int, rng: random.Random, protect: int = 0) -> str:
    """Substitute ``n_errors`` distinct non-space characters (beyond index ``protect``)."""
    chars = list(text)
    positions = [i for i, c in enumerate(chars) if not c.isspace() and i >= protect]
    for i in rng.sample(positions, n_errors):
        chars[i] = next(c for c in "ξψζφχ" if c != chars[i])
    return "".join(chars)
