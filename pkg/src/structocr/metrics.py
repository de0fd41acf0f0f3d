"""Plain-text and structure scoring of transcriptions against references.

Text metrics are computed after stripping markup, NFKC normalization and
whitespace collapsing.  Rates are percentages normalized by reference
length, so they exceed 100 when a hypothesis is much longer than its
reference.
"""

from __future__ import annotations

import enum
import statistics
import unicodedata
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .markup import PageDocument, SegmentKind, normalize_text, parse_markup, strip_markup

BREATHINGS = frozenset({"\u0313", "\u0314"})
ACCENTS = frozenset({"\u0300", "\u0301", "\u0342"})
IOTA_SUBSCRIPT = frozenset({"\u0345"})

# field order of the JSON report, mirroring the published result tables
REPORT_FIELDS = (
    "cer_med", "cer_mean", "wer_med", "wer_mean",
    "hdr_f1", "ref_f1", "note_f1", "tab1_spec", "tab1_rec",
    "csub", "cins", "cdel", "wsub", "wins", "wdel",
    "br_pct", "ac_pct", "is_pct",
)


class Unit(str, enum.Enum):
    CHAR = "char"
    WORD = "word"


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class EditOps:
    substitutions: int
    insertions: int
    deletions: int
    unit: Unit
    ref_len: int
    sub_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if min(self.substitutions, self.insertions, self.deletions, self.ref_len) < 0:
            raise ValueError("edit counts must be non-negative")
        if len(self.sub_pairs) != self.substitutions:
            raise ValueError("one substitution pair is required per substitution")

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def hyp_len(self) -> int:
        return self.ref_len - self.deletions + self.insertions

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self.substitutions, self.insertions, self.deletions)


# -- edit distance -----------------------------------------------------------

def _encode(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> tuple[np.ndarray, np.ndarray]:
    codes: dict[Hashable, int] = {}
    r = np.fromiter((codes.setdefault(u, len(codes)) for u in ref), dtype=np.int64, count=len(ref))
    h = np.fromiter((codes.setdefault(u, len(codes)) for u in hyp), dtype=np.int64, count=len(hyp))
    return r, h


def _next_row(prev: np.ndarray, i: int, mismatch: np.ndarray, steps: np.ndarray) -> np.ndarray:
    # D[i, j] = min(D[i-1, j-1] + cost, D[i-1, j] + 1, D[i, j-1] + 1); the
    # left-to-right insertion chain is a running minimum of (D - j)
    cand = np.minimum(prev[:-1] + mismatch, prev[1:] + 1)
    row = np.concatenate(([i], cand))
    return np.minimum.accumulate(row - steps) + steps


def _distance_matrix(r: np.ndarray, h: np.ndarray) -> np.ndarray:
    n, m = len(r), len(h)
    dtype = np.uint16 if n + m < np.iinfo(np.uint16).max else np.int32
    dist = np.empty((n + 1, m + 1), dtype=dtype)
    steps = np.arange(m + 1, dtype=np.int64)
    row = steps.copy()
    dist[0] = row
    for i in range(1, n + 1):
        row = _next_row(row, i, (h != r[i - 1]).astype(np.int64), steps)
        dist[i] = row
    return dist


def levenshtein_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Unit-cost edit distance, computed in linear memory."""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    r, h = _encode(a, b)
    steps = np.arange(len(h) + 1, dtype=np.int64)
    row = steps.copy()
    for i in range(1, len(r) + 1):
        row = _next_row(row, i, (h != r[i - 1]).astype(np.int64), steps)
    return int(row[-1])


def levenshtein_align(
    ref: Sequence[str], hyp: Sequence[str], unit: Unit = Unit.CHAR
) -> EditOps:
    """Minimal edit script from ``ref`` to ``hyp``, decomposed by operation.

    Among equally short scripts the traceback prefers, at every cell,
    substitution (or match) over deletion over insertion, so the recorded
    substitution pairs are reproducible.
    """
    r, h = _encode(ref, hyp)
    dist = _distance_matrix(r, h)
    i, j = len(r), len(h)
    subs = ins = dels = 0
    pairs: list[tuple[str, str]] = []
    while i > 0 or j > 0:
        here = int(dist[i, j])
        if i > 0 and j > 0:
            cost = int(r[i - 1] != h[j - 1])
            if here == int(dist[i - 1, j - 1]) + cost:
                if cost:
                    subs += 1
                    pairs.append((ref[i - 1], hyp[j - 1]))
                i -= 1
                j -= 1
                continue
        if i > 0 and here == int(dist[i - 1, j]) + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    pairs.reverse()
    return EditOps(subs, ins, dels, Unit(unit), len(ref), tuple(pairs))


def error_rate(ops: EditOps) -> float:
    """Edit distance per 100 reference units.

    With an empty reference the rate is 0 for an empty hypothesis and
    ``100 * len(hyp)`` otherwise.
    """
    if ops.ref_len == 0:
        return 100.0 * ops.hyp_len
    return 100.0 * ops.distance / ops.ref_len


def words(text: str) -> list[str]:
    """Split already-normalized text on its single spaces."""
    return text.split(" ") if text else []


# -- diacritics --------------------------------------------------------------

@dataclass(frozen=True)
class DiacriticBreakdown:
    """Diacritic confusion shares, in percent of all character substitutions."""

    breathing_pct: float
    accent_pct: float
    iota_pct: float
    n_substitutions: int = 0
    breathing: int = 0
    accent: int = 0
    iota: int = 0


def _split_marks(ch: str) -> tuple[str, Counter] | None:
    decomposed = unicodedata.normalize("NFD", ch)
    base, marks = decomposed[0], decomposed[1:]
    if unicodedata.combining(base) or any(not unicodedata.combining(c) for c in marks):
        return None
    return base, Counter(marks)


def _is_greek_letter(ch: str) -> bool:
    return unicodedata.category(ch).startswith("L") and unicodedata.name(ch, "").startswith("GREEK")


def diacritic_categories(ref_unit: str, hyp_unit: str) -> frozenset[str]:
    """Categories ("breathing", "accent", "iota") a substituted pair falls into.

    Only pairs whose base Greek letters match and whose combining marks
    differ are eligible.  Input may be in any normalization form.
    """
    a, b = _split_marks(ref_unit), _split_marks(hyp_unit)
    if a is None or b is None:
        return frozenset()
    (base_a, marks_a), (base_b, marks_b) = a, b
    if base_a != base_b or not _is_greek_letter(base_a) or marks_a == marks_b:
        return frozenset()
    diff = set((marks_a - marks_b) + (marks_b - marks_a))
    cats = set()
    if diff == BREATHINGS:
        cats.add("breathing")
    if diff and diff <= ACCENTS:
        cats.add("accent")
    if diff == IOTA_SUBSCRIPT:
        cats.add("iota")
    return frozenset(cats)


def classify_diacritics(sub_pairs: Iterable[tuple[str, str]]) -> DiacriticBreakdown:
    counts: Counter = Counter()
    total = 0
    for ref_unit, hyp_unit in sub_pairs:
        total += 1
        counts.update(diacritic_categories(ref_unit, hyp_unit))

    def pct(key: str) -> float:
        return 100.0 * counts[key] / total if total else 0.0

    return DiacriticBreakdown(
        pct("breathing"), pct("accent"), pct("iota"),
        total, counts["breathing"], counts["accent"], counts["iota"],
    )


# -- structure ---------------------------------------------------------------

def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _prf(matched: int, n_ref: int, n_hyp: int) -> tuple[float, float, float]:
    if n_ref == 0 and n_hyp == 0:
        return 1.0, 1.0, 1.0
    p = matched / n_hyp if n_hyp else 0.0
    r = matched / n_ref if n_ref else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def lcs_f1(ref_items: Sequence[str], hyp_items: Sequence[str]) -> tuple[float, float, float, int]:
    """Precision, recall and F1 of items matched in reading order, plus the LCS length."""
    lcs = lcs_length(ref_items, hyp_items)
    p, r, f1 = _prf(lcs, len(ref_items), len(hyp_items))
    return p, r, f1, lcs


def header_count_f1(ref_count: int, hyp_count: int) -> float:
    return _prf(min(ref_count, hyp_count), ref_count, hyp_count)[2]


def tab_case(ref_doc: PageDocument, hyp_doc: PageDocument) -> tuple[bool, bool] | None:
    """Indentation case for the opening paragraph of a page.

    Only pages whose reference starts with a paragraph (it might continue
    the previous page) produce a case.
    """
    if not ref_doc.blocks or not ref_doc.blocks[0].is_paragraph:
        return None
    predicted = next((b.tab for b in hyp_doc.blocks if b.is_paragraph), False)
    return ref_doc.blocks[0].tab, predicted


# -- page and corpus evaluation ----------------------------------------------

@dataclass(frozen=True)
class PageRecord:
    cer: float
    wer: float
    char_ops: EditOps
    word_ops: EditOps
    ref_lcs: int
    hyp_ref_count: int
    ref_ref_count: int
    note_lcs: int
    hyp_note_count: int
    ref_note_count: int
    header_counts: tuple[int, int]
    tab_case: tuple[bool, bool] | None = None
    work_id: str | None = None
    page_no: int | None = None

    def as_row(self) -> dict:
        """Flat dict for CSV export."""
        should, predicted = self.tab_case if self.tab_case else ("", "")
        return {
            "work_id": self.work_id or "",
            "page_no": self.page_no if self.page_no is not None else "",
            "cer": round(self.cer, 4),
            "wer": round(self.wer, 4),
            "csub": self.char_ops.substitutions,
            "cins": self.char_ops.insertions,
            "cdel": self.char_ops.deletions,
            "chars": self.char_ops.ref_len,
            "wsub": self.word_ops.substitutions,
            "wins": self.word_ops.insertions,
            "wdel": self.word_ops.deletions,
            "words": self.word_ops.ref_len,
            "ref_lcs": self.ref_lcs,
            "ref_ref": self.ref_ref_count,
            "ref_hyp": self.hyp_ref_count,
            "note_lcs": self.note_lcs,
            "note_ref": self.ref_note_count,
            "note_hyp": self.hyp_note_count,
            "hdr_ref": self.header_counts[0],
            "hdr_hyp": self.header_counts[1],
            "tab_should": should,
            "tab_predicted": predicted,
        }


def _items(doc: PageDocument, kind: SegmentKind) -> list[str]:
    return [normalize_text(c) for c in doc.items(kind)]


def evaluate_page(ref: PageDocument, hyp_text: str, include_notes: bool = True) -> PageRecord:
    """Score raw model output for one page against its parsed reference."""
    hyp = parse_markup(hyp_text, lenient=True)
    ref_plain = normalize_text(strip_markup(ref, include_notes)[0])
    hyp_plain = normalize_text(strip_markup(hyp, include_notes)[0])

    char_ops = levenshtein_align(ref_plain, hyp_plain, Unit.CHAR)
    word_ops = levenshtein_align(words(ref_plain), words(hyp_plain), Unit.WORD)

    ref_refs, hyp_refs = _items(ref, SegmentKind.REF), _items(hyp, SegmentKind.REF)
    ref_notes, hyp_notes = _items(ref, SegmentKind.NOTE), _items(hyp, SegmentKind.NOTE)

    return PageRecord(
        cer=error_rate(char_ops),
        wer=error_rate(word_ops),
        char_ops=char_ops,
        word_ops=word_ops,
        ref_lcs=lcs_length(ref_refs, hyp_refs),
        hyp_ref_count=len(hyp_refs),
        ref_ref_count=len(ref_refs),
        note_lcs=lcs_length(ref_notes, hyp_notes),
        hyp_note_count=len(hyp_notes),
        ref_note_count=len(ref_notes),
        header_counts=(len(ref.headings), len(hyp.headings)),
        tab_case=tab_case(ref, hyp),
        work_id=ref.work_id,
        page_no=ref.page_no,
    )


def _evaluate_star(args: tuple[PageDocument, str, bool]) -> PageRecord:
    return evaluate_page(*args)


def evaluate_pages(
    pairs: Sequence[tuple[PageDocument, str]], include_notes: bool = True, workers: int = 1
) -> list[PageRecord]:
    """Evaluate many pages, optionally in a process pool; order is preserved."""
    jobs = [(ref, hyp, include_notes) for ref, hyp in pairs]
    if workers <= 1 or len(jobs) < 2:
        return [_evaluate_star(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs, chunksize=8))


@dataclass(frozen=True)
class EvalReport:
    cer_median: float
    cer_mean: float
    wer_median: float
    wer_mean: float
    ref_f1: float
    note_f1: float
    header_f1: float
    tab_specificity: float | None
    tab_recall: float | None
    char_edit_rates: tuple[float, float, float]
    word_edit_rates: tuple[float, float, float]
    diacritics: DiacriticBreakdown
    n_pages: int
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self, ndigits: int | None = None) -> dict:
        def r(x):
            if x is None or ndigits is None:
                return x
            return round(x, ndigits)

        values = (
            self.cer_median, self.cer_mean, self.wer_median, self.wer_mean,
            self.header_f1, self.ref_f1, self.note_f1, self.tab_specificity, self.tab_recall,
            *self.char_edit_rates, *self.word_edit_rates,
            self.diacritics.breathing_pct, self.diacritics.accent_pct, self.diacritics.iota_pct,
        )
        out = {k: r(v) for k, v in zip(REPORT_FIELDS, values)}
        out["n_pages"] = self.n_pages
        out.update(self.extra)
        return out


def _per_100(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


def _ratio_pct(num: int, den: int) -> float | None:
    return 100.0 * num / den if den else None


def aggregate(records: Sequence[PageRecord]) -> EvalReport:
    """Corpus report: median/mean rates, micro-averaged structure F1s."""
    if not records:
        raise EmptyInput("cannot aggregate an empty list of page records")
    cers = [rec.cer for rec in records]
    wers = [rec.wer for rec in records]

    def micro_f1(matched: int, n_ref: int, n_hyp: int) -> float:
        return 100.0 * _prf(matched, n_ref, n_hyp)[2]

    ref_f1 = micro_f1(
        sum(r.ref_lcs for r in records),
        sum(r.ref_ref_count for r in records),
        sum(r.hyp_ref_count for r in records),
    )
    note_f1 = micro_f1(
        sum(r.note_lcs for r in records),
        sum(r.ref_note_count for r in records),
        sum(r.hyp_note_count for r in records),
    )
    hdr_f1 = micro_f1(
        sum(min(r.header_counts) for r in records),
        sum(r.header_counts[0] for r in records),
        sum(r.header_counts[1] for r in records),
    )

    cases = [r.tab_case for r in records if r.tab_case is not None]
    no_tab = [pred for should, pred in cases if not should]
    tab = [pred for should, pred in cases if should]
    spec = _ratio_pct(sum(not p for p in no_tab), len(no_tab))
    rec = _ratio_pct(sum(tab), len(tab))

    chars = sum(r.char_ops.ref_len for r in records)
    wtotal = sum(r.word_ops.ref_len for r in records)
    char_rates = tuple(
        _per_100(sum(getattr(r.char_ops, f) for r in records), chars)
        for f in ("substitutions", "insertions", "deletions")
    )
    word_rates = tuple(
        _per_100(sum(getattr(r.word_ops, f) for r in records), wtotal)
        for f in ("substitutions", "insertions", "deletions")
    )
    diacritics = classify_diacritics(p for r in records for p in r.char_ops.sub_pairs)

    return EvalReport(
        cer_median=statistics.median(cers),
        cer_mean=statistics.fmean(cers),
        wer_median=statistics.median(wers),
        wer_mean=statistics.fmean(wers),
        ref_f1=ref_f1,
        note_f1=note_f1,
        header_f1=hdr_f1,
        tab_specificity=spec,
        tab_recall=rec,
        char_edit_rates=char_rates,
        word_edit_rates=word_rates,
        diacritics=diacritics,
        n_pages=len(records),
    )
