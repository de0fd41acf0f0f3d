"""Corpus statistics, reference systems, cross-page merging and splits.

Run from the repository root:  python3 demos/corpus_tools.py
"""

from collections import Counter
from pathlib import Path

from structocr.corpus import apply_splits, assign_splits, classify_reference_system, corpus_stats, merge_document
from structocr.corpus import read_manifest
from structocr.markup import parse_markup, serialize_markup

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def main() -> None:
    records = read_manifest(FIXTURES / "stats_manifest.jsonl")
    print("statistics of the 12-page fixture:", corpus_stats(records).to_dict())

    works = {}
    for rec in records:
        works.setdefault(rec.work_id, []).append(rec.document())
    for work, pages in works.items():
        print(f"work {work!r}: {classify_reference_system(pages).value} reference system")

    # a paragraph broken across a page, hyphenated mid-word
    page1 = parse_markup("# <ref>3</ref> ΠΕΡΙ ΨΥΧΗΣ\n<tab/>τῶν καλῶν καὶ τιμίων τὴν εἴδησιν ὑπολαμ-")
    page2 = parse_markup("βάνοντες <ref>2</ref> μᾶλλον δ' ἑτέραν ἑτέρας\n<tab/>καὶ ἄλλη ἀρχή")
    print("\nmerged document:")
    print(serialize_markup(merge_document([page1, page2])))

    splits = assign_splits([f"group{i:02d}" for i in range(20)], seed=0)
    print("\nsplit sizes over 20 document groups:", dict(Counter(s.value for s in splits.values())))
    resplit = apply_splits(records, assign_splits([r.work_id for r in records], seed=1))
    print("fixture works after a seeded split:", sorted({(r.work_id, r.split.value) for r in resplit}))


if __name__ == "__main__":
    main()
