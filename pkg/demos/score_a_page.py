"""Score one OCR hypothesis against an annotated reference page.

Run from the repository root:  python3 demos/score_a_page.py
"""

from structocr.markup import parse_markup, strip_markup
from structocr.metrics import aggregate, evaluate_page

REFERENCE = """# <ref>1</ref> ΠΕΡΙ ΑΡΧΩΝ
<tab/>Πάντες ἄνθρωποι τοῦ εἰδέναι ὀρέγονται φύσει. <ref>2</ref> σημεῖον δ' ἡ τῶν αἰσθήσεων ἀγάπησις
<note>fol. 205v</note> καὶ γὰρ χωρὶς τῆς χρείας ἀγαπῶνται δι' αὑτάς."""

# a plausible model output: one breathing confusion, a lost accent and a
# missing note.  The page opens with a heading, so no indentation case arises.
HYPOTHESIS = """# <ref>1</ref> ΠΕΡΙ ΑΡΧΩΝ
Πάντες ἄνθρωποι τοῦ εἰδεναι ὀρέγονται φύσει. <ref>2</ref> σημεῖον δ' ἡ τῶν αἰσθήσεων ἀγάπησις
καὶ γὰρ χωρὶς τῆς χρείας ἀγαπῶνται δι' αὐτάς."""


def main() -> None:
    ref = parse_markup(REFERENCE)
    print("stripped reference:")
    print(strip_markup(ref)[0])
    print()

    page = evaluate_page(ref, HYPOTHESIS)
    print(f"CER {page.cer:.2f}  WER {page.wer:.2f}")
    print(f"character edits: {page.char_ops.substitutions} sub, "
          f"{page.char_ops.insertions} ins, {page.char_ops.deletions} del")
    print(f"substituted pairs: {list(page.char_ops.sub_pairs)}")
    print()

    report = aggregate([page])
    for key, value in report.to_dict(ndigits=2).items():
        print(f"  {key:>10}: {value}")


if __name__ == "__main__":
    main()
