"""Random generators for valid and corrupted markup documents."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from structocr.markup import Block, InlineSegment, PageDocument, TAG_LITERALS

# deliberately includes markup-ish noise that must stay literal text
PLAIN_CHARS = "αβγδεζηθικλμνοπρστυφχψω ἀἁάὰᾶᾳῆῷ ·,.;<>/#-tabrefnote"


def _ok(text: str) -> bool:
    return not any(t in text for t in TAG_LITERALS)


def random_block(rng: random.Random) -> Block:
    while True:
        segs = []
        for _ in range(rng.randint(1, 6)):
            kind = rng.choices(("plain", "ref", "note"), weights=(5, 2, 1))[0]
            n = rng.randint(1, 12)
            text = "".join(rng.choice(PLAIN_CHARS) for _ in range(n))
            if not _ok(text):
                continue
            segs.append(getattr(InlineSegment, kind)(text))
        heading = rng.random() < 0.2
        try:
            if heading:
                return Block.heading(segs)
            return Block.paragraph(segs, tab=rng.random() < 0.6)
        except ValueError:
            continue  # e.g. blank untabbed paragraph or tag literal formed by merging


def random_document(rng: random.Random, max_blocks: int = 8) -> PageDocument:
    return PageDocument(tuple(random_block(rng) for _ in range(rng.randint(0, max_blocks))))


CORRUPTION_ALPHABET = ["<ref>", "</ref>", "<note>", "</note>", "<tab/>", "# ", "\n", "\r\n", "<", ">", "α", " ", "ῷ", "x"]


def random_corrupted(rng: random.Random, max_tokens: int = 30) -> str:
    return "".join(rng.choice(CORRUPTION_ALPHABET) for _ in range(rng.randint(0, max_tokens)))


@st.composite
def documents(draw, max_blocks: int = 8) -> PageDocument:
    return random_document(random.Random(draw(st.integers(0, 2**32 - 1))), max_blocks)


corrupted_strings = st.lists(st.sampled_from(CORRUPTION_ALPHABET), max_size=30).map("".join) | st.text(max_size=60)
