"""Black and colour-coded LuaLaTeX sources for one document and layout.

Both sources share one body.  Every piece of text is wrapped in
``\\chspan{<channel>}{<id>}{<text>}``; only the preamble region between the
``% BEGIN channel-directives`` and ``% END channel-directives`` markers
differs.  In the colour source ``\\chspan`` colours its text and records, at
shipout, the page on which span ``<id>`` landed; at the end of the run the
records are written to ``<jobname>.spans.jsonl`` in reading order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..markup import Block, PageDocument, SegmentKind
from .layout import LayoutCatalog, LayoutConfig, load_catalog, page_size
from .spans import Channel

DIRECTIVES_BEGIN = "% BEGIN channel-directives"
DIRECTIVES_END = "% END channel-directives"

CHANNEL_COLORS = {
    Channel.MAIN: "000000",
    Channel.REF: "E00000",
    Channel.NOTE: "0000E0",
    Channel.HEADING: "00A000",
    Channel.FOOTER: "E000E0",
    Channel.RUNNING_HEAD: "00B0B0",
    Channel.LINENO: "E08000",
}

_LATEX_SPECIALS = {
    "\\": r"\textbackslash{}",
    "{": r"\{",
    "}": r"\}",
    "#": r"\#",
    "$": r"\$",
    "%": r"\%",
    "&": r"\&",
    "_": r"\_",
    "^": r"\^{}",
    "~": r"\~{}",
}
_LATEX_RE = re.compile("|".join(re.escape(k) for k in _LATEX_SPECIALS))
_TOKEN_RE = re.compile(r"\s*\S+\s*|\s+")


class UnsupportedBlock(ValueError):
    pass


def latex_escape(text: str) -> str:
    return _LATEX_RE.sub(lambda m: _LATEX_SPECIALS[m.group(0)], text.replace("\n", " "))


@dataclass(frozen=True)
class PlannedSpan:
    """A unit of text that is typeset, coloured and logged as one span."""

    id: int
    channel: Channel
    text: str
    block: int  # index of the source block, -1 for page furniture
    bbox: tuple[float, float, float, float] | None = None


def plan_spans(blocks: Sequence[Block]) -> list[PlannedSpan]:
    """Split a document into loggable spans in reading order.

    Running text is split into word tokens (each keeps its trailing
    whitespace) so that page breaks fall between spans; refs and notes are
    single spans.  The last span of every block ends with a newline, so
    joining span texts reproduces the stripped document.
    """
    spans: list[PlannedSpan] = []
    for bi, block in enumerate(blocks):
        if not isinstance(block, Block):
            raise UnsupportedBlock(f"cannot typeset {type(block).__name__}")
        start = len(spans)
        for seg in block.segments:
            if seg.kind is SegmentKind.PLAIN:
                channel = Channel.HEADING if block.is_heading else Channel.MAIN
                for tok in _TOKEN_RE.findall(seg.content):
                    spans.append(PlannedSpan(len(spans) + 1, channel, tok, bi))
            else:
                channel = Channel.REF if seg.kind is SegmentKind.REF else Channel.NOTE
                spans.append(PlannedSpan(len(spans) + 1, channel, seg.content, bi))
        if len(spans) > start:
            last = spans[-1]
            spans[-1] = PlannedSpan(last.id, last.channel, last.text + "\n", bi)
    return spans


def furniture_boxes(config: LayoutConfig, catalog: LayoutCatalog):
    """Page regions of the running head and the footer, as (x, y, w, h) in points."""
    width, height = page_size(config, catalog)
    top, right, bottom, left = config.margins
    text_width = width - left - right
    return (left, 0.0, text_width, top), (left, height - bottom, text_width, bottom)


def furniture_spans(doc_id: str, first_id: int, config: LayoutConfig, catalog: LayoutCatalog):
    head_box, foot_box = furniture_boxes(config, catalog)
    return (
        PlannedSpan(first_id, Channel.RUNNING_HEAD, doc_id, -1, head_box),
        PlannedSpan(first_id + 1, Channel.FOOTER, doc_id, -1, foot_box),
    )


def _lua_long_string(text: str) -> str:
    level = 0
    while f"]{'=' * level}]" in text or text.endswith("]" + "=" * level):
        level += 1
    eq = "=" * level
    # a newline right after the opening bracket would be swallowed
    lead = "\n" if text.startswith("\n") else ""
    return f"[{eq}[{lead}{text}]{eq}]"


_LUA_LOGGER = r"""
local function esc(s)
  s = s:gsub('\\', '\\\\'):gsub('"', '\\"'):gsub('\n', '\\n'):gsub('\r', '\\r'):gsub('\t', '\\t')
  return s
end
function spanlog.mark(id)
  local page = tex.count["c@page"]
  local key = page .. ":" .. id
  if not spanlog.seen[key] then
    spanlog.seen[key] = true
    table.insert(spanlog.records, {page, id})
  end
end
function spanlog.flush()
  table.sort(spanlog.records, function(a, b)
    if a[1] ~= b[1] then return a[1] < b[1] end
    return a[2] < b[2]
  end)
  local f = io.open(tex.jobname .. ".spans.jsonl", "w")
  for _, r in ipairs(spanlog.records) do
    local page, id = r[1], r[2]
    local line = string.format('{"page": %d, "channel": "%s", "text": "%s"',
      page, spanlog.channel[id], esc(spanlog.text[id]))
    local b = spanlog.bbox[id]
    if b then
      line = line .. string.format(', "bbox": [%.2f, %.2f, %.2f, %.2f]', b[1], b[2], b[3], b[4])
    end
    f:write(line .. "}\n")
  end
  f:close()
end
""".strip("\n")

_LUA_NUMERALS = r"""
numerals = {}
local units = {"α", "β", "γ", "δ", "ε", "ϛ", "ζ", "η", "θ"}
local tens = {"ι", "κ", "λ", "μ", "ν", "ξ", "ο", "π", "ϟ"}
local hundreds = {"ρ", "σ", "τ", "υ", "φ", "χ", "ψ", "ω", "ϡ"}
function numerals.greek(n)
  local out = ""
  local h, t, u = math.floor(n / 100) % 10, math.floor(n / 10) % 10, n % 10
  if h > 0 then out = out .. hundreds[h] end
  if t > 0 then out = out .. tens[t] end
  if u > 0 then out = out .. units[u] end
  return out .. "ʹ"
end
""".strip("\n")

_NUMERAL_MACROS = {
    "arabic": r"\newcommand{\formatnumeral}[1]{\number#1}",
    "roman": r"\newcommand{\formatnumeral}[1]{\romannumeral#1}",
    "greek-alphabetic": r"\newcommand{\formatnumeral}[1]{\directlua{tex.sprint(numerals.greek(\number#1))}}",
}


def _directives(spans: Sequence[PlannedSpan], color: bool) -> list[str]:
    lines = [DIRECTIVES_BEGIN]
    for channel, hex_color in CHANNEL_COLORS.items():
        lines.append(rf"\definecolor{{ch-{channel.value}}}{{HTML}}{{{hex_color if color else '000000'}}}")
    if not color:
        lines.append(r"\newcommand{\chspan}[3]{{\color{ch-#1}#3}}")
        lines.append(DIRECTIVES_END)
        return lines
    lines.append(r"\begin{luacode*}")
    lines.append("spanlog = {records = {}, seen = {}, channel = {}, text = {}, bbox = {}}")
    for s in spans:
        lines.append(f'spanlog.channel[{s.id}] = "{s.channel.value}"')
        lines.append(f"spanlog.text[{s.id}] = {_lua_long_string(s.text)}")
        if s.bbox is not None:
            lines.append(f"spanlog.bbox[{s.id}] = {{{', '.join(f'{v:.2f}' for v in s.bbox)}}}")
    lines.append(_LUA_LOGGER)
    lines.append(r"\end{luacode*}")
    lines.append(r"\newcommand{\chspan}[3]{{\color{ch-#1}\latelua{spanlog.mark(#2)}#3}}")
    lines.append(r"\AddToHook{enddocument/afterlastpage}{\directlua{spanlog.flush()}}")
    lines.append(DIRECTIVES_END)
    return lines


def _span_tex(span: PlannedSpan, config: LayoutConfig, in_heading: bool) -> str:
    text = latex_escape(span.text)
    wrapped = rf"\chspan{{{span.channel.value}}}{{{span.id}}}{{{text}}}"
    if span.channel is Channel.NOTE:
        return rf"\marginpar{{\footnotesize {wrapped}}}"
    if span.channel is not Channel.REF or in_heading:
        return wrapped
    placement = config.ref_placement
    if placement == "inline":
        return rf"\chspan{{ref}}{{{span.id}}}{{\textbf{{{text}}}}}"
    if placement == "superscript":
        return rf"\chspan{{ref}}{{{span.id}}}{{\textsuperscript{{{text}}}}}"
    if placement == "margin-left":
        return rf"{{\reversemarginpar\marginpar{{\small {wrapped}}}}}"
    return rf"{{\normalmarginpar\marginpar{{\small {wrapped}}}}}"


def _body(blocks: Sequence[Block], spans: Sequence[PlannedSpan], config: LayoutConfig) -> list[str]:
    by_block: dict[int, list[PlannedSpan]] = {}
    for s in spans:
        by_block.setdefault(s.block, []).append(s)
    lines = []
    for bi, block in enumerate(blocks):
        parts = "".join(_span_tex(s, config, block.is_heading) for s in by_block.get(bi, []))
        if block.is_heading:
            if config.heading_alignment == "center":
                lines.append(rf"\begin{{center}}\headingfont {parts}\end{{center}}")
            else:
                lines.append(rf"\par\noindent{{\headingfont {parts}}}\par")
        else:
            lines.append(("\\par\\indent " if block.tab else "\\par\\noindent ") + parts)
    return lines


def emit_sources(
    doc: PageDocument | Sequence[Block],
    config: LayoutConfig,
    catalog: LayoutCatalog | None = None,
    doc_id: str = "document",
) -> tuple[str, str]:
    """Return ``(black_source, color_source)`` for ``doc`` typeset with ``config``."""
    blocks = list(doc.blocks if isinstance(doc, PageDocument) else doc)
    if not blocks:
        raise ValueError("cannot render an empty document")
    if catalog is None:
        catalog = load_catalog()
    spans = plan_spans(blocks)
    furniture = furniture_spans(doc_id, len(spans) + 1, config, catalog)
    head, foot = furniture

    width, height = page_size(config, catalog)
    top, right, bottom, left = config.margins
    marginpar = max(min(left, right) - 14.0, 24.0)
    size = config.base_font_size
    opts = "twocolumn" if config.columns == 2 else "onecolumn"
    font = catalog.font_family[config.font_family]
    background = catalog.background_template[config.background_template]

    preamble = [
        rf"\documentclass[{opts}]{{article}}",
        rf"% layout seed {config.seed}: {config.paper_format}, {config.font_family}, "
        rf"{config.background_template}, refs {config.ref_placement}",
        (
            rf"\usepackage[paperwidth={width:.2f}pt,paperheight={height:.2f}pt,"
            rf"top={top}pt,right={right}pt,bottom={bottom}pt,left={left}pt,"
            rf"marginparwidth={marginpar:.1f}pt,marginparsep=6pt,footskip={bottom / 2:.1f}pt]{{geometry}}"
        ),
        r"\usepackage{fontspec}",
        rf"\setmainfont{{{font}}}",
        r"\usepackage{xcolor}",
        r"\usepackage{fancyhdr}",
        r"\usepackage{luacode}",
    ]
    if config.line_number_interval:
        preamble.append(r"\usepackage{lineno}")
    preamble += [
        r"\begin{luacode*}",
        _LUA_NUMERALS,
        r"\end{luacode*}",
        _NUMERAL_MACROS[config.numeral_style],
        rf"\pagecolor[HTML]{{{background}}}",
        r"\newcommand{\headingfont}{\large\bfseries}",
    ]
    black = _directives([*spans, *furniture], color=False)
    color = _directives([*spans, *furniture], color=True)
    setup = [
        r"\pagestyle{fancy}",
        r"\fancyhf{}",
        r"\renewcommand{\headrulewidth}{0pt}",
        rf"\fancyhead[C]{{\small\chspan{{running-head}}{{{head.id}}}{{{latex_escape(head.text)}}}}}",
        (
            rf"\fancyfoot[C]{{\small\chspan{{footer}}{{{foot.id}}}{{{latex_escape(foot.text)} "
            r"\formatnumeral{\value{page}}}}"
        ),
        rf"\AtBeginDocument{{\fontsize{{{size}}}{{{size * 1.25:.2f}}}\selectfont}}",
        r"\begin{document}",
    ]
    if config.line_number_interval:
        setup += [
            r"\renewcommand{\linenumberfont}{\normalfont\tiny\color{ch-lineno}}",
            r"\renewcommand{\thelinenumber}{\formatnumeral{\value{linenumber}}}",
            rf"\modulolinenumbers[{config.line_number_interval}]",
            r"\linenumbers",
        ]
    body = _body(blocks, spans, config)
    tail = [r"\end{document}", ""]

    def assemble(directives: list[str]) -> str:
        return "\n".join(preamble + directives + setup + body + tail)

    return assemble(black), assemble(color)
