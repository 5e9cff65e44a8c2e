"""Character-level attention rendering for terminals and static HTML.

Bands follow the red / blue / plain reading: ``high`` characters are red,
``medium`` blue, ``low`` uncoloured.

ANSI codes: high ``ESC[31m``, medium ``ESC[34m``; every run of equal band ends
with ``ESC[0m``.

HTML structure (stable class names for parsing)::

    <div class="example" data-index="i">
      <p class="text"><span class="ch" data-weight="w" data-band="b"
         style="background-color: rgba(255, 0, 0, OPACITY)">c</span>...</p>
      <table class="top-weights"><tr><td class="pos">p</td>
         <td class="span">a-b</td><td class="weight">w</td></tr>...</table>
    </div>

where OPACITY = weight / max weight within the example.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass

import numpy as np

RED = "\x1b[31m"
BLUE = "\x1b[34m"
RESET = "\x1b[0m"
BAND_CODES = {"high": RED, "medium": BLUE, "low": ""}
ANSI_RE = re.compile(r"\x1b\[[0-9;]*m")

# quantile levels: >= q(0.90) is high, >= q(0.65) medium, rest (and the minimum) low
DEFAULT_BANDS = (0.90, 0.65)


@dataclass
class AttentionMap:
    text: str
    char_weights: np.ndarray
    pooled_weights: np.ndarray
    spans: list[tuple[int, int]]

    @classmethod
    def project(cls, text, pooled, spans, mask=None):
        """Give each character the largest weight among positions covering it."""
        pooled = np.asarray(pooled, dtype=np.float64)
        mask = np.ones(len(pooled), dtype=bool) if mask is None else np.asarray(mask)
        cw = np.zeros(len(text))
        for p, (lo, hi) in enumerate(spans):
            if not mask[p]:
                continue
            lo, hi = min(lo, len(text)), min(hi, len(text))
            if hi > lo:
                np.maximum(cw[lo:hi], pooled[p], out=cw[lo:hi])
        return cls(text, cw, pooled, list(spans))


def rank_characters(amap: AttentionMap, bands=DEFAULT_BANDS) -> list[str]:
    if not amap.text:
        raise ValueError("rank_characters: empty text")
    hi_q, mid_q = bands
    w = np.asarray(amap.char_weights)
    hi_t = np.quantile(w, hi_q)
    mid_t = np.quantile(w, mid_q)
    # a tie with the minimum never lifts a character out of the low band, so a
    # flat background stays plain even when it fills the upper quantiles
    floor = w.min()
    return ["high" if v >= hi_t and v > floor else
            "medium" if v >= mid_t and v > floor else "low" for v in w]


def render_ansi(amap: AttentionMap, bands=DEFAULT_BANDS) -> str:
    if not amap.text:
        return ""
    labels = rank_characters(amap, bands)
    out, start = [], 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            out.append(BAND_CODES[labels[start]] + amap.text[start:i] + RESET)
            start = i
    return "".join(out)


def strip_ansi(s: str) -> str:
    return ANSI_RE.sub("", s)


_STYLE = """body { font-family: monospace; }
.example { margin-bottom: 1.5em; }
.ch { white-space: pre; }
table.top-weights { border-collapse: collapse; font-size: 0.8em; }
table.top-weights td { padding: 0 0.6em; }"""


def _example_html(i, amap, bands):
    w = np.asarray(amap.char_weights)
    top = float(w.max()) if len(w) else 0.0
    labels = rank_characters(amap, bands) if amap.text else []
    spans = []
    for ch, v, band in zip(amap.text, w, labels):
        opacity = v / top if top > 0 else 0.0
        spans.append(
            f'<span class="ch" data-weight="{v:.6g}" data-band="{band}" '
            f'style="background-color: rgba(255, 0, 0, {opacity:.4f})">'
            f"{html.escape(ch)}</span>")
    rows = []
    pooled = np.asarray(amap.pooled_weights)
    for p in np.argsort(-pooled, kind="stable")[:10]:
        lo, hi = amap.spans[p]
        rows.append(f'<tr><td class="pos">{p}</td><td class="span">{lo}-{hi - 1}</td>'
                    f'<td class="weight">{pooled[p]:.4f}</td></tr>')
    return (f'<div class="example" data-index="{i}">\n'
            f'<p class="text">{"".join(spans)}</p>\n'
            f'<table class="top-weights">{"".join(rows)}</table>\n</div>')


def render_html(maps, out, bands=DEFAULT_BANDS):
    body = "\n".join(_example_html(i, m, bands) for i, m in enumerate(maps))
    doc = ("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
           f"<title>Character attention</title>\n<style>\n{_STYLE}\n</style>\n"
           f"</head>\n<body>\n{body}\n</body>\n</html>\n")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(doc)
