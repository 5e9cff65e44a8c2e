"""Seeded synthetic code-mixed tweets in the SentiMix block format.

The real task corpus cannot ship with the package, so tests and the CLI demo
use tweets drawn from a small template grammar::

    tweet   := piece{4..8} with 2 sentiment words of the tweet's class
    piece   := filler_en | filler_hi | sentiment word | decoration
    decoration := @mention | #hashtag | URL | emoji | "!!" suffix

Filler words come from two pseudo-language lexicons (English and romanised
Hindi) and carry ``en`` / ``hi`` tags; decorations carry ``univ``. Sentiment
words of different classes never overlap, so every generated corpus is
separable by character content.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from genma.corpus import LABELS

FILLER = {
    "en": ["the", "today", "match", "vote", "people", "news", "this", "is", "so",
           "what", "time", "again", "city", "team", "movie", "for"],
    "hi": ["ka", "hai", "bhai", "yaar", "kya", "aaj", "sab", "kuch", "wala", "nahi",
           "toh", "bhi", "mein", "log", "abhi", "par"],
}

SENTIMENT = {
    "positive": {"en": ["love", "great", "awesome", "happy", "best"],
                 "hi": ["badhiya", "mast", "khush", "shandaar", "pyaar"]},
    "negative": {"en": ["hate", "worst", "angry", "sad", "terrible"],
                 "hi": ["bakwas", "bura", "gussa", "dukhi", "bekaar"]},
    "neutral": {"en": ["meeting", "office", "schedule", "report", "update"],
                "hi": ["ghar", "kal", "samay", "jagah", "baat"]},
}

EMOJI = ["\U0001F600", "\U0001F622", "\U0001F621", "❤️", "\U0001F44D"]


def _tweet(rng, label):
    n_pieces = int(rng.integers(4, 9))
    slots = set(rng.choice(n_pieces, size=2, replace=False).tolist())
    tokens = []
    for i in range(n_pieces):
        lang = "en" if rng.random() < 0.5 else "hi"
        if i in slots:
            words = SENTIMENT[label][lang]
            word = words[int(rng.integers(len(words)))]
            if rng.random() < 0.3:
                word += "!!"
            tokens.append((word, lang))
        else:
            tokens.append((FILLER[lang][int(rng.integers(len(FILLER[lang])))], lang))
        if rng.random() < 0.12:
            kind = int(rng.integers(4))
            if kind == 0:
                tokens.append(("@" + FILLER["en"][int(rng.integers(16))], "univ"))
            elif kind == 1:
                tokens.append(("#" + FILLER["hi"][int(rng.integers(16))], "univ"))
            elif kind == 2:
                tokens.append((f"https://t.co/{int(rng.integers(10**6)):06d}", "univ"))
            else:
                tokens.append((EMOJI[int(rng.integers(len(EMOJI)))], "univ"))
    return tokens


def generate(n: int, seed: int, labelled: bool = True) -> str:
    """Block-format text for ``n`` tweets, classes balanced round-robin."""
    rng = np.random.default_rng(seed)
    blocks = []
    for i in range(n):
        label = LABELS[i % len(LABELS)]
        head = f"meta\t{i + 1}\t{label}" if labelled else f"meta\t{i + 1}"
        body = "\n".join(f"{tok}\t{tag}" for tok, tag in _tweet(rng, label))
        blocks.append(f"{head}\n{body}\n")
    return "\n".join(blocks)


DATA_DIR = Path(__file__).parent / "data"

# name -> (tweet count, seed)
BUNDLED = {
    "sentimix_fixture.txt": (60, 7),
    "fixture_valid.txt": (15, 8),
    "separable_30.txt": (30, 11),
}


def fixture_path(name: str) -> Path:
    if name not in BUNDLED:
        raise KeyError(f"unknown fixture {name!r}")
    return DATA_DIR / name


def write_bundled(directory=DATA_DIR):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, (n, seed) in BUNDLED.items():
        (directory / name).write_text(generate(n, seed), encoding="utf-8")


if __name__ == "__main__":
    write_bundled()
