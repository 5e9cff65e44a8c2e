"""Reading SentiMix-style files, tweet normalisation and character encoding.

Input files hold one tweet per block::

    meta <uid> [<label>]
    <token><TAB><language tag>
    ...
    <blank line>

Language tags are parsed and kept on :class:`RawTweet` but nothing
downstream reads them.

Normalisation steps, in order:

1. lower-case;
2. drop URLs matching ``https?://\\S+`` or ``www\\.\\S+``;
3. drop emoji: every codepoint >= U+1F000 plus the ranges in
   :data:`EMOJI_RANGES`;
4. drop punctuation (Unicode categories ``P*``);
5. collapse whitespace runs to one space and strip the ends.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

LABELS = ("positive", "negative", "neutral")
LABEL_TO_ID = {name: i for i, name in enumerate(LABELS)}

PAD_ID = 0
UNK_ID = 1
DEFAULT_MAX_LEN = 280

URL_RE = re.compile(r"https?://\S+|www\.\S+")

# (first, last) inclusive codepoint ranges removed besides everything >= U+1F000
EMOJI_RANGES = (
    (0x200D, 0x200D),    # zero width joiner
    (0x20E3, 0x20E3),    # combining enclosing keycap
    (0x2190, 0x21FF),    # arrows
    (0x2300, 0x23FF),    # miscellaneous technical
    (0x2460, 0x24FF),    # enclosed alphanumerics
    (0x25A0, 0x25FF),    # geometric shapes
    (0x2600, 0x27BF),    # miscellaneous symbols, dingbats
    (0x2900, 0x297F),    # supplemental arrows-b
    (0x2B00, 0x2BFF),    # miscellaneous symbols and arrows
    (0x3030, 0x3030),    # wavy dash
    (0x303D, 0x303D),    # part alternation mark
    (0x3297, 0x3299),    # circled ideographs
    (0xFE00, 0xFE0F),    # variation selectors
)
EMOJI_FLOOR = 0x1F000


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class RawTweet:
    uid: str
    tokens: tuple[tuple[str, str], ...]
    label: str | None = None

    @property
    def text(self) -> str:
        return " ".join(tok for tok, _ in self.tokens)


@dataclass(frozen=True)
class Example:
    uid: str
    text: str
    char_ids: tuple[int, ...]
    label_id: int | None = None


@dataclass
class CharVocabulary:
    """Character to index mapping; 0 is padding and 1 is unknown."""

    char_to_id: dict[str, int] = field(default_factory=dict)
    id_to_char: list[str] = field(default_factory=lambda: ["<pad>", "<unk>"])

    @property
    def size(self) -> int:
        return len(self.id_to_char)

    def __len__(self):
        return self.size

    def __contains__(self, ch):
        return ch in self.char_to_id

    def add(self, ch: str) -> int:
        if ch not in self.char_to_id:
            self.char_to_id[ch] = len(self.id_to_char)
            self.id_to_char.append(ch)
        return self.char_to_id[ch]

    def decode(self, ids) -> str:
        return "".join(self.id_to_char[i] for i in ids if i >= 2)

    def to_dict(self) -> dict:
        return {"chars": self.id_to_char[2:]}

    @classmethod
    def from_dict(cls, d: dict) -> "CharVocabulary":
        vocab = cls()
        for ch in d["chars"]:
            vocab.add(ch)
        return vocab


def load_sentimix(path) -> list[RawTweet]:
    path = Path(path)
    tweets: list[RawTweet] = []
    uid = label = None
    tokens: list[tuple[str, str]] = []
    meta_line = 0

    def flush():
        if uid is None:
            return
        if not tokens:
            raise ParseError(f"{path}:{meta_line}: tweet {uid!r} has no tokens")
        tweets.append(RawTweet(uid, tuple(tokens), label))

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                flush()
                uid = label = None
                tokens = []
                continue
            if uid is None:
                parts = line.split()
                if parts[0] != "meta" or len(parts) not in (2, 3):
                    raise ParseError(f"{path}:{lineno}: malformed meta line {line!r}")
                uid = parts[1]
                label = parts[2] if len(parts) == 3 else None
                if label is not None and label not in LABEL_TO_ID:
                    raise ParseError(f"{path}:{lineno}: unknown label {label!r}")
                meta_line = lineno
                continue
            tok, _, tag = line.partition("\t")
            tokens.append((tok, tag))
    flush()
    return tweets


def _is_emoji(ch: str) -> bool:
    cp = ord(ch)
    if cp >= EMOJI_FLOOR:
        return True
    return any(lo <= cp <= hi for lo, hi in EMOJI_RANGES)


def normalize(text: str) -> str:
    text = text.lower()
    text = URL_RE.sub(" ", text)
    text = "".join(
        ch for ch in text
        if not _is_emoji(ch) and not unicodedata.category(ch).startswith("P")
    )
    return " ".join(text.split())


def build_vocab(texts) -> CharVocabulary:
    texts = list(texts)
    if not texts:
        raise ValueError("build_vocab: empty corpus")
    vocab = CharVocabulary()
    for text in texts:
        for ch in text:
            vocab.add(ch)
    return vocab


def encode(text: str, vocab: CharVocabulary, max_len: int = DEFAULT_MAX_LEN) -> list[int]:
    if max_len <= 0:
        raise ValueError(f"encode: max_len must be positive, got {max_len}")
    ids = [vocab.char_to_id.get(ch, UNK_ID) for ch in text[:max_len]]
    return ids + [PAD_ID] * (max_len - len(ids))


def to_examples(tweets, vocab: CharVocabulary, max_len: int = DEFAULT_MAX_LEN) -> list[Example]:
    out = []
    for tw in tweets:
        text = normalize(tw.text)
        label_id = LABEL_TO_ID[tw.label] if tw.label is not None else None
        out.append(Example(tw.uid, text, tuple(encode(text, vocab, max_len)), label_id))
    return out


def load_examples(path, vocab: CharVocabulary | None = None, max_len: int = DEFAULT_MAX_LEN):
    """Read, normalise and encode a file; builds the vocabulary when none is given."""
    tweets = load_sentimix(path)
    if vocab is None:
        vocab = build_vocab([normalize(t.text) for t in tweets])
    return to_examples(tweets, vocab, max_len), vocab
