"""Run configuration: an INI-style file of ``key = value`` pairs grouped in sections.

Defaults are the reference hyperparameters (32 filters, kernel 3,
pool 3, LSTM width 100, dense 32 with dropout 0.5, Adam lr 1e-4, batch 10).
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace

MODELS = ("genma", "charcnn", "svm")


def _key(section, default):
    return field(default=default, metadata={"section": section})


@dataclass(frozen=True)
class RunConfig:
    model: str = _key("run", "genma")
    seed: int = _key("run", 0)
    out: str = _key("run", "runs")
    max_len: int = _key("run", 280)

    train: str = _key("data", "")
    valid: str = _key("data", "")
    test: str = _key("data", "")

    embed_dim: int = _key("model", 50)
    filters: int = _key("model", 32)
    kernel: int = _key("model", 3)
    pool: int = _key("model", 3)
    lstm_hidden: int = _key("model", 100)
    dense: int = _key("model", 32)
    dropout: float = _key("model", 0.5)
    combine: str = _key("model", "concat")

    lr: float = _key("train", 0.0001)
    batch_size: int = _key("train", 10)
    epochs: int = _key("train", 10)
    patience: int = _key("train", 3)
    shuffle: bool = _key("train", True)

    svm_lambda: float = _key("svm", 0.0001)
    svm_epochs: int = _key("svm", 10)

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")

    def override(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **kw)


_FIELDS = {f.name: f for f in fields(RunConfig)}
SECTIONS = tuple(dict.fromkeys(f.metadata["section"] for f in fields(RunConfig)))


def _convert(name, raw):
    kind = _FIELDS[name].type
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(text)
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise KeyError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            f = _FIELDS.get(key)
            if f is None or f.metadata["section"] != section:
                raise KeyError(f"unknown config key {key!r} in [{section}]")
            values[key] = _convert(key, raw)
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def serialize_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SECTIONS:
        parser.add_section(section)
    for f in fields(cfg):
        parser.set(f.metadata["section"], f.name, _format(getattr(cfg, f.name)))
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
