"""GenMA and char-CNN architectures, prediction, attention extraction, checkpoints."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from genma import tensor as tn
from genma.attnviz import AttentionMap
from genma.corpus import CharVocabulary, Example, PAD_ID
from genma.layers import (BiLSTMLayer, Conv1DLayer, DenseLayer, EmbeddingLayer,
                          MaxPool1DLayer, SelfAttentionLayer)
from genma.tensor import ShapeError, Tensor

N_CLASSES = 3
CHECKPOINT_MAGIC = b"GENMA-CHECKPOINT 1\n"


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    vocab_size: int
    max_len: int = 280
    embedding: str = "learned"
    embed_dim: int = 50
    conv: tuple = ((32, 3), (32, 3))
    pool: int = 3
    lstm_hidden: int = 100
    dense: int = 32
    dropout: float = 0.5
    n_classes: int = N_CLASSES
    combine: str = "concat"

    @classmethod
    def genma(cls, vocab_size, **kw):
        return cls("genma", vocab_size, **kw)

    @classmethod
    def charcnn(cls, vocab_size, **kw):
        kw.setdefault("embedding", "onehot")
        kw.setdefault("conv", ((32, 3),) * 4)
        return cls("charcnn", vocab_size, **kw)

    def to_dict(self):
        d = asdict(self)
        d["conv"] = [list(c) for c in self.conv]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["conv"] = tuple(tuple(c) for c in d["conv"])
        return cls(**d)

    def validate(self):
        if self.architecture not in ("genma", "charcnn"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"class count is fixed at {N_CLASSES}, got {self.n_classes}")
        want = 2 if self.architecture == "genma" else 4
        if len(self.conv) != want:
            raise ValueError(f"{self.architecture} needs {want} conv layers, got {len(self.conv)}")
        shape_chain(self)


def _pooled_after(spec, i):
    # genma pools after every conv; charcnn after all but the last
    return spec.architecture == "genma" or i < len(spec.conv) - 1


def shape_chain(spec: ModelSpec) -> list[tuple[str, tuple]]:
    """Per-stage output shapes for one input; raises ShapeError on a dead end."""
    m = spec.max_len
    emb = spec.vocab_size if spec.embedding == "onehot" else spec.embed_dim
    chain = [("input", (m,)), ("embed", (m, emb))]
    f = emb
    for i, (filters, k) in enumerate(spec.conv, start=1):
        s = m - k + 1
        if s < 1:
            raise ShapeError(f"conv{i}: m - k + 1 = {m} - {k} + 1 = {s} < 1")
        m, f = s, filters
        chain.append((f"conv{i}", (m, f)))
        if _pooled_after(spec, i - 1):
            d = m // spec.pool
            if d < 1:
                raise ShapeError(f"pool{i}: floor(s / {spec.pool}) = floor({m} / {spec.pool}) = 0")
            m = d
            chain.append((f"pool{i}", (m, f)))
    if spec.architecture == "genma":
        width = 2 * spec.lstm_hidden if spec.combine == "concat" else spec.lstm_hidden
        chain.append(("bilstm", (m, width)))
        chain.append(("attention", (width,)))
    else:
        chain.append(("flatten", (m * f,)))
    chain.append(("dense", (spec.dense,)))
    chain.append(("softmax", (spec.n_classes,)))
    return chain


def receptive_field(spec: ModelSpec, stage: str | None = None) -> tuple[int, int]:
    """(stride, width) in characters of one position at ``stage`` (default: the last pool)."""
    stride, width = 1, 1
    last = None
    for i, (_, k) in enumerate(spec.conv, start=1):
        width += (k - 1) * stride
        if stage == f"conv{i}":
            return stride, width
        if _pooled_after(spec, i - 1):
            width += (spec.pool - 1) * stride
            stride *= spec.pool
            last = (stride, width)
            if stage == f"pool{i}":
                return stride, width
    if stage is not None:
        raise ValueError(f"unknown stage {stage!r}")
    return last


def receptive_spans(spec: ModelSpec, n_positions: int) -> list[tuple[int, int]]:
    stride, width = receptive_field(spec)
    return [(p * stride, p * stride + width) for p in range(n_positions)]


class Model:
    def __init__(self, spec: ModelSpec, seed: int = 0, vocab: CharVocabulary | None = None):
        spec.validate()
        self.spec = spec
        self.seed = seed
        self.vocab = vocab
        rng = np.random.default_rng(seed)
        self.embedding = EmbeddingLayer(spec.vocab_size, spec.embedding, spec.embed_dim, rng)
        self.convs, self.pools = [], []
        ch = self.embedding.dim
        for i, (filters, k) in enumerate(spec.conv, start=1):
            self.convs.append(Conv1DLayer(ch, filters, k, rng, prefix=f"conv{i}"))
            ch = filters
        self.pool = MaxPool1DLayer(spec.pool)
        chain = dict(shape_chain(spec))
        if spec.architecture == "genma":
            self.lstm = BiLSTMLayer(ch, spec.lstm_hidden, rng, combine=spec.combine)
            self.attention = SelfAttentionLayer(self.lstm.out_dim, rng)
            hidden_in = self.lstm.out_dim
        else:
            self.lstm = self.attention = None
            hidden_in = chain["flatten"][0]
        self.hidden = DenseLayer(hidden_in, spec.dense, rng, prefix="dense",
                                 dropout=spec.dropout)
        self.output = DenseLayer(spec.dense, spec.n_classes, rng, prefix="output",
                                 activation=None, dropout=0.0)
        self.n_positions = chain["bilstm"][0] if spec.architecture == "genma" else None

    @property
    def layers(self):
        out = [self.embedding]
        for i, conv in enumerate(self.convs):
            out.append(conv)
            if _pooled_after(self.spec, i):
                out.append(self.pool)
        if self.lstm is not None:
            out += [self.lstm, self.attention]
        return out + [self.hidden, self.output]

    def params(self) -> dict[str, Tensor]:
        out = {}
        for layer in self.layers:
            out.update(layer.params())
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params().items()}

    def load_state(self, state):
        params = self.params()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)}")
        for name, t in params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.shape:
                raise ShapeError(f"{name}: checkpoint shape {arr.shape} != {t.shape}")
            t.data[...] = arr

    def attention_mask(self, ids) -> np.ndarray:
        """Pooled positions whose receptive span touches at least one real character."""
        ids = np.asarray(ids)
        nonpad = ids != PAD_ID
        lengths = np.where(nonpad.any(axis=1),
                           ids.shape[1] - np.argmax(nonpad[:, ::-1], axis=1), 0)
        stride, _ = receptive_field(self.spec)
        starts = np.arange(self.n_positions) * stride
        mask = starts[None, :] < lengths[:, None]
        mask[:, 0] = True  # empty texts still attend somewhere
        return mask

    def forward(self, ids, training=False, rng=None):
        """Class probabilities (B, 3) and, for GenMA, attention weights (B, T)."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim == 1:
            ids = ids[None, :]
        if ids.shape[1] != self.spec.max_len:
            raise ShapeError(f"input length {ids.shape[1]} != max_len {self.spec.max_len}")
        x = self.embedding(ids)
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if _pooled_after(self.spec, i):
                x = self.pool(x)
        weights = None
        if self.spec.architecture == "genma":
            h = self.lstm(x)
            x, weights = self.attention(h, self.attention_mask(ids))
        else:
            x = tn.reshape(x, (x.shape[0], x.shape[1] * x.shape[2]))
        x = self.hidden(x, training=training, rng=rng)
        logits = self.output(x)
        return tn.softmax_rows(logits), weights


def build_genma(spec: ModelSpec, seed: int = 0, vocab=None) -> Model:
    if spec.architecture != "genma":
        raise ValueError(f"build_genma needs a genma spec, got {spec.architecture!r}")
    return Model(spec, seed, vocab)


def build_charcnn(spec: ModelSpec, seed: int = 0, vocab=None) -> Model:
    if spec.architecture != "charcnn":
        raise ValueError(f"build_charcnn needs a charcnn spec, got {spec.architecture!r}")
    return Model(spec, seed, vocab)


def build_model(spec: ModelSpec, seed: int = 0, vocab=None) -> Model:
    return Model(spec, seed, vocab)


def _check_ids(model, ids):
    ids = np.asarray(ids)
    if ids.size and ids.max() >= model.spec.vocab_size:
        raise IndexError(f"character id {int(ids.max())} >= vocabulary size "
                         f"{model.spec.vocab_size}; example encoded with another vocabulary?")


def predict(model: Model, example: Example):
    """(label_id, probabilities); ties go to the lowest class index."""
    _check_ids(model, example.char_ids)
    with tn.no_grad():
        probs, _ = model.forward(example.char_ids)
    p = probs.data[0].copy()
    return int(np.argmax(p)), p


def predict_batch(model: Model, examples, batch_size=64) -> np.ndarray:
    labels = []
    with tn.no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            ids = np.array([e.char_ids for e in chunk])
            _check_ids(model, ids)
            probs, _ = model.forward(ids)
            labels.extend(np.argmax(probs.data, axis=1).tolist())
    return np.array(labels, dtype=np.int64)


def attention_of(model: Model, example: Example) -> AttentionMap:
    if model.spec.architecture != "genma":
        raise ValueError("attention_of: only GenMA models have an attention layer")
    _check_ids(model, example.char_ids)
    with tn.no_grad():
        _, weights = model.forward(example.char_ids)
    pooled = weights.data[0].copy()
    mask = model.attention_mask(np.asarray(example.char_ids)[None, :])[0]
    spans = receptive_spans(model.spec, model.n_positions)
    return AttentionMap.project(example.text, pooled, spans, mask)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    vocab: CharVocabulary
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Model, metadata=None):
        if model.vocab is None:
            raise ValueError("model has no vocabulary attached")
        return cls(model.spec, model.state_dict(), model.vocab, dict(metadata or {}))

    def to_model(self) -> Model:
        model = Model(self.spec, self.metadata.get("seed", 0), self.vocab)
        model.load_state(self.params)
        return model


def save_checkpoint(path, ckpt: Checkpoint):
    """Write a JSON header followed by raw little-endian float64 parameter records."""
    records, blobs, offset = [], [], 0
    for name, arr in ckpt.params.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        records.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"spec": ckpt.spec.to_dict(), "vocab": ckpt.vocab.to_dict(),
                         "metadata": ckpt.metadata, "parameters": records},
                        sort_keys=True, indent=1, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(f"{len(header)}\n".encode("ascii"))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> Checkpoint:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a genma checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    nl = data.index(b"\n", pos)
    hlen = int(data[pos:nl])
    header = json.loads(data[nl + 1:nl + 1 + hlen].decode("utf-8"))
    body = data[nl + 1 + hlen:]
    params = {}
    for rec in header["parameters"]:
        chunk = body[rec["offset"]:rec["offset"] + rec["nbytes"]]
        params[rec["name"]] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(rec["shape"])
    return Checkpoint(ModelSpec.from_dict(header["spec"]), params,
                      CharVocabulary.from_dict(header["vocab"]), header["metadata"])
