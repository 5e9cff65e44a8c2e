"""Cross-entropy loss, Adam, and the minibatch training loop."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from genma import tensor as tn
from genma.metrics import evaluate
from genma.models import Checkpoint, Model, predict_batch
from genma.tensor import Tensor

PROB_FLOOR = 1e-12


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean of -ln p[i, label_i], with p floored at 1e-12 before the log."""
    labels = np.asarray(labels, dtype=np.int64)
    n_classes = probs.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"cross_entropy: labels must lie in 0..{n_classes - 1}")
    if len(labels) != probs.shape[0]:
        raise ValueError(f"cross_entropy: {len(labels)} labels for {probs.shape[0]} rows")
    picked = tn.pick(probs, labels)
    return tn.scale(tn.mean_all(tn.log(tn.clip_min(picked, PROB_FLOOR))), -1.0)


class AdamState:
    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, Tensor], state: AdamState):
    """Bias-corrected Adam update in place, then zero the gradients."""
    for name, p in params.items():
        if p.grad is None:
            raise ValueError(f"adam_step: parameter {name!r} has no gradient")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = p.grad
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        p.grad = None


@dataclass
class TrainConfig:
    batch_size: int = 10
    epochs: int = 10
    lr: float = 1e-4
    seed: int = 0
    patience: int = 3
    shuffle: bool = True
    # stop once training accuracy (dropout off) reaches this value
    target_train_acc: float | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


def _labels(examples):
    out = [e.label_id for e in examples]
    if any(l is None for l in out):
        raise ValueError("training data must be labelled")
    return np.array(out, dtype=np.int64)


def batch_loss(model: Model, batch, rng, training=True) -> Tensor:
    ids = np.array([e.char_ids for e in batch], dtype=np.int64)
    probs, _ = model.forward(ids, training=training, rng=rng)
    return cross_entropy(probs, _labels(batch))


def fit(model: Model, train, valid=(), config: TrainConfig | None = None, on_batch=None):
    """Train ``model`` in place; returns (best checkpoint, history).

    ``on_batch`` is called with each list of examples that feeds a gradient
    step. With a non-empty ``valid`` set the checkpoint is the epoch with the
    best validation macro-F1 and training stops after ``patience`` epochs
    without improvement; otherwise it is the final epoch.
    """
    config = config or TrainConfig()
    train, valid = list(train), list(valid)
    if not train:
        raise ValueError("fit: empty training set")
    train_labels = _labels(train)
    valid_labels = _labels(valid) if valid else None
    rng = np.random.default_rng(config.seed)
    params = model.params()
    state = AdamState(lr=config.lr)
    history = []
    best_score, best_state, best_epoch, stale = -math.inf, None, 0, 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train)) if config.shuffle else np.arange(len(train))
        total, count = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start:start + config.batch_size]]
            if on_batch is not None:
                on_batch(batch)
            loss = batch_loss(model, batch, rng)
            tn.backward(loss)
            adam_step(params, state)
            total += float(loss.data) * len(batch)
            count += len(batch)
        record = {"epoch": epoch, "loss": total / count}
        train_acc = None
        if config.target_train_acc is not None:
            train_acc = float(np.mean(predict_batch(model, train) == train_labels))
            record["train_accuracy"] = train_acc
        if valid:
            report = evaluate(valid_labels, predict_batch(model, valid))
            record["valid_macro_f1"] = report.macro_f1
            if report.macro_f1 > best_score:
                best_score, best_state, best_epoch, stale = (
                    report.macro_f1, model.state_dict(), epoch, 0)
            else:
                stale += 1
        history.append(record)
        if valid and stale >= config.patience:
            break
        if train_acc is not None and train_acc >= config.target_train_acc:
            break

    if best_state is not None:
        model.load_state(best_state)
    else:
        best_epoch = history[-1]["epoch"]
    metadata = {"epoch": best_epoch, "seed": model.seed, "train_seed": config.seed,
                "loss_history": [r["loss"] for r in history]}
    ckpt = Checkpoint(model.spec, model.state_dict(), model.vocab, metadata) \
        if model.vocab is not None else None
    return ckpt, history


def write_history(path, history):
    with open(path, "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
