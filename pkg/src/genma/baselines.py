"""TF-IDF features and a one-vs-rest linear SVM trained with Pegasos.

TF-IDF contract (frozen):

* tokens are lower-cased alphanumeric runs of at least ``min_token_len``
  characters (default 2);
* tf is the raw count of the token in the document;
* idf_t = ln((1 + N) / (1 + df_t)) + 1 over the N fitting documents;
* each document row is scaled to unit L2 norm (all-zero rows stay zero).

The SVM minimises lam/2 (||w||^2 + b^2) + mean hinge(1 - y (w.x + b)) per
class with step 1 / (lam t); the bias is regularised like a weight on a
constant feature. The dual objective is available as a diagnostic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from genma import kernels

N_CLASSES = 3


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    min_token_len: int = 2

    def tokenize(self, text: str) -> list[str]:
        return tokenize(text, self.min_token_len)

    def transform(self, docs) -> sp.csr_matrix:
        rows, cols, vals = [], [], []
        for r, doc in enumerate(docs):
            counts: dict[int, int] = {}
            for tok in self.tokenize(doc):
                j = self.vocabulary.get(tok)
                if j is not None:
                    counts[j] = counts.get(j, 0) + 1
            if not counts:
                continue
            js = sorted(counts)
            v = np.array([counts[j] * self.idf[j] for j in js])
            v /= np.sqrt(np.dot(v, v))
            rows += [r] * len(js)
            cols += js
            vals += v.tolist()
        return sp.csr_matrix((vals, (rows, cols)), shape=(len(docs), len(self.vocabulary)))

    def to_dict(self):
        return {"vocabulary": sorted(self.vocabulary, key=self.vocabulary.get),
                "idf": self.idf.tolist(), "min_token_len": self.min_token_len}

    @classmethod
    def from_dict(cls, d):
        return cls({t: i for i, t in enumerate(d["vocabulary"])}, np.array(d["idf"]),
                   d["min_token_len"])


def tokenize(text: str, min_token_len: int = 2) -> list[str]:
    return [t for t in re.findall(r"[^\W_]+", text.lower()) if len(t) >= min_token_len]


def tfidf_fit_transform(docs, min_token_len: int = 2):
    docs = list(docs)
    if not docs:
        raise ValueError("tfidf_fit_transform: empty corpus")
    df: dict[str, int] = {}
    for doc in docs:
        for tok in set(tokenize(doc, min_token_len)):
            df[tok] = df.get(tok, 0) + 1
    vocab = {tok: i for i, tok in enumerate(sorted(df))}
    n = len(docs)
    idf = np.array([np.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in sorted(df)])
    model = TfidfModel(vocab, idf, min_token_len)
    return model, model.transform(docs)


@dataclass
class LinearSvm:
    weights: np.ndarray          # (3, D)
    biases: np.ndarray           # (3,)
    lam: float = 1e-4
    objective_history: list[list[float]] = field(default_factory=list)

    def margins(self, X) -> np.ndarray:
        X = X if sp.issparse(X) else np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weights.shape[1]:
            raise ValueError(f"svm: feature dimension {X.shape[1]} != {self.weights.shape[1]}")
        return np.asarray(X @ self.weights.T) + self.biases


def _as_csr(X) -> sp.csr_matrix:
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    return X


def svm_fit(X, y, lam: float = 1e-4, epochs: int = 10, seed: int = 0,
            track_objective: bool = False) -> LinearSvm:
    """One-vs-rest Pegasos; each class gets its own seeded shuffle stream."""
    X = _as_csr(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != len(y):
        raise ValueError(f"svm_fit: {X.shape[0]} rows but {len(y)} labels")
    for c in range(N_CLASSES):
        if not np.any(y == c):
            raise ValueError(f"svm_fit: class {c} has no training examples")
    indptr = X.indptr.astype(np.int64)
    indices = X.indices.astype(np.int64)
    values = np.ascontiguousarray(X.data, dtype=np.float64)
    W = np.zeros((N_CLASSES, X.shape[1]))
    b = np.zeros(N_CLASSES)
    history = []
    for c in range(N_CLASSES):
        rng = np.random.default_rng([seed, c])
        yc = np.where(y == c, 1.0, -1.0)
        w = np.zeros(X.shape[1])
        bias, t, per_epoch = 0.0, 0, []
        for _ in range(epochs):
            order = rng.permutation(len(y)).astype(np.int64)
            bias, t, mean_obj = kernels.pegasos_epoch(indptr, indices, values, yc, order,
                                                      w, bias, lam, t, track_objective)
            per_epoch.append(float(mean_obj))
        W[c], b[c] = w, float(bias)
        history.append(per_epoch)
    return LinearSvm(W, b, lam, history if track_objective else [])


def primal_objective(w, b, X, y, lam) -> float:
    """lam/2 (||w||^2 + b^2) + mean hinge for one binary problem, y in {-1, +1}."""
    z = np.asarray(X @ w).ravel() + b
    return 0.5 * lam * (float(w @ w) + b * b) + float(np.mean(np.maximum(0.0, 1.0 - y * z)))


def svm_predict(model: LinearSvm, x) -> int:
    m = model.margins(x)
    if m.shape[0] != 1:
        raise ValueError("svm_predict: expects a single feature vector")
    return int(np.argmax(m[0]))


def svm_predict_batch(model: LinearSvm, X) -> np.ndarray:
    return np.argmax(model.margins(X), axis=1)


def eval_dual_objective(alpha, X, y) -> float:
    """sum(alpha) - 1/2 sum_ij y_i y_j alpha_i alpha_j <x_i, x_j>."""
    alpha = np.asarray(alpha, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    X = X.toarray() if sp.issparse(X) else np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not (len(alpha) == len(y) == X.shape[0]):
        raise ValueError(f"eval_dual_objective: lengths alpha={len(alpha)}, "
                         f"y={len(y)}, X rows={X.shape[0]}")
    ay = alpha * y
    gram = X @ X.T
    return float(alpha.sum() - 0.5 * ay @ gram @ ay)


@dataclass
class SvmPipeline:
    tfidf: TfidfModel
    svm: LinearSvm

    def predict(self, texts) -> np.ndarray:
        return svm_predict_batch(self.svm, self.tfidf.transform(texts))

    def save(self, path):
        doc = {"kind": "tfidf-linear-svm", "tfidf": self.tfidf.to_dict(),
               "lambda": self.svm.lam, "weights": self.svm.weights.tolist(),
               "biases": self.svm.biases.tolist()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, ensure_ascii=False)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("kind") != "tfidf-linear-svm":
            raise ValueError(f"{path}: not an SVM model file")
        svm = LinearSvm(np.array(doc["weights"]).reshape(N_CLASSES, -1),
                        np.array(doc["biases"]), doc["lambda"])
        return cls(TfidfModel.from_dict(doc["tfidf"]), svm)


def train_svm(texts, labels, lam=1e-4, epochs=10, seed=0) -> SvmPipeline:
    tfidf, X = tfidf_fit_transform(texts)
    return SvmPipeline(tfidf, svm_fit(X, labels, lam=lam, epochs=epochs, seed=seed))
