"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each row reports the best-of-N wall time per call for both backends and the
speedup. Results of the two backends are also checked for agreement.
"""

import argparse
import tempfile
import time
from pathlib import Path

import numpy as np

from genma import kernels
from genma.baselines import tfidf_fit_transform
from genma.corpus import load_examples, load_sentimix, normalize
from genma.fixtures import fixture_path, generate
from genma.models import Model, ModelSpec
from genma import tensor as tn
from genma.train import AdamState, adam_step, batch_loss


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    x1 = rng.normal(size=(10, 280, 50))
    w1 = rng.normal(size=(32, 150))
    b1 = rng.normal(size=32)
    gy1 = rng.normal(size=(10, 278, 32))
    p1 = rng.normal(size=(10, 278, 32))
    _, arg = kernels.get_backend("python").maxpool1d_forward(p1, 3)
    gp = rng.normal(size=(10, 92, 32))

    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "synthetic.txt"
        path.write_text(generate(5000, 3), encoding="utf-8")
        texts = [normalize(t.text) for t in load_sentimix(path)]
    _, X = tfidf_fit_transform(texts)
    X.sort_indices()
    y = np.where(rng.random(X.shape[0]) < 0.5, 1.0, -1.0)
    ip, ix, vals = X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data.copy()
    order = rng.permutation(X.shape[0]).astype(np.int64)

    def pegasos(k):
        return k.pegasos_epoch(ip, ix, vals, y, order, np.zeros(X.shape[1]), 0.0, 1e-4, 0, False)

    return {
        "conv1d forward 10x280x50": lambda k: k.conv1d_forward(x1, w1, b1),
        "conv1d backward 10x280x50": lambda k: k.conv1d_backward(x1, w1, gy1),
        "maxpool forward 10x278x32": lambda k: k.maxpool1d_forward(p1, 3),
        "maxpool backward 10x92x32": lambda k: k.maxpool1d_backward(gp, arg, 278),
        f"pegasos epoch {X.shape[0]} rows": pegasos,
    }


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(u, v) for u, v in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-10)


def train_step_time(repeat):
    examples, vocab = load_examples(fixture_path("sentimix_fixture.txt"))
    model = Model(ModelSpec.genma(vocab.size), 0, vocab)
    params, state = model.params(), AdamState()
    batch = examples[:10]
    rng = np.random.default_rng(0)

    def step():
        loss = batch_loss(model, batch, rng)
        tn.backward(loss)
        adam_step(params, state)

    return best_of(step, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_available():
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    py, cc = kernels.get_backend("python"), kernels.get_backend("compiled")
    print(f"{'kernel':<32}{'python (ms)':>12}{'compiled (ms)':>15}{'speedup':>9}  agree")
    for name, fn in cases(rng).items():
        tp = best_of(lambda: fn(py), args.repeat)
        tc = best_of(lambda: fn(cc), args.repeat)
        print(f"{name:<32}{tp * 1e3:>12.2f}{tc * 1e3:>15.2f}{tp / tc:>8.1f}x  {agree(fn(py), fn(cc))}")
    times = {}
    for backend in ("python", "compiled"):
        kernels.set_backend(backend)
        times[backend] = train_step_time(args.repeat)
    print(f"{'GenMA train step, batch 10':<32}{times['python'] * 1e3:>12.2f}"
          f"{times['compiled'] * 1e3:>15.2f}{times['python'] / times['compiled']:>8.1f}x")


if __name__ == "__main__":
    main()
