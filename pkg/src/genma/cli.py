"""Command-line entry point: ``genma {train,eval,predict,attn,gradcheck}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from genma import attnviz, gradcheck, tensor as tn
from genma.baselines import SvmPipeline, train_svm
from genma.config import MODELS, RunConfig, load_config
from genma.corpus import LABELS, Example, load_examples, load_sentimix, normalize, to_examples
from genma.metrics import evaluate
from genma.models import (CHECKPOINT_MAGIC, Model, ModelSpec, attention_of,
                          load_checkpoint, predict_batch, save_checkpoint)
from genma.train import TrainConfig, fit, write_history

REPORT_FILE = "eval_report.json"


class CliError(Exception):
    pass


def _require(path, what):
    if not path:
        raise CliError(f"no {what} path given")
    if not Path(path).is_file():
        raise CliError(f"{what} file not found: {path}")
    return path


def _spec_for(cfg: RunConfig, vocab_size: int) -> ModelSpec:
    common = dict(max_len=cfg.max_len, pool=cfg.pool, dense=cfg.dense, dropout=cfg.dropout)
    if cfg.model == "genma":
        return ModelSpec.genma(vocab_size, embed_dim=cfg.embed_dim, lstm_hidden=cfg.lstm_hidden,
                               conv=((cfg.filters, cfg.kernel),) * 2, combine=cfg.combine,
                               **common)
    return ModelSpec.charcnn(vocab_size, conv=((cfg.filters, cfg.kernel),) * 4, **common)


def _write_report(out_dir, report):
    path = Path(out_dir) / REPORT_FILE
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def _labelled(examples, path):
    if any(e.label_id is None for e in examples):
        raise CliError(f"{path}: evaluation needs labelled data")
    return np.array([e.label_id for e in examples])


def cmd_train(cfg: RunConfig) -> dict:
    train_path = _require(cfg.train, "training data")
    if cfg.valid:
        _require(cfg.valid, "validation data")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    if cfg.model == "svm":
        tweets = load_sentimix(train_path)
        texts = [normalize(t.text) for t in tweets]
        labels = [LABELS.index(t.label) for t in tweets]
        pipe = train_svm(texts, labels, lam=cfg.svm_lambda, epochs=cfg.svm_epochs, seed=cfg.seed)
        model_path = out / "svm_model.json"
        pipe.save(model_path)
        eval_tweets = load_sentimix(cfg.valid) if cfg.valid else tweets
        gold = [LABELS.index(t.label) for t in eval_tweets]
        report = evaluate(gold, pipe.predict([normalize(t.text) for t in eval_tweets]))
        return {"model": model_path, "report": _write_report(out, report)}

    train, vocab = load_examples(train_path, max_len=cfg.max_len)
    valid = load_examples(cfg.valid, vocab, cfg.max_len)[0] if cfg.valid else []
    model = Model(_spec_for(cfg, vocab.size), cfg.seed, vocab)
    tc = TrainConfig(batch_size=cfg.batch_size, epochs=cfg.epochs, lr=cfg.lr, seed=cfg.seed,
                     patience=cfg.patience, shuffle=cfg.shuffle)
    ckpt, history = fit(model, train, valid, tc)
    ckpt_path = out / "checkpoint.gmck"
    save_checkpoint(ckpt_path, ckpt)
    hist_path = out / "history.jsonl"
    write_history(hist_path, history)
    eval_set = valid or train
    report = evaluate(_labelled(eval_set, cfg.valid or train_path), predict_batch(model, eval_set))
    return {"checkpoint": ckpt_path, "history": hist_path, "report": _write_report(out, report)}


def _load_any(path):
    path = _require(path, "checkpoint")
    with open(path, "rb") as fh:
        head = fh.read(len(CHECKPOINT_MAGIC))
    if head == CHECKPOINT_MAGIC:
        return load_checkpoint(path)
    return SvmPipeline.load(path)


def _predictions(loaded, data_path):
    """(examples, predicted labels, probabilities or None)."""
    tweets = load_sentimix(data_path)
    if isinstance(loaded, SvmPipeline):
        examples = [Example(t.uid, normalize(t.text), (), None if t.label is None
                            else LABELS.index(t.label)) for t in tweets]
        return examples, loaded.predict([e.text for e in examples]), None
    model = loaded.to_model()
    examples = to_examples(tweets, loaded.vocab, loaded.spec.max_len)
    if not examples:
        return examples, np.zeros(0, dtype=np.int64), np.zeros((0, 3))
    with tn.no_grad():
        probs = model.forward(np.array([e.char_ids for e in examples]))[0].data
    return examples, np.argmax(probs, axis=1), probs


def cmd_eval(checkpoint, data, out) -> Path:
    data = _require(data, "evaluation data")
    loaded = _load_any(checkpoint)
    examples, pred, _ = _predictions(loaded, data)
    report = evaluate(_labelled(examples, data), pred)
    name = "SVM" if isinstance(loaded, SvmPipeline) else loaded.spec.architecture
    print(report.table(name))
    Path(out).mkdir(parents=True, exist_ok=True)
    return _write_report(out, report)


def cmd_predict(checkpoint, data, out) -> Path:
    data = _require(data, "input data")
    loaded = _load_any(checkpoint)
    examples, pred, probs = _predictions(loaded, data)
    lines = []
    for i, (e, p) in enumerate(zip(examples, pred)):
        row = [e.uid, LABELS[int(p)]]
        if probs is not None:
            row += [f"{v:.6f}" for v in probs[i]]
        lines.append("\t".join(row))
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / "predictions.tsv"
    path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    print("\n".join(lines))
    return path


def cmd_attn(checkpoint, data, out) -> Path:
    data = _require(data, "input data")
    loaded = _load_any(checkpoint)
    if isinstance(loaded, SvmPipeline) or loaded.spec.architecture != "genma":
        raise CliError("attention maps need a GenMA checkpoint")
    model = loaded.to_model()
    examples = to_examples(load_sentimix(data), loaded.vocab, loaded.spec.max_len)
    maps = [attention_of(model, e) for e in examples]
    for e, m in zip(examples, maps):
        print(f"{e.uid}\t{attnviz.render_ansi(m)}")
    Path(out).mkdir(parents=True, exist_ok=True)
    path = Path(out) / "attention.html"
    attnviz.render_html(maps, path)
    return path


def cmd_gradcheck(seed=0, inject_fault=None) -> int:
    tn.clear_faults()
    if inject_fault:
        tn.inject_fault(inject_fault)
    try:
        results = gradcheck.run_suite(seed)
    finally:
        tn.clear_faults()
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def _parser():
    p = argparse.ArgumentParser(prog="genma", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--data", help="input file in meta/token-tag block format")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--max-len", type=int, dest="max_len")

    t = sub.add_parser("train", help="train a model")
    common(t)
    t.add_argument("--model", choices=MODELS)
    t.add_argument("--valid", help="validation file")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)

    for name, helptext in (("eval", "write a class-wise F1 report"),
                           ("predict", "label tweets"),
                           ("attn", "render character attention")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--model", choices=MODELS)
        sp.add_argument("--checkpoint", required=True, help="checkpoint or SVM model file")

    g = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--inject-fault", choices=("sigmoid", "tanh", "softmax_rows"),
                   help="corrupt one backward rule (negative control)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed, args.inject_fault)
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.override(model=getattr(args, "model", None), seed=args.seed,
                           out=args.out, max_len=args.max_len,
                           epochs=getattr(args, "epochs", None), lr=getattr(args, "lr", None),
                           valid=getattr(args, "valid", None))
        if args.command == "train":
            cfg = cfg.override(train=args.data)
            for kind, path in cmd_train(cfg).items():
                print(f"{kind}: {path}")
        else:
            data = args.data or cfg.test
            fn = {"eval": cmd_eval, "predict": cmd_predict, "attn": cmd_attn}[args.command]
            print(f"wrote {fn(args.checkpoint, data, cfg.out)}")
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"genma {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
