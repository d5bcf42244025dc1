"""``cm2l`` command line: synth, fit, query, eval."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import data, evaluation, retrieval


@dataclass
class RunConfig:
    """Flat hyperparameter set; missing keys take the published defaults."""

    t_p: int = 20
    r_p: float = 0.5
    k_noise: int = 5
    k_scale: int = 5
    eps_scale: float = 1e-12
    eigen_threshold: float = 1e-5
    q_max: Optional[int] = None
    ridge_mu: float = 1e-6
    k_ose: int = 20
    train_fraction: float = 0.8
    correspondence_fraction: float = 0.8
    cca_corr_threshold: float = 0.1
    pa_dim: Optional[int] = None
    seed: int = 0
    x1: Optional[str] = None
    x2: Optional[str] = None
    links: Optional[str] = None
    out: Optional[str] = None

    def fit_config(self, variant: str = "i") -> retrieval.FitConfig:
        return retrieval.FitConfig(
            variant, self.t_p, self.r_p, self.k_noise, self.k_scale, self.eps_scale,
            self.eigen_threshold, self.q_max, self.ridge_mu, self.k_ose, self.seed,
        )

    def baseline_config(self) -> evaluation.BaselineConfig:
        return evaluation.BaselineConfig(self.cca_corr_threshold, 1e-6, self.pa_dim)

    def split_spec(self) -> data.SplitSpec:
        return data.SplitSpec(self.train_fraction, self.correspondence_fraction, self.seed)


_FIELD_TYPES = {
    "t_p": int, "k_noise": int, "k_scale": int, "k_ose": int, "q_max": int, "pa_dim": int, "seed": int,
    "x1": str, "x2": str, "links": str, "out": str,
}


def _coerce(key: str, value):
    if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
        return None
    return _FIELD_TYPES.get(key, float)(value)


def load_run_config(path) -> dict:
    """Read a JSON object or ``key=value`` lines; unknown keys are rejected."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in raw.items()}


def resolve_config(args, **overrides) -> RunConfig:
    values = load_run_config(args.config) if getattr(args, "config", None) else {}
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    return RunConfig(**values)


def write_resolved(directory, cfg: RunConfig, command: str, extra: Optional[dict] = None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {"command": command, "config": asdict(cfg)}
    if extra:
        payload.update(extra)
    (directory / "config_resolved.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    cfg = resolve_config(args, seed=args.seed, out=args.out)
    syn = data.SyntheticConfig(args.n, args.latent_dim, (args.m1, args.m2), args.noise, args.classes, cfg.seed)
    d1, d2, links = data.generate_synthetic_pair(syn)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    data.save_dataset(d1, out / "x1.csv")
    data.save_dataset(d2, out / "x2.csv")
    data.save_correspondences(links, out / "links.csv")
    write_resolved(out, cfg, "synth", {"synthetic": asdict(syn)})
    print(f"wrote {out / 'x1.csv'}, {out / 'x2.csv'}, {out / 'links.csv'}")
    return 0


def _load_inputs(cfg: RunConfig):
    for key in ("x1", "x2", "links"):
        if getattr(cfg, key) is None:
            raise ValueError(f"missing --{key}")
    return (
        data.load_dataset(cfg.x1, modality_id="modality1"),
        data.load_dataset(cfg.x2, modality_id="modality2"),
        data.load_correspondences(cfg.links),
    )


def cmd_fit(args) -> int:
    cfg = resolve_config(args, seed=args.seed, x1=args.x1, x2=args.x2, links=args.links, out=args.out)
    d1, d2, links = _load_inputs(cfg)
    model = retrieval.fit_model(d1.features, d2.features, links, cfg.fit_config(args.variant), threads=args.threads)
    out = retrieval.save_model(model, cfg.out)
    write_resolved(out, cfg, "fit", {"variant": args.variant})
    print(f"q = {model.q}")
    print("eigenvalues: " + " ".join(f"{v:.6g}" for v in model.embedding.eigenvalues))
    return 0


def cmd_query(args) -> int:
    model_dir = Path(args.model)
    model = retrieval.load_model(model_dir)
    queries = data.load_dataset(args.input)
    results = retrieval.retrieve(model, queries.features, args.source, args.k)
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["query", "rank", "index", "distance"])
        for qi, res in enumerate(results):
            for rank, (idx, dist) in enumerate(zip(res.indices, res.distances), start=1):
                w.writerow([qi, rank, int(idx), repr(float(dist))])
    finally:
        if args.out:
            fh.close()
    cfg = resolve_config(args, seed=model.provenance.get("config", {}).get("seed"), out=args.out)
    where = Path(args.out).parent if args.out else model_dir
    write_resolved(where, cfg, "query", {"model": str(model_dir), "input": args.input,
                                         "source": args.source, "k": args.k})
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(
        args, seed=args.seed, x1=args.x1, x2=args.x2, links=args.links, out=args.out,
        correspondence_fraction=args.corr_frac, train_fraction=args.train_frac,
    )
    d1, d2, links = _load_inputs(cfg)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    ks = [int(k) for k in args.ks.split(",")]
    source = 1 if args.direction == "12" else 2
    fit_cfg, base_cfg, spec = cfg.fit_config(), cfg.baseline_config(), cfg.split_spec()
    curves = evaluation.run_protocol(
        d1, d2, links, methods, spec, args.repeats, ks, args.metric, source, fit_cfg, base_cfg,
        threads=args.threads,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    evaluation.write_curves(curves, out / "curves.csv", args.direction, spec.correspondence_fraction, args.metric)
    snapshot = evaluation.config_snapshot(fit_cfg, base_cfg, spec)
    snapshot.update(methods=methods, ks=ks, repeats=args.repeats, metric=args.metric, direction=args.direction,
                    repeat_seeds=[evaluation.repeat_seed(spec.seed, r) for r in range(args.repeats)])
    evaluation.write_summary(curves, out / "summary.json", snapshot)
    # thread count is deliberately left out: outputs must not depend on it
    write_resolved(out, cfg, "eval", {k: snapshot[k] for k in ("methods", "ks", "repeats", "metric",
                                                                "direction", "repeat_seeds")})
    for name, c in curves.items():
        print(name + ": " + " ".join(f"k={k}:{v:.4f}" for k, v in zip(c.ks, c.values)))
    return 0


# ---------------------------------------------------------------------------
# parser


def _positive(kind):
    def check(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return check


def _fraction(text):
    v = float(text)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cm2l", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON or key=value hyperparameter file")
        sp.add_argument("--threads", type=_positive(int), default=os.cpu_count() or 1)

    s = sub.add_parser("synth", help="write a synthetic two-view dataset")
    common(s)
    s.add_argument("--n", type=_positive(int), default=400)
    s.add_argument("--m1", type=_positive(int), default=10)
    s.add_argument("--m2", type=_positive(int), default=15)
    s.add_argument("--latent-dim", type=_positive(int), default=2)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--classes", type=int, default=4)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", help="fit a joint embedding and save a model archive")
    common(f)
    f.add_argument("--x1")
    f.add_argument("--x2")
    f.add_argument("--links")
    f.add_argument("--variant", choices=("i", "f"), default="i")
    f.add_argument("--seed", type=int)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    q = sub.add_parser("query", help="cross-modal top-k retrieval for query rows")
    common(q)
    q.add_argument("--model", required=True)
    q.add_argument("--input", required=True)
    q.add_argument("--source", type=int, choices=(1, 2), required=True)
    q.add_argument("--k", type=_positive(int), default=5)
    q.add_argument("--out")
    q.set_defaults(func=cmd_query)

    e = sub.add_parser("eval", help="repeated-split retrieval evaluation")
    common(e)
    e.add_argument("--x1")
    e.add_argument("--x2")
    e.add_argument("--links")
    e.add_argument("--methods", default="cm2l-i,cm2l-f,cca,pa")
    e.add_argument("--repeats", type=_positive(int), default=10)
    e.add_argument("--ks", default="1,5,10,20")
    e.add_argument("--corr-frac", type=_fraction)
    e.add_argument("--train-frac", type=_fraction)
    e.add_argument("--metric", choices=("accuracy", "alogrmsd"), default="accuracy")
    e.add_argument("--direction", choices=("12", "21"), default="12")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)
    return p


def _origin(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        parts = Path(frame.filename).parts
        if "cm2l" in parts:
            return Path(frame.filename).stem
    return "cli"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "synth" and args.classes < 2:
        parser.error("--classes must be >= 2")
    try:
        return args.func(args)
    except Exception as exc:  # reported as one machine-parsable line
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {_origin(exc)}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
