"""Command-line front end: ``cerml synth|repr|train|eval|check``.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import fileio
from .dataset import synthesize
from .errors import NumericalError, ValidationError
from .kernels import check_psd
from .pipeline import evaluate, represent_sets, train, training_problem_from_model
from .solver import TrainConfig, eigen_residual, gradient, init_fisher, update_block

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(key: str, value) -> None:
    if isinstance(value, float):
        value = f"{value:.6g}"
    print(f"{key} = {value}")


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, test_ds = synthesize(args.classes, args.sets_per_class, args.samples_per_set, args.dim,
                                   args.separation, args.seed, offset=args.offset)
    fileio.write_features(out / "features.csv", train_ds.features)
    fileio.write_manifest(out / "train.manifest", "features.csv", train_ds)
    fileio.write_manifest(out / "test.manifest", "features.csv", test_ds)
    _emit("samples", train_ds.features.shape[0])
    _emit("train_sets", len(train_ds.sets))
    _emit("test_sets", len(test_ds.sets))
    return EXIT_OK


def cmd_repr(args) -> int:
    ds = fileio.read_manifest(args.manifest)
    sets = represent_sets(ds, args.model_type, args.d, args.ridge)
    if not sets:
        raise ValidationError("manifest has no video sets")
    fileio.save_representations(args.out, sets, args.model_type)
    _emit("sets", len(sets))
    return EXIT_OK


def _config_from_args(args) -> TrainConfig:
    cfg = fileio.read_config(args.config) if args.config else TrainConfig()
    pairs = [(name, getattr(args, name)) for name in TrainConfig.field_names()
             if getattr(args, name, None) is not None]
    return fileio.config_from_pairs(pairs, cfg)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    ds = fileio.read_manifest(args.manifests[0])
    extra = [fileio.read_manifest(p) for p in args.manifests[1:]]
    model = train(ds, cfg, extra)
    fileio.save_model(args.out, model)
    if args.trace:
        Path(args.trace).write_text("".join(f"{i},{fileio._fmt(J)}\n" for i, J in enumerate(model.trace)))
    t = model.trace
    _emit("iterations", len(t) - 1)
    _emit("objective", t[-1])
    _emit("rel_change", abs(t[-1] - t[-2]) / abs(t[-2]) if len(t) > 1 else float("nan"))
    _emit("converged", int(model.converged))
    return EXIT_OK


def cmd_eval(args) -> int:
    model = fileio.load_model(args.model)
    probes = fileio.read_manifest(args.manifest)
    gallery = fileio.read_manifest(args.gallery) if args.gallery else None
    res = evaluate(model, probes, gallery, args.protocol, exclude_self=args.exclude_self, far=args.far)
    _emit("protocol", args.protocol)
    _emit("rank1", res["rank1"])
    _emit(f"vr_at_far_{args.far:g}", res["vr_at_far"])
    _emit("probes", int(res["probes"]))
    _emit("gallery", int(res["gallery"]))
    return EXIT_OK


def _check_model(path, tol: float) -> bool:
    model = fileio.load_model(path)
    cfg = model.config
    _, bundle, graph = training_problem_from_model(model)
    ok = True
    for v, K in sorted(bundle.square.items()):
        rep = check_psd(K, tol)
        ok &= rep.passed
        for line in rep.lines(f"psd_{v}_"):
            print(line)
    W, lam, sysm = init_fisher(bundle.features, graph, cfg.lambda1, model.out_dim, cfg.views, cfg.fisher_reg)
    res = eigen_residual(sysm, W, lam)
    ok &= res < 1e-8
    _emit("eigen_residual", res)
    W = dict(model.W)
    for v in cfg.order:
        g0 = np.linalg.norm(gradient(v, W, bundle.features, graph, cfg.lambda1, cfg.lambda2))
        W[v] = update_block(v, W, bundle.features, graph, cfg.lambda1, cfg.lambda2, cfg.jitter)
        g1 = np.linalg.norm(gradient(v, W, bundle.features, graph, cfg.lambda1, cfg.lambda2))
        drop = g0 / g1 if g1 > 0 else float("inf")
        ok &= drop >= 1e4
        _emit(f"gradient_drop_{v}", drop)
    return ok


def cmd_check(args) -> int:
    path = Path(args.target)
    try:
        head = path.read_text().split("\n", 1)[0].strip()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if head == "format = cerml-model":
        ok = _check_model(path, args.tol)
    else:
        K = fileio.read_features(path)
        if K.shape[0] != K.shape[1]:
            raise ValidationError(f"kernel file holds a {K.shape} matrix, expected square")
        rep = check_psd(K, args.tol)
        for line in rep.lines("psd_"):
            print(line)
        ok = rep.passed
    _emit("status", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# parser

def _add_config_flags(p) -> None:
    p.add_argument("--config", help="key = value file with training settings")
    for f in dataclasses.fields(TrainConfig):
        kw = {"dest": f.name, "default": None, "metavar": "VALUE" if f.type != "bool" else "{on,off}"}
        if f.name == "mode":
            kw["choices"] = ["three_view", "two_view"]
            kw.pop("metavar")
        p.add_argument("--" + f.name.replace("_", "-"), **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cerml", description="Cross Euclidean-to-Riemannian metric learning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("synth", help="generate a synthetic still/video dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--sets-per-class", type=int, default=5)
    p.add_argument("--samples-per-set", type=int, default=20)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--separation", type=float, default=5.0)
    p.add_argument("--offset", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("repr", help="fit set representations")
    p.add_argument("manifest")
    p.add_argument("--model-type", choices=["subspace", "affine", "spd"], default="subspace")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_repr)

    p = sub.add_parser("train", help="learn projections")
    p.add_argument("manifests", nargs="+", help="training manifest, then optional held-out manifests")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="write 'iteration,objective' lines here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a model on a protocol")
    p.add_argument("model")
    p.add_argument("manifest", help="probe manifest")
    p.add_argument("--gallery", help="gallery manifest (defaults to the probe manifest)")
    p.add_argument("--protocol", choices=["v2s", "s2v", "v2v"], default="v2s")
    p.add_argument("--exclude-self", action="store_true")
    p.add_argument("--far", type=float, default=0.01)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("check", help="numerical diagnostics for a model or a kernel CSV")
    p.add_argument("target")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
