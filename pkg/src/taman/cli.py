"""Command-line entry point: ``taman {synth,manifest,train,eval,ablate,gradcheck}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .errors import TamanError
from .harness.ablation import format_table, run_ablation
from .harness.classmaps import build_manifest
from .harness.evaluation import evaluate
from .harness.formats import load_config_file, load_manifest, write_manifest
from .harness.gradcheck import check_objective
from .harness.synthetic import SyntheticSpec, generate_synthetic, random_domains
from .harness.training import VARIANTS, RunConfig, train

log = logging.getLogger("taman")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; explicit flags override it")
    for f in dataclasses.fields(RunConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       help=f"default {getattr(RunConfig(), f.name)!r}")


def _run_config(args) -> RunConfig:
    values = load_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(RunConfig):
        if getattr(args, f.name, None) is not None:
            values[f.name] = getattr(args, f.name)
    return RunConfig.from_mapping(values)


def _csv(raw: str) -> list[str]:
    return [x.strip() for x in raw.split(",") if x.strip()]


def cmd_synth(args) -> int:
    names = _csv(args.domains)
    spec = SyntheticSpec(args.classes, random_domains(names, args.d_f, args.bias, args.sigma, seed=args.seed),
                         h=args.h, d_f=args.d_f, videos_per_class=args.videos_per_class, seed=args.seed,
                         prototype_scale=args.prototype_scale)
    paths = generate_synthetic(spec, args.out)
    print(json.dumps({d: {k: str(v) for k, v in p.items()} for d, p in paths.items()}, indent=2))
    return 0


def _read_listing(path) -> list[tuple[str, str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            raw, _, video = line.partition("\t")
            rows.append((raw, video))
    return rows


def cmd_manifest(args) -> int:
    listings = {}
    for item in args.listing:
        dataset, _, path = item.partition("=")
        listings[dataset] = _read_listing(path)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ds, manifest in build_manifest(args.benchmark, listings, args.role, not args.allow_incomplete).items():
        write_manifest(out / f"{ds}_{args.role}.tsv", manifest)
        print(f"{ds}: {len(manifest.records)} videos, {manifest.n_classes} classes")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    print(json.dumps({"config": cfg.to_dict()}))
    sources = [load_manifest(p, "source") for p in args.source]
    target = load_manifest(args.target, "target-train")
    result = train(cfg, sources, target, args.checkpoint, args.metrics)
    print(json.dumps(result.metrics[-1]))
    return 0


def cmd_eval(args) -> int:
    aux = [float(x) for x in _csv(args.aux)] if args.aux else None
    report = evaluate(args.checkpoint, load_manifest(args.manifest, "target-test"), args.ensemble, aux)
    out = report.to_dict()
    if args.predictions:
        out["predictions"] = [int(x) for x in report.predictions]
    print(json.dumps(out))
    return 0


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    sources = [load_manifest(p, "source") for p in args.source]
    rows = run_ablation(cfg, _csv(args.variants), [int(s) for s in _csv(args.seeds)], sources,
                        load_manifest(args.target, "target-train"), load_manifest(args.test, "target-test"))
    print(format_table(rows))
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in rows], indent=2), encoding="utf-8")
    return 0


def cmd_gradcheck(args) -> int:
    report = check_objective(seed=args.seed, variant=args.variant, eps=args.eps, tol=args.tol)
    name = max(report.max_rel_error, key=report.max_rel_error.get)
    print(f"worst relative error {report.worst:.3e} in {name}; tolerance {report.tolerance:g}")
    if not report.passed:
        print(report.failure)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taman", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the confuser-class synthetic benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=4, help="base classes; confusers double this")
    p.add_argument("--domains", default="s1,s2,tg")
    p.add_argument("--bias", type=float, default=8.0, help="scale of the per-domain feature bias")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--h", type=int, default=8)
    p.add_argument("--d-f", type=int, default=16)
    p.add_argument("--videos-per-class", type=int, default=200)
    p.add_argument("--prototype-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("manifest", help="map raw dataset listings onto a shared class set")
    p.add_argument("--benchmark", required=True, choices=["daily", "sports"])
    p.add_argument("--listing", action="append", required=True, metavar="DATASET=FILE",
                   help="file of raw_label<TAB>path lines; repeat per dataset")
    p.add_argument("--role", default="source", choices=["source", "target-train", "target-test"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--allow-incomplete", action="store_true")
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("train", help="train on labeled sources and an unlabeled target")
    p.add_argument("--source", action="append", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--metrics", required=True)
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled target split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--ensemble", default="certainty", choices=["certainty", "average", "source_accuracy"])
    p.add_argument("--aux", help="comma-separated per-source accuracies for source_accuracy")
    p.add_argument("--predictions", action="store_true", help="include per-video predictions")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate several variants over seeds")
    p.add_argument("--source", action="append", required=True)
    p.add_argument("--target", required=True, help="unlabeled target train manifest")
    p.add_argument("--test", required=True, help="labeled target test manifest")
    p.add_argument("--variants", default=",".join(VARIANTS))
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--json", help="also write rows as JSON here")
    _add_run_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the objective on a tiny instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", default="full")
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TamanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
