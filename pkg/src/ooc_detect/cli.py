"""``ooc-detect`` command line.

Exit codes: 0 ok, 1 usage, 2 file/parse/validation, 3 remote detector,
4 numeric failure in ``gan-demo``.
"""

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from pathlib import Path

from .detections import (
    DEFAULT_MAPPING,
    DetectionCache,
    EndpointConfig,
    VendorMapping,
    fetch_detections,
    load_fixture,
    write_fixture,
)
from .exceptions import MappingError, NumericError, OOCError, RemoteError
from .features import (
    ContextWhitelist,
    build_vocabulary,
    default_whitelist,
    read_vocabulary,
    vectorize,
    write_vectors,
    write_vocabulary,
)
from .harness import compare, emit_report, evaluate, load_labeled_set, read_report, write_comparison
from .io import atomic_write_bytes, atomic_write_text
from .oneshot import RULES, OneShotOOCClassifier, load_model

log = logging.getLogger("ooc_detect")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REMOTE, EXIT_NUMERIC = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _unit_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text}")
    return value


def _name_value(text):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name, value


def _whitelist(path):
    return ContextWhitelist.load(path) if path else default_whitelist()


def _records(path):
    try:
        return load_fixture(path)
    except OSError as exc:
        raise OOCError(f"{path}: {exc.strerror or exc}") from None


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args):
    endpoint = EndpointConfig.load(args.endpoint)
    mapping = VendorMapping.load(args.mapping) if args.mapping else DEFAULT_MAPPING
    cache = DetectionCache(args.cache_dir) if args.cache_dir else None
    refs = list(args.image_ref or [])
    if args.refs_file:
        refs += [ln.strip() for ln in Path(args.refs_file).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not refs:
        raise UsageError("ingest needs --image-ref or --refs-file")
    records = [fetch_detections(endpoint, ref, mapping, cache=cache) for ref in refs]
    atomic_write_bytes(args.output, write_fixture(records))
    return EXIT_OK


def cmd_vocab(args):
    records = []
    for path in args.input:
        found = _records(path)
        if not found:
            raise OOCError(f"{path}: fixture has no entries")
        records += found
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UserWarning)
        vocab = build_vocabulary(records, remove_common=args.remove_common)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    atomic_write_text(args.output, write_vocabulary(vocab))
    return EXIT_OK


def cmd_vectorize(args):
    vocab = read_vocabulary(Path(args.vocab).read_text(encoding="utf-8"), source=args.vocab)
    vectors = [vectorize(rec, vocab) for rec in _records(args.input)]
    atomic_write_text(args.output, write_vectors(vectors))
    return EXIT_OK


def cmd_fit(args):
    records = _records(args.reference)
    if args.image_id is not None:
        records = [r for r in records if r.image_id == args.image_id]
        if not records:
            raise OOCError(f"{args.reference}: no entry with image_id {args.image_id!r}")
    elif len(records) != 1:
        raise OOCError(f"{args.reference}: holds {len(records)} entries; pick one with --image-id")
    model = OneShotOOCClassifier(rule=args.rule, tau=args.tau, sigma=args.sigma,
                                 whitelist=_whitelist(args.whitelist), remove_common=args.remove_common)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        model.fit(records[:1], [args.reference_label])
    if model.reference_label_ == "real":
        print("warning: model fitted on a real reference (any-ooc only)", file=sys.stderr)
    model.save(args.output)
    return EXIT_OK


def verdict_csv(verdicts):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id", "label", "score", "evidence"])
    for v in verdicts:
        evidence = ";".join(f"{lab}:{conf!r}" for lab, conf in v.evidence)
        writer.writerow([v.image_id, v.label, repr(float(v.score)), evidence])
    return buf.getvalue()


def cmd_classify(args):
    model = load_model(args.model)
    model.set_params(n_jobs=args.jobs)
    verdicts = model.classify_batch(_records(args.input))
    atomic_write_text(args.output, verdict_csv(verdicts))
    return EXIT_OK


def cmd_evaluate(args):
    model = load_model(args.model)
    report = evaluate(model, load_labeled_set(args.input))
    emit_report(report, args.output, args.format)
    return EXIT_OK


def cmd_compare(args):
    reports = []
    for name, path in args.report or []:
        reports.append((name, read_report(Path(path).read_text(encoding="utf-8"))))
    external = {}
    for name, value in args.external or []:
        if name in external:
            raise OOCError(f"duplicate name {name!r}")
        try:
            external[name] = float(value)
        except ValueError:
            raise UsageError(f"--external {name}: not a number: {value!r}") from None
    if not reports and not external:
        raise UsageError("compare needs at least one --report or --external")
    write_comparison(compare(reports, external), args.output)
    return EXIT_OK


def cmd_gan_demo(args):
    from .gan import GanConfig, train

    doc = GanConfig.load(args.config).to_dict() if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.iterations is not None:
        doc["iterations"] = args.iterations
    config = GanConfig.from_dict(doc)
    try:
        _, _, metrics = train(config)
    except NumericError as exc:
        if exc.metrics is not None and args.output:
            atomic_write_text(args.output, exc.metrics.to_csv())
        raise
    atomic_write_text(args.output, metrics.to_csv())
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="ooc-detect", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="run remote detection and write a fixture file")
    p.add_argument("--endpoint", required=True, help="endpoint config JSON")
    p.add_argument("--mapping", help="vendor mapping JSON (default: Labels/Name/Confidence)")
    p.add_argument("--image-ref", action="append", help="image reference; repeatable")
    p.add_argument("--refs-file", help="file with one image reference per line")
    p.add_argument("--cache-dir", help="enable the on-disk response cache")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("vocab", help="build a vocabulary from fixture files")
    p.add_argument("--input", required=True, action="append", help="fixture file; repeatable")
    p.add_argument("--remove-common", action="store_true", help="drop labels present in every record")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_vocab)

    p = sub.add_parser("vectorize", help="turn fixtures into sparse vectors")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("fit", help="fit a one-shot model on a reference record")
    p.add_argument("--reference", required=True, help="fixture holding the reference")
    p.add_argument("--image-id", help="which entry of the fixture to use")
    p.add_argument("--reference-label", choices=("fake", "real"), default="fake")
    p.add_argument("--whitelist", help="whitelist file (default: bundled face list)")
    p.add_argument("--rule", choices=RULES, default="shared-ooc")
    p.add_argument("--tau", type=_unit_float, default=0.5)
    p.add_argument("--sigma", type=_unit_float, default=0.3)
    p.add_argument("--remove-common", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="classify fixture records with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--jobs", type=int, default=None, help="worker threads")
    p.add_argument("--output", required=True, help="verdict CSV")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score a model on a labeled fixture")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="labeled fixture")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="tabulate accuracies of several reports")
    p.add_argument("--report", action="append", type=_name_value, metavar="NAME=PATH",
                   help="JSON report from 'evaluate'; repeatable")
    p.add_argument("--external", action="append", type=_name_value, metavar="NAME=ACCURACY",
                   help="externally measured baseline; repeatable")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gan-demo", help="train the small GAN and write metrics CSV")
    p.add_argument("--config", help="GAN config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=_positive_int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_gan_demo)
    return parser


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ooc-detect {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RemoteError, MappingError) as exc:
        print(f"ooc-detect {args.command}: detector error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except NumericError as exc:
        print(f"ooc-detect {args.command}: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OOCError, OSError, json.JSONDecodeError) as exc:
        print(f"ooc-detect {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
