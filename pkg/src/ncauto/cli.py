"""Command-line front end: ``ncauto {run,paper-suite,membership,apply}``."""

import argparse
import json
import logging
import sys

from .domains import DomainSpec, membership
from .maps import map_from_json
from .matcore import NcPoint, encode_matrix
from .suite import ConfigError, FORMATS, SuiteConfig, builtin_paper_suite, run_suite, summary

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _load_json(arg):
    """Read JSON from a file path, or parse ``arg`` itself when it starts with ``{`` or ``[``."""
    if arg.lstrip().startswith(("{", "[")):
        return json.loads(arg)
    with open(arg) as fh:
        return json.load(fh)


def _apply_overrides(config, args):
    if args.seed is not None:
        config.seed = args.seed
    if args.out is not None:
        config.output_path = args.out
    if args.format is not None:
        config.output_format = args.format
    if args.jobs is not None:
        config.parallelism = args.jobs
    return config


def _finish(config):
    status, reports = run_suite(config)
    print(summary(reports))
    if config.output_path:
        print(f"report written to {config.output_path}")
    return status


def cmd_run(args):
    try:
        config = _apply_overrides(SuiteConfig.from_json(_load_json(args.config)), args)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: invalid config at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _finish(config)


def cmd_paper_suite(args):
    config = builtin_paper_suite(args.seed if args.seed is not None else builtin_paper_suite().seed)
    if args.dump_config:
        with open(args.dump_config, "w") as fh:
            json.dump(config.to_json(), fh, indent=2)
    args.seed = None
    if args.out is None:
        args.out = "paper_suite_report." + (args.format or "json")
    return _finish(_apply_overrides(config, args))


def cmd_membership(args):
    try:
        spec = DomainSpec.from_json(_load_json(args.domain))
        point = NcPoint.from_json(_load_json(args.point))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    v = membership(spec, point)
    cert = v.certificate
    if cert is not None and not isinstance(cert, float):
        cert = encode_matrix(cert)
    print(json.dumps({"member": v.member, "certificate": cert, "margin": v.margin}))
    return EXIT_OK


def cmd_apply(args):
    try:
        expr = map_from_json(_load_json(args.map))
        point = NcPoint.from_json(_load_json(args.point))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        image = expr.apply(point)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    text = json.dumps(image.to_json())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ncauto", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def suite_flags(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="report file")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("run", help="run checks from a JSON suite config")
    p.add_argument("--config", required=True)
    suite_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("paper-suite", help="run the built-in suite")
    suite_flags(p)
    p.add_argument("--dump-config", help="also write the suite configuration here")
    p.set_defaults(func=cmd_paper_suite)

    p = sub.add_parser("membership", help="test one point against a domain")
    p.add_argument("--domain", required=True, help="DomainSpec JSON file or inline JSON")
    p.add_argument("--point", required=True, help="point JSON file or inline JSON")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("apply", help="evaluate a map at one point")
    p.add_argument("--map", required=True, help="map JSON file or inline JSON")
    p.add_argument("--point", required=True, help="point JSON file or inline JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_apply)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
