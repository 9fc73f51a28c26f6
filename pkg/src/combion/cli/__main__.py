"""combion command line.

    combion validate --config exp.yaml
    combion run --config exp.yaml [--out results.csv] [--format csv|json] [--threads K] [--exact]
    combion preset fig4a_spectrum [--out ...] [--format ...]
    combion preset --list

Exit codes: 0 success, 2 invalid config, 3 Fock cutoff too small.
"""
import argparse
import sys
from importlib import resources

from ..errors import CutoffTooSmall, SchemaError
from .config import validate_config
from .runner import THREADS_ENV, run

EXIT_OK, EXIT_INVALID, EXIT_CUTOFF = 0, 2, 3


def preset_names():
    files = resources.files("combion.cli").joinpath("presets").iterdir()
    return sorted(f.name[: -len(".yaml")] for f in files if f.name.endswith(".yaml"))


def preset_text(name):
    if name not in preset_names():
        raise SchemaError([f"preset: unknown preset '{name}' (available: {', '.join(preset_names())})"])
    return resources.files("combion.cli").joinpath("presets", f"{name}.yaml").read_text(encoding="utf-8")


def _add_run_flags(p):
    p.add_argument("--out", help="output file (default: config output.path or <task>.<format>)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--exact", action="store_true", help="use the exact propagator for spectra")


def build_parser():
    parser = argparse.ArgumentParser(prog="combion", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="check a config and report every problem")
    p.add_argument("--config", required=True)
    p = sub.add_parser("run", help="run a config")
    p.add_argument("--config", required=True)
    _add_run_flags(p)
    p = sub.add_parser("preset", help="run a bundled preset")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.add_argument("--show", action="store_true", help="print the preset config and exit")
    _add_run_flags(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "preset":
            if args.list or not args.name:
                print("\n".join(preset_names()))
                return EXIT_OK
            text = preset_text(args.name)
            if args.show:
                sys.stdout.write(text)
                return EXIT_OK
        else:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = validate_config(text)
    except SchemaError as exc:
        print("invalid configuration:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(f"ok: {cfg.task} config, hash {cfg.config_hash()[:12]}")
        return EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        outcome = run(cfg, args.out, args.format, args.threads, args.exact)
    except CutoffTooSmall as exc:
        print(f"cutoff too small: {exc}", file=sys.stderr)
        return EXIT_CUTOFF
    for warning in outcome.manifest["warnings"]:
        print(f"warning: {warning}", file=sys.stderr)
    print(f"wrote {outcome.output} and {outcome.manifest_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
