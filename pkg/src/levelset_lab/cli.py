"""``levelset-lab`` command line entry point."""
from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import ConfigError, LabError
from .experiments import _dumps, load_config, read_csv, run, summarize

EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levelset-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the experiment described by a config file")
    r.add_argument("config")
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    s = sub.add_parser("summarize", help="print the JSON summary of an experiment CSV")
    s.add_argument("csv")
    sub.add_parser("version", help="print the artifact version")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "version":
            print(__version__)
        elif args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg.experiment} on {cfg.model} sizes={cfg.sizes}")
        elif args.command == "summarize":
            sys.stdout.write(_dumps(summarize(read_csv(args.csv))))
        else:
            manifest = run(load_config(args.config))
            print(json.dumps({"csv": manifest["csv"], "rows": manifest["row_counts"]}))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # summarize on an empty or mixed CSV
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
