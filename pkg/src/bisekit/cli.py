"""Command line entry point: ``bisekit <kind> --config FILE [--seed N] [--workers N] [--out DIR]``.

Writes ``manifest.json``, ``report.json``, one CSV per table and one SVG per
plot. Every file carries the manifest hash and nothing time dependent, so a
rerun with the same config and seed reproduces them byte for byte.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .config import KINDS, build_config, parse_text
from .conditions import to_plain
from .errors import ArgumentError, ResourceBudgetError
from .experiments import run

OVERRIDES = ("replicas", "n", "ns", "d", "L", "h", "K", "Ks", "K1", "K2", "K1s", "pairs", "M", "offspring", "z", "step", "horizon", "times", "threshold", "eps", "trials", "hosts", "cap", "grid_points", "dt", "continuum_replicas", "source")


def build_parser():
    p = argparse.ArgumentParser(prog="bisekit", description="Skeleton and random-walk experiments on critical trees.")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config value (repeatable)")
    for key in OVERRIDES:
        p.add_argument(f"--{key.replace('_', '-')}", dest=f"opt_{key}", metavar="VALUE")
    return p


def manifest_for(cfg):
    body = {"config": cfg.to_dict(), "version": __version__, "seed": cfg.seed}
    text = json.dumps(body, sort_keys=True)
    body["hash"] = hashlib.sha256(text.encode()).hexdigest()[:16]
    return body


def _dump(obj):
    return json.dumps(to_plain(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows, stamp):
    buf = io.StringIO()
    buf.write(f"# manifest {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def write_outputs(result, cfg, out):
    os.makedirs(out, exist_ok=True)
    manifest = manifest_for(cfg)
    stamp = manifest["hash"]
    files = {"manifest.json": _dump(manifest)}
    report = dict(result.report)
    report["manifest"] = stamp
    files["report.json"] = _dump(report)
    for name, (header, rows) in result.tables.items():
        files[f"{name}.csv"] = _csv(header, rows, stamp)
    for name, draw in result.plots.items():
        files[f"{name}.svg"] = draw(stamp=stamp)
    for name, text in files.items():
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)
    return sorted(files)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        values = {}
        if args.config:
            with open(args.config) as fh:
                values = parse_text(fh.read())
        values["kind"] = args.kind
        overrides = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ArgumentError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = value
        for key in OVERRIDES:
            value = getattr(args, f"opt_{key}")
            if value is not None:
                overrides[key] = value
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.workers < 1:
            raise ArgumentError("workers must be at least 1")
        cfg = build_config(values, overrides)
        result = run(cfg, args.workers)
        names = write_outputs(result, cfg, args.out)
    except (ArgumentError, OSError) as exc:
        print(f"bisekit: error: {exc}", file=sys.stderr)
        return 2
    except ResourceBudgetError as exc:
        print(f"bisekit: {args.kind}: resource budget exceeded: {exc}", file=sys.stderr)
        return 3
    status = result.report.get("pass")
    summary = "" if status is None else (" pass" if status else " FAIL")
    print(f"{args.kind}:{summary} -> {args.out} ({', '.join(names)})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
