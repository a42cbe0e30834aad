"""Console entry points: one script per figure family, called as (csv_dir, out_dir)."""

import argparse
import sys

from .families import SchemaError, render_family


def _run(family: str, argv=None) -> int:
    parser = argparse.ArgumentParser(description=f"render the {family} figure family")
    parser.add_argument("csv_dir", help="directory holding the experiment CSVs")
    parser.add_argument("out_dir", help="directory to write the image into")
    args = parser.parse_args(argv)
    try:
        out = render_family(family, args.csv_dir, args.out_dir)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out.path)
    return 0


def main_af(argv=None) -> int:
    return _run("af", argv)


def main_slices(argv=None) -> int:
    return _run("slices", argv)


def main_ber(argv=None) -> int:
    return _run("ber", argv)


def main_pareto(argv=None) -> int:
    return _run("pareto", argv)


def main_pmf(argv=None) -> int:
    return _run("pmf", argv)


def main_cfar(argv=None) -> int:
    return _run("cfar", argv)


def main_music(argv=None) -> int:
    return _run("music", argv)
