"""`fimstar-plot` entry point: render one chart from a spec file or flags."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, PlotSpec, SchemaError, render

_SPEC_KEYS = ("input_csv", "kind", "x_field", "y_field", "group_field", "out_png")


def load_spec(path: Path) -> PlotSpec:
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in _SPEC_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    missing = [k for k in _SPEC_KEYS if k not in values]
    if missing:
        raise ValueError(f"{path}: missing keys {missing}")
    return PlotSpec(Path(values["input_csv"]), values["kind"], values["x_field"],
                    values["y_field"], values["group_field"], Path(values["out_png"]))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fimstar-plot",
        description="Render a harness CSV into a PNG (mean +- SE band per group).")
    parser.add_argument("--spec", type=Path, help="spec file with key = value lines")
    parser.add_argument("--input-csv", type=Path)
    parser.add_argument("--kind", choices=KINDS)
    parser.add_argument("--x-field")
    parser.add_argument("--y-field")
    parser.add_argument("--group-field")
    parser.add_argument("--out-png", type=Path)
    args = parser.parse_args(argv)
    try:
        if args.spec is not None:
            spec = load_spec(args.spec)
        else:
            fields = {
                "input_csv": args.input_csv, "kind": args.kind,
                "x_field": args.x_field, "y_field": args.y_field,
                "group_field": args.group_field, "out_png": args.out_png,
            }
            missing = [k for k, v in fields.items() if v is None]
            if missing:
                parser.error(f"missing {', '.join('--' + m.replace('_', '-') for m in missing)}"
                             " (or use --spec)")
            spec = PlotSpec(**fields)
        out = render(spec)
        print(f"wrote {out}")
        return 0
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
