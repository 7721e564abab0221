"""Command-line surface: parse-check, sample, classify, identities, normal-form.

Every subcommand takes --config PATH plus optional overrides and writes its
outputs under --out.  Exit codes: 0 success, 1 validation error, 2 numeric
failure (identity residual or reconstruction residual out of bounds).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import frontio
from .classify import Tolerances
from .frontio import ConfigError, JobConfig
from .gfexpr import DslError, to_source

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", required=True, help="path to the job JSON")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--tol-root", type=float, default=None,
                     help="override tolerances.tol_root")
    sub.add_argument("--seed", type=int, default=None, help="override seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="emfront",
        description="Wavefront sampling, singularity classification, "
                    "divergence identities, and dual-potential normal forms "
                    "for generating-function models.")
    subs = ap.add_subparsers(dest="command", required=True)
    for name, text in (
            ("parse-check", "validate the config and echo the parsed model"),
            ("sample", "export e/m wavefront meshes (OBJ + CSV)"),
            ("classify", "detect and classify the singular set"),
            ("identities", "run the divergence/metric identity suite"),
            ("normal-form", "extract the dual-potential normal form")):
        _add_common(subs.add_parser(name, help=text))
    return ap


def _apply_overrides(cfg: JobConfig, args) -> JobConfig:
    if args.tol_root is not None:
        tols = dataclasses.replace(cfg.tolerances, tol_root=args.tol_root)
        cfg = dataclasses.replace(cfg, tolerances=tols)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def _write(out_dir: Path, name: str, text: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out)
    try:
        cfg = frontio.load_config_file(args.config)
        cfg = _apply_overrides(cfg, args)
    except (ConfigError, DslError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        if args.command == "parse-check":
            g = cfg.generating_function()
            print(json.dumps({
                "expression": cfg.expression,
                "canonical": to_source(g.expr),
                "n": cfg.n,
                "I": sorted(cfg.I),
                "J": sorted(g.J),
                "chart": list(g.chart_names),
            }, indent=2, sort_keys=True))
            return EXIT_OK

        if args.command == "sample":
            mesh_e, mesh_m = frontio.run_sample(cfg)
            if cfg.n == 2:
                _write(out_dir, "wavefront_e.obj", mesh_e.to_obj())
                _write(out_dir, "wavefront_m.obj", mesh_m.to_obj())
            else:
                print("note: OBJ surfaces are only written for n == 2; "
                      "CSV point clouds cover every dimension")
            _write(out_dir, "wavefront_e.csv", mesh_e.to_csv())
            _write(out_dir, "wavefront_m.csv", mesh_m.to_csv())
            print(f"dropped vertices: e={mesh_e.dropped} m={mesh_m.dropped}")
            return EXIT_OK

        if args.command == "classify":
            report = frontio.run_classify(cfg)
            _write(out_dir, "reports.json", frontio.dump_json(report))
            print("histogram:", json.dumps(report["histogram"], sort_keys=True))
            return EXIT_OK

        if args.command == "identities":
            report = frontio.run_identities(cfg)
            _write(out_dir, "identities.json", frontio.dump_json(report))
            print(f"worst residual {report['worst_residual']:.3e} "
                  f"(bound {report['residual_bound']:.0e})")
            return EXIT_OK if report["passed"] else EXIT_NUMERIC

        if args.command == "normal-form":
            report = frontio.run_normalform(cfg)
            _write(out_dir, "normalform.json", frontio.dump_json(report))
            print(f"max round-trip residual {report['max_roundtrip_residual']:.3e} "
                  f"(bound {report['residual_bound']:.0e})")
            return EXIT_OK if report["passed"] else EXIT_NUMERIC
    except (ConfigError, DslError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
