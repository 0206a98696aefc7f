"""Command-line front end: ``lelab <command> --config <path>``.

Exit status: 0 success, 1 an invariant check failed, 2 bad configuration,
3 solver failure, 4 run rejected under an abort policy.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import presets
from .checkpoint import Checkpoint
from .config import ConfigError, RunConfig, load_config
from .diagnostics import TwinRunError, difference_identities, twin_run
from .elliptic import PressureNotConverged, SingularSystemError, manufactured_error
from .evolve import PRESSURE_FAILURE, run
from .grid import Grid, VectorField
from .lagrangian import LagrangianState
from .regularize import regularize_datum
from .sobolev import (
    CutoffPair,
    ResolutionError,
    aniso_norm,
    div_curl_decomposition,
    fit_divcurl_constant,
    localized_norm,
)

COMMANDS = ("regularize", "evolve", "stability", "mms", "norms")
CSV_SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_REJECTED = 4

INVARIANT_TOL = 1e-10
MONOTONE_SLACK = 0.05


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".16e")
    return str(value)


def write_csv(path: Path, name: str, header, rows) -> Path:
    """UTF-8 CSV with a schema comment line, a header row, and 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={name}/{CSV_SCHEMA_VERSION}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _grid(cfg: RunConfig, n3: int | None = None) -> Grid:
    return Grid(cfg.n1, cfg.n2, cfg.n3 if n3 is None else n3)


def _datum(cfg: RunConfig, grid: Grid) -> VectorField:
    v0 = presets.build(cfg.preset, grid)
    if cfg.r is not None:
        v0 = regularize_datum(v0, cfg.r, cfg.delta).v0r
    return v0


def cmd_regularize(cfg: RunConfig, out: Path) -> int:
    grid = _grid(cfg)
    v0 = presets.build(cfg.preset, grid)
    cutoffs = CutoffPair.build(grid)
    results = [regularize_datum(v0, r, cfg.delta, cutoffs) for r in cfg.r_sweep]
    write_csv(out / "regularize.csv", "regularize",
              ["r", "datum_error", "curl_ratio", "div_residual", "bottom_residual"],
              [(res.r, res.datum_error, res.curl_ratio, res.div_residual, res.bottom_residual)
               for res in results])
    failures = []
    for res in results:
        if res.div_residual > INVARIANT_TOL:
            failures.append(f"r={res.r}: divergence residual {res.div_residual:.3e}")
        if res.bottom_residual > INVARIANT_TOL:
            failures.append(f"r={res.r}: bottom residual {res.bottom_residual:.3e}")
    ordered = sorted(results, key=lambda res: -res.r)
    for big, small in zip(ordered, ordered[1:]):
        if small.datum_error > big.datum_error * (1 + MONOTONE_SLACK) + 1e-14:
            failures.append(f"datum error rose from {big.datum_error:.3e} at r={big.r} "
                            f"to {small.datum_error:.3e} at r={small.r}")
    for message in failures:
        print(f"invariant failed: {message}", file=sys.stderr)
    return EXIT_INVARIANT if failures else EXIT_OK


def _rejection_status(reason: str | None) -> int:
    return EXIT_SOLVER if reason == PRESSURE_FAILURE else EXIT_REJECTED


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    grid = _grid(cfg)
    ecfg = cfg.evolve_config()
    cutoffs = CutoffPair.build(grid)
    counter = {"n": 0}

    def checkpoint(outcome):
        n = counter["n"]
        if cfg.checkpoint_interval and n % cfg.checkpoint_interval == 0:
            Checkpoint.from_state(outcome.state, cfg.delta, cfg.r).save(
                out / f"checkpoint_{n:06d}.lelb")
        counter["n"] += 1

    history, final = run(LagrangianState.initial(_datum(cfg, grid)), ecfg, cutoffs, checkpoint)
    rows = [h.report.row() for h in history]
    header = list(rows[0]) if rows else _report_header()
    write_csv(out / "trajectory.csv", "trajectory", header, [list(r.values()) for r in rows])
    if not final.accepted:
        print(f"run rejected at t={final.state.t:.6g}: {final.rejection_reason}", file=sys.stderr)
        return _rejection_status(final.rejection_reason)
    return EXIT_OK


def _report_header() -> list[str]:
    from .diagnostics import NORM_LABELS

    return (["t", "det_dev", "cauchy_res", "div_res", "rt_margin", "d_a", "d_aat", "d_grad"]
            + list(NORM_LABELS) + ["boundary_energy"])


STABILITY_COLUMNS = ("t", "Y", "Q_norm", "psiQ_norm", "V_l2", "V_norm", "E_norm",
                     "chi2A_l2", "chiE_1", "At_norm")


def cmd_stability(cfg: RunConfig, out: Path) -> int:
    grid = _grid(cfg)
    datum = _datum(cfg, grid)
    try:
        result = twin_run(datum, presets.perturbation(grid), cfg.kappa, cfg.evolve_config(),
                          CutoffPair.build(grid))
    except TwinRunError as exc:
        print(str(exc), file=sys.stderr)
        return _rejection_status(exc.reason)
    ids = difference_identities(result)
    rows = [[getattr(rec, c) for c in STABILITY_COLUMNS] for rec in result.records]
    blank = [""] * (len(STABILITY_COLUMNS) - 2)
    footer = [["gronwall_C", result.gronwall_c, *blank],
              ["e_over_int_v", ids.e_over_int_v, *blank], ["a_over_e", ids.a_over_e, *blank],
              ["at_over_ve", ids.at_over_ve, *blank], ["q_over_y", ids.q_over_y, *blank]]
    write_csv(out / "stability.csv", "stability", STABILITY_COLUMNS, rows + footer)
    return EXIT_OK


def cmd_mms(cfg: RunConfig, out: Path) -> int:
    zero = cfg.mms_rhs == "zero"
    rows = [(n3, manufactured_error(_grid(cfg, n3), zero)) for n3 in cfg.n3_sweep]
    write_csv(out / "mms.csv", "mms", ["n3", "max_error"], rows)
    finest = max(rows)[1]
    if finest > INVARIANT_TOL:
        print(f"invariant failed: finest-grid error {finest:.3e}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_norms(cfg: RunConfig, out: Path) -> int:
    grid = _grid(cfg)
    v0 = _datum(cfg, grid)
    cutoffs = CutoffPair.build(grid)
    d = cfg.delta
    rows = [("N", s, aniso_norm(v0, s)) for s in (0.0, 1.5 + d, 2.0 + d, 2.5 + d, 3.0 + d)]
    rows += [("chi_N", 3 + d, localized_norm(v0, cutoffs.chi, 3 + d)),
             ("psi_N", 3 + d, localized_norm(v0, cutoffs.psi, 3 + d))]
    s = 2.0 + d
    terms = div_curl_decomposition(v0, s)
    rows += [(f"divcurl_{name}", s, getattr(terms, name))
             for name in ("lhs", "l2", "curl", "div", "boundary")]
    rng = np.random.default_rng(cfg.seed)
    sample = [div_curl_decomposition(presets.divcurl_sample(grid, rng), s)
              for _ in range(cfg.n_random)]
    rows.append(("divcurl_C", s, fit_divcurl_constant(sample)))
    write_csv(out / "norms.csv", "norms", ["quantity", "s", "value"], rows)
    return EXIT_OK


HANDLERS = {
    "regularize": cmd_regularize,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "mms": cmd_mms,
    "norms": cmd_norms,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lelab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="key = value configuration file")
    parser.add_argument("--preset", choices=presets.PRESETS, help="override the datum preset")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(preset=args.preset, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[args.command](cfg, out)
    except (PressureNotConverged, SingularSystemError, ResolutionError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
