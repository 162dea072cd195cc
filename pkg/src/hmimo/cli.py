"""
Command-line front end.

    hmimo acf       empirical vs closed-form ACF
    hmimo nmse      NMSE versus SNR sweep
    hmimo spectrum  eigenvalue profile and effective ranks of R_iso
    hmimo gen       dump channel realizations
    hmimo calibrate dB gaps per eigenvalue-retention policy

Every command writes a CSV (or dump) plus a ``.manifest`` file next to it.
A ``--config FILE`` of ``key = value`` lines supplies defaults; flags win.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .channel import build_plane_wave_model, generate_correlated, generate_planewave, make_rng
from .correlation import (
    ArrayGeometry,
    Retention,
    asymptotic_rank,
    clarke_correlation_matrix,
    eigen_subspace,
)
from .experiments import (
    ExperimentConfig,
    calibration_table,
    gaps_at,
    prepare_sweep,
    run_acf_experiment,
    run_nmse_sweep,
)
from .io import manifest_path, parse_key_values, write_csv, write_manifest, write_realizations

log = logging.getLogger("hmimo")

SPACING_PRESETS = {"quarter": 0.25, "sixteenth": 1 / 16}
DEFAULT_SPECTRUM_POLICIES = ("relative:1e-5", "relative:1e-13", "power:0.99", "power:0.999")


class UsageError(Exception):
    pass


def parse_number(text: str) -> float:
    """Float or fraction such as ``1/16``."""
    text = text.strip()
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def parse_geometry(text: str) -> ArrayGeometry:
    """``NX,NY[,SPACING[,OFFSET_Z]]``; spacing in wavelengths, fractions allowed."""
    parts = [p for p in text.replace("x", ",").split(",") if p.strip()]
    if not 2 <= len(parts) <= 4:
        raise argparse.ArgumentTypeError(f"geometry must be NX,NY[,SPACING[,OFFSET_Z]], got {text!r}")
    try:
        nx, ny = int(parts[0]), int(parts[1])
        spacing = parse_number(parts[2]) if len(parts) > 2 else 0.5
        offset = parse_number(parts[3]) if len(parts) > 3 else 0.0
        return ArrayGeometry(nx, ny, spacing, offset_z=offset)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise argparse.ArgumentTypeError(f"invalid geometry {text!r}: {exc}") from exc


def parse_snr_range(text: str) -> tuple[float, ...]:
    """``LO:STEP:HI`` inclusive, or a comma list."""
    try:
        if ":" in text:
            lo, step, hi = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return tuple(round(lo + k * step, 10) for k in range(n))
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"malformed SNR range {text!r}; expected LO:STEP:HI") from exc


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def parse_retention(text: str) -> Retention:
    try:
        return Retention.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_estimators(text: str) -> tuple[str, ...]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    known = ("ls", "mmse", "rsls", "rsls-iso")
    for n in names:
        if n not in known:
            raise argparse.ArgumentTypeError(f"unknown estimator {n!r}; choose from {', '.join(known)}")
    unique = tuple(dict.fromkeys(names))
    if len(unique) != len(names):
        log.warning("duplicate estimator names removed: %s", ",".join(names))
    return unique


# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, out_default: str):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", default=out_default, help="output path")
    p.add_argument("--threads", type=positive_int, default=1, help="worker cap; output is identical for any value")
    p.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmimo", description="Holographic MIMO channel modeling and estimation.")
    parser.add_argument("--config", help="key = value file supplying defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("acf", help="empirical ACF against its closed form")
    p.add_argument("--geometry", type=parse_geometry, default=parse_geometry("256,1,1/16"))
    p.add_argument("--model", choices=("planewave", "toeplitz"), default="planewave")
    p.add_argument("--field", choices=("iso2d", "iso3d"), default="iso2d")
    p.add_argument("--realizations", type=positive_int, default=10_000)
    p.add_argument("--max-lag", type=parse_number, default=None, help="largest lag in wavelengths (default L/4)")
    _common(p, "acf.csv")

    p = sub.add_parser("nmse", help="NMSE versus SNR for the estimator family")
    p.add_argument("--geometry", type=parse_geometry, default=parse_geometry("32,32,1/4"))
    p.add_argument("--spacing", default="custom", help="quarter, sixteenth, custom (use --geometry spacing) or a number")
    p.add_argument("--field", choices=("iso2d", "iso3d"), default="iso3d")
    p.add_argument("--estimators", type=parse_estimators, default=("ls", "mmse", "rsls", "rsls-iso"))
    p.add_argument("--snr", type=parse_snr_range, default=parse_snr_range("-10:5:30"))
    p.add_argument("--trials", type=positive_int, default=1000)
    p.add_argument("--truncate-fraction", type=float, default=0.25)
    p.add_argument("--retention", type=parse_retention, default=Retention("relative", 1e-5))
    p.add_argument("--no-renormalize", action="store_true", help="keep the truncated trace instead of restoring N*beta")
    p.add_argument("--gap-snr", type=float, default=10.0, help="SNR at which dB gaps are reported")
    _common(p, "nmse.csv")

    p = sub.add_parser("spectrum", help="eigenvalues and effective ranks of R_iso")
    p.add_argument("--geometry", type=parse_geometry, default=parse_geometry("32,32,1/4"))
    p.add_argument("--field", choices=("iso2d", "iso3d"), default="iso3d")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--retention", type=parse_retention, action="append", help="repeatable; default: a standard set")
    _common(p, "spectrum.csv")

    p = sub.add_parser("gen", help="dump channel realizations")
    p.add_argument("--geometry", type=parse_geometry, default=parse_geometry("64,1,1/4"), help="receive array")
    p.add_argument("--tx-geometry", type=parse_geometry, default=None, help="transmit array (omit for SIMO)")
    p.add_argument("--link-distance", type=float, default=0.0, help="receive plane offset r_z in wavelengths")
    p.add_argument("--model", choices=("planewave", "toeplitz"), default="planewave")
    p.add_argument("--field", choices=("iso2d", "iso3d"), default="iso3d")
    p.add_argument("--count", type=positive_int, default=1)
    p.add_argument("--format", choices=("csv", "bin"), default="csv")
    _common(p, "channels.csv")

    p = sub.add_parser("calibrate", help="analytic dB gaps for a set of retention policies")
    p.add_argument("--retention", type=parse_retention, action="append")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--truncate-fraction", type=float, default=0.25)
    _common(p, "calibration.csv")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument("--config")
    pre, _ = pre_parser.parse_known_args(argv)
    if not pre.config:
        return parser.parse_args(argv)
    try:
        conf = parse_key_values(Path(pre.config).read_text())
    except (OSError, ValueError) as exc:
        parser.error(f"cannot read config {pre.config}: {exc}")
    # re-feed config values as flags placed before the user's own flags,
    # so explicit flags override them
    args = parser.parse_args(argv)
    sub_argv = []
    for key, value in conf.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            sub_argv.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            sub_argv += [flag, value]
    head = argv[: argv.index(args.command) + 1]
    tail = argv[argv.index(args.command) + 1:]
    return parser.parse_args(head + sub_argv + tail)


def _resolved(args: argparse.Namespace) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, ArrayGeometry):
            value = f"{value.n_x},{value.n_y},{value.spacing_x:.12g},{value.offset_z:.12g}"
        elif isinstance(value, Retention):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        out[f"config.{key}"] = value
    return out


def _finish(args, started: dt.datetime, outputs: list[Path], summary: dict) -> None:
    entries = {"command": args.command, "version": __version__, "master_seed": args.seed}
    entries.update(_resolved(args))
    entries.update({f"summary.{k}": v for k, v in summary.items()})
    entries["started"] = started.isoformat(timespec="seconds")
    entries["finished"] = dt.datetime.now().isoformat(timespec="seconds")
    entries["outputs"] = [str(p) for p in outputs]
    write_manifest(manifest_path(args.out), entries)


def cmd_acf(args) -> dict:
    g = args.geometry
    if args.field == "iso2d" and not g.is_linear:
        raise UsageError("--field iso2d needs a linear geometry (NY = 1)")
    max_lag = None
    if args.max_lag is not None:
        mx = min(int(round(args.max_lag / g.spacing_x)), g.n_x - 1)
        my = 0 if g.is_linear else min(int(round(args.max_lag / g.spacing_y)), g.n_y - 1)
        max_lag = (mx, my)
    records = run_acf_experiment(
        g, args.field, args.model, args.realizations, seed=args.seed, threads=args.threads, max_lag=max_lag
    )
    write_csv(
        args.out,
        ["lag_x", "lag_y", "empirical", "closed_form", "abs_error"],
        ([r.lag_x, r.lag_y, r.empirical, r.closed_form, r.abs_error] for r in records),
    )
    outputs = [Path(args.out)]
    if args.plot:
        from .plotting import plot_acf

        outputs.append(plot_acf(records, Path(args.out).with_suffix(".png")))
    args._outputs = outputs
    return {
        "max_abs_error": max(r.abs_error for r in records),
        "max_abs_imag": max(abs(r.imag) for r in records),
        "lags": len(records),
    }


def _nmse_config(args) -> ExperimentConfig:
    g = args.geometry
    if args.spacing in SPACING_PRESETS:
        spacing = SPACING_PRESETS[args.spacing]
    elif args.spacing == "custom":
        spacing = g.spacing_x
    else:
        spacing = parse_number(args.spacing)
    return ExperimentConfig(
        n_x=g.n_x,
        n_y=g.n_y,
        spacing=spacing,
        field_model=args.field,
        estimators=args.estimators,
        snr_grid_db=args.snr,
        trials=args.trials,
        master_seed=args.seed,
        retention=args.retention,
        truncate_fraction=args.truncate_fraction,
        renormalize=not args.no_renormalize,
        threads=args.threads,
    )


def cmd_nmse(args) -> dict:
    try:
        cfg = _nmse_config(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    setup = prepare_sweep(cfg)
    records = run_nmse_sweep(cfg, setup)
    write_csv(
        args.out,
        ["estimator", "snr_db", "nmse_db", "nmse_linear", "analytic_db", "stderr", "trials"],
        ([r.estimator, r.snr_db, r.nmse_db, r.empirical_nmse, r.analytic_db, r.stderr, r.trials] for r in records),
    )
    outputs = [Path(args.out)]
    if args.plot:
        from .plotting import plot_nmse

        outputs.append(plot_nmse(records, Path(args.out).with_suffix(".png")))
    args._outputs = outputs
    summary = {
        "spacing": cfg.spacing,
        "rank_iso": setup.rank_iso,
        "keep_count": setup.keep,
        "asymptotic_rank": asymptotic_rank(cfg.geometry),
    }
    if "ls" in cfg.estimators and args.gap_snr in cfg.snr_grid_db:
        for name, gap in gaps_at(records, args.gap_snr).items():
            summary[f"gap_ls_minus_{name}_db@{args.gap_snr:g}dB"] = gap
    return summary


def cmd_spectrum(args) -> dict:
    g = args.geometry
    if args.field == "iso2d" and not g.is_linear:
        raise UsageError("--field iso2d needs a linear geometry (NY = 1)")
    R = clarke_correlation_matrix(g, args.field, args.beta)
    w, _ = R.eigh()
    policies = args.retention or [Retention.parse(p) for p in DEFAULT_SPECTRUM_POLICIES]
    summary = {}
    comments = [f"geometry={g.describe()} field={args.field} N={g.size} beta={args.beta:g}"]
    for pol in policies:
        r = pol.count(w)
        summary[f"effective_rank[{pol}]"] = r
        comments.append(f"effective_rank[{pol}]={r} ratio={r / g.size:.12g}")
    if math.isclose(g.spacing_x, g.spacing_y):
        a = asymptotic_rank(g)
        summary["asymptotic_rank"] = a
        summary["asymptotic_ratio"] = a / g.size
        comments.append(f"asymptotic_rank={a:.12g} ratio={a / g.size:.12g}")
    summary["eigenvalue_sum"] = float(w.sum())
    comments.append(f"eigenvalue_sum={w.sum():.12g}")
    write_csv(
        args.out,
        ["index", "eigenvalue", "relative"],
        ([i + 1, v, v / w[0]] for i, v in enumerate(w)),
        comments=comments,
    )
    outputs = [Path(args.out)]
    if args.plot:
        from .plotting import plot_spectrum

        marks = {k: v for k, v in summary.items() if k.startswith(("effective", "asymptotic_rank"))}
        outputs.append(plot_spectrum(w, Path(args.out).with_suffix(".png"), marks))
    args._outputs = outputs
    return summary


def cmd_gen(args) -> dict:
    rx = args.geometry
    if args.link_distance:
        rx = ArrayGeometry(rx.n_x, rx.n_y, rx.spacing_x, rx.spacing_y, args.link_distance)
    rng = make_rng(args.seed)
    if args.model == "planewave":
        model = build_plane_wave_model(rx, args.tx_geometry, args.field)
        H = generate_planewave(model, rng, args.count)
        if model.is_simo:
            H = H.T[:, :, None]
        tag = "planewave"
    else:
        if args.tx_geometry is not None:
            raise UsageError("the toeplitz generator is SIMO only")
        sub = eigen_subspace(clarke_correlation_matrix(rx, args.field), Retention("power", 1.0))
        H = generate_correlated(sub, rng, args.count).T[:, :, None]
        tag = "toeplitz"
    tx = args.tx_geometry.describe() if args.tx_geometry is not None else "simo"
    meta = {"rx": rx.describe(), "tx": tx, "rz": f"{rx.offset_z:g}", "model": tag, "field": args.field, "seed": args.seed}
    write_realizations(args.out, H, meta, args.format)
    args._outputs = [Path(args.out)]
    power = float(np.mean(np.sum(np.abs(H) ** 2, axis=(1, 2))))
    return {"mean_frobenius_power": power, "expected_power": H.shape[1] * H.shape[2]}


def cmd_calibrate(args) -> dict:
    policies = args.retention or [Retention("relative", v) for v in (1e-5, 1e-8, 1e-10, 1e-12, 1e-13, 1e-14)]
    rows = calibration_table(policies, snr_db=args.snr_db, truncate_fraction=args.truncate_fraction)
    write_csv(
        args.out,
        ["spacing", "retention", "rank_iso", "keep_count", "ls_minus_mmse_db", "ls_minus_rsls_iso_db"],
        ([r.spacing, r.retention, r.rank_iso, r.keep, r.ls_minus_mmse_db, r.ls_minus_rsls_iso_db] for r in rows),
    )
    args._outputs = [Path(args.out)]
    return {"rows": len(rows)}


COMMANDS = {"acf": cmd_acf, "nmse": cmd_nmse, "spectrum": cmd_spectrum, "gen": cmd_gen, "calibrate": cmd_calibrate}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    started = dt.datetime.now()
    try:
        summary = COMMANDS[args.command](args)
        outputs = args.__dict__.pop("_outputs")
        _finish(args, started, outputs, summary)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"hmimo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
