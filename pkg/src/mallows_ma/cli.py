"""
Command-line entry point.

    mallows-ma simulate --config exp.ini --out runs/a [--seed N] [--threads N] [--full-scale] [--format csv|svg]
    mallows-ma fit --data y.csv (--basis psi.csv | --design X.csv) --method adap --out fit/
    mallows-ma oracle --theta theta.csv --sigma2 1 --n 100 --out oracle/
    mallows-ma plot --results runs/a/results.csv --out runs/a

Exit codes: 0 success, 2 bad input (config, CSV, arguments), 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .candidates import (
    build_all_nested,
    build_group_blocks,
    build_univariate,
    enumerate_all_subsets,
    read_candidates,
)
from .estimators import (
    PenaltySpec,
    adap_fit,
    estimate_sigma2,
    hard_threshold_fit,
    mma_fit,
    soft_threshold_fit,
    write_fit_csv,
)
from .risk import optimal_all_subset_risk, optimal_ma_risk
from .simlab import (
    ConfigError,
    config_echo,
    load_config,
    read_result_csv,
    run_experiment,
    summarize,
    write_result_csv,
)
from .spectral import DimensionError, MeanSpec, basis_from_svd, canonical_basis, read_basis_csv, read_coefs_csv
from .svgplot import bar_chart, line_chart

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3
ORACLE_KINDS = ("all_subset", "all_nested", "group_blocks", "univariate")

log = logging.getLogger("mallows_ma")


class InputError(ValueError):
    pass


def _read_table(path) -> tuple:
    """CSV with a header row of names and numeric rows."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: malformed CSV ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InputError(f"{path}: rows do not match the {len(header)}-column header")
    return header, data


def _read_y(path) -> np.ndarray:
    header, data = _read_table(path)
    if "y" not in header:
        raise InputError(f"{path}: no 'y' column")
    return data[:, header.index("y")]


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out} ({exc.strerror})") from None
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, master_seed=args.seed)
    if args.full_scale:
        cfg = cfg.at_full_scale()
    out = _out_dir(args.out)
    result = run_experiment(cfg, threads=args.threads)
    write_result_csv(result, out / "results.csv")
    manifest = {
        "version": __version__,
        "config_file": Path(args.config).name,
        "config_text": Path(args.config).read_text(),
        "config": config_echo(cfg),
        "seed": cfg.master_seed,
        "full_scale": bool(args.full_scale),
        "metadata": {k: ({str(p): v for p, v in val.items()} if isinstance(val, dict) else val)
                     for k, val in result.metadata.items()},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if args.format == "svg":
        _write_plots(result.rows, out)
    return EXIT_OK


def _basis_from_args(args, n):
    if (args.basis is None) == (args.design is None):
        raise InputError("give exactly one of --basis and --design")
    if args.basis is not None:
        try:
            basis = read_basis_csv(args.basis)
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from None
    else:
        _, X = _read_table(args.design)
        basis = basis_from_svd(X)
    if basis.n != n:
        raise InputError(f"y has n={n} rows but the basis has n={basis.n}")
    return basis


def _candidates(spec: str, p: int):
    if spec == "group_blocks":
        return build_group_blocks(p) if p >= 2 else build_all_nested(p)
    if spec == "all_nested":
        return build_all_nested(p)
    if spec == "univariate":
        return build_univariate(p)
    if spec == "all_subsets":
        return enumerate_all_subsets(p)
    try:
        return read_candidates(spec, p)
    except OSError as exc:
        raise InputError(f"{spec}: cannot read candidates ({exc.strerror})") from None
    except ValueError as exc:
        raise InputError(f"{spec}: {exc}") from None


def _penalty(spec: str, n: int, p: int) -> PenaltySpec:
    named = {"mallows": lambda: PenaltySpec.mallows(n), "adaptive": lambda: PenaltySpec.adaptive(n, p),
             "log_n": lambda: PenaltySpec.log_n(n)}
    if spec in named:
        return named[spec]()
    try:
        return PenaltySpec.custom(float(spec))
    except ValueError:
        raise InputError(f"penalty must be mallows, adaptive, log_n or a number, got {spec!r}") from None


def cmd_fit(args) -> int:
    y = _read_y(args.data)
    basis = _basis_from_args(args, y.size)
    out = _out_dir(args.out)
    if args.sigma2 == "estimate":
        k = basis.p if args.method != "mma" else None
        if k is not None and k >= basis.n:
            raise InputError("sigma2 estimation needs p < n; pass --sigma2")
        sigma2 = "estimate" if args.method == "mma" else estimate_sigma2(y, basis, k)
    else:
        try:
            sigma2 = float(args.sigma2)
        except ValueError:
            raise InputError(f"--sigma2 must be a number or 'estimate', got {args.sigma2!r}") from None
    if args.method == "mma":
        cset = _candidates(args.candidates, basis.p)
        if sigma2 == "estimate" and cset.sizes.max() >= basis.n:
            raise InputError("sigma2 estimation needs the largest candidate smaller than n; pass --sigma2")
        fit = mma_fit(y, basis, cset, _penalty(args.penalty, basis.n, basis.p), sigma2=sigma2)
    else:
        fn = {"adap": adap_fit, "soft": soft_threshold_fit, "hard": hard_threshold_fit}[args.method]
        fit = fn(y, basis, sigma2, args.lam)
    write_fit_csv(fit, out / "fit.csv")
    with open(out / "fitted.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "fitted"])
        for i, v in enumerate(fit.fitted, start=1):
            w.writerow([i, repr(float(v))])
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        theta = read_coefs_csv(args.theta)
    except OSError as exc:
        raise InputError(f"{args.theta}: cannot read ({exc.strerror})") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    p, n = theta.size, args.n
    if p < 1:
        raise InputError("theta is empty")
    if n < p:
        raise InputError(f"need n >= p (n={n}, p={p})")
    if args.sigma2 < 0:
        raise InputError("sigma2 must be non-negative")
    kinds = ORACLE_KINDS if args.candidates == "all" else (args.candidates,)
    mean = MeanSpec(theta, canonical_basis(n, p))
    out = _out_dir(args.out)
    with open(out / "oracle.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidates", "n", "p", "sigma2", "risk"])
        for kind in kinds:
            if kind == "all_subset":
                risk = optimal_all_subset_risk(theta, args.sigma2, n).risk
            else:
                risk = optimal_ma_risk(mean, args.sigma2, _candidates(kind, p)).risk
            w.writerow([kind, n, p, repr(float(args.sigma2)), repr(float(risk))])
    return EXIT_OK


def render_plots(rows) -> dict:
    """
    SVG text per file name: risk ratio against n (log axis) for nested
    runs, ratio against p with the dashed ``2 log p`` curve for each
    all-subset n, and mean-loss bars for each pcr n.
    """
    rows, _ = summarize(rows)
    if not rows:
        return {"empty.svg": line_chart({}, "no results", "n", "risk ratio")}
    groups = defaultdict(list)
    for r in rows:
        groups[(r.scenario, None if r.scenario == "nested" else r.n)].append(r)
    out = {}
    for (scenario, n), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
        series = defaultdict(list)
        if scenario == "nested":
            for r in rs:
                series[r.method].append((r.n, r.risk_ratio))
            out["nested.svg"] = line_chart(series, "nested candidates", "n", "risk ratio", log_x=True)
        elif scenario == "all_subset":
            for r in rs:
                series[r.method].append((r.p, r.risk_ratio))
            out[f"all_subset_n{n}.svg"] = line_chart(
                series, f"all-subset oracle, n = {n}", "p", "risk ratio",
                reference=lambda x: 2.0 * math.log(x) if x > 1 else None, reference_label="2 log p",
            )
        else:
            out[f"pcr_n{n}.svg"] = bar_chart([(r.method, r.mean_loss) for r in rs], f"principal components, n = {n}",
                                             "mean loss")
    return out


def _write_plots(rows, out: Path) -> list:
    written = []
    for name, svg in render_plots(rows).items():
        (out / name).write_text(svg)
        written.append(name)
    return written


def cmd_plot(args) -> int:
    try:
        rows = read_result_csv(args.results)
    except OSError as exc:
        raise InputError(f"{args.results}: cannot read ({exc.strerror})") from None
    except (ValueError, StopIteration) as exc:
        raise InputError(str(exc)) from None
    _write_plots(rows, _out_dir(args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mallows-ma", description="Model averaging fits, oracle risks and simulation experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("-v", "--verbose", action="count", default=0)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from an INI config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override the master seed")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--full-scale", action="store_true", help="1000 replications at the large sizes")
    s.add_argument("--format", choices=("csv", "svg"), default="csv", help="svg also renders plots")
    common(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit one estimator to a response")
    f.add_argument("--data", required=True, help="CSV with a 'y' column")
    f.add_argument("--basis", help="CSV of basis columns psi_1..psi_p")
    f.add_argument("--design", help="design-matrix CSV; its SVD supplies the basis")
    f.add_argument("--method", choices=("mma", "adap", "soft", "hard"), required=True)
    f.add_argument("--candidates", default="group_blocks",
                   help="group_blocks, all_nested, univariate, all_subsets or a candidate file (mma)")
    f.add_argument("--penalty", default="mallows", help="mallows, adaptive, log_n or a number (mma)")
    f.add_argument("--sigma2", default="estimate", help="noise variance or 'estimate'")
    f.add_argument("--lam", type=float, help="threshold multiplier (adap/soft/hard)")
    common(f)
    f.set_defaults(func=cmd_fit)

    o = sub.add_parser("oracle", help="optimal averaging risks for known coefficients")
    o.add_argument("--theta", required=True, help="coefficient CSV (j,theta)")
    o.add_argument("--sigma2", type=float, required=True)
    o.add_argument("--n", type=int, required=True)
    o.add_argument("--candidates", choices=ORACLE_KINDS + ("all",), default="all")
    common(o)
    o.set_defaults(func=cmd_oracle)

    pl = sub.add_parser("plot", help="render SVG plots from a results CSV")
    pl.add_argument("--results", required=True)
    pl.add_argument("--format", choices=("svg",), default="svg")
    common(pl)
    pl.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ConfigError, InputError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - any failure past input validation is a runtime error
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
