"""Command-line interface.

One executable with subcommands for sampling, fitting, density grids,
elicitation, diagnostics, and the Monte Carlo studies.  Conventions:

* every randomized command takes --seed (default printed to stderr);
* exit code 0 on success, 1 on usage or I/O errors, 2 on numerical-domain
  errors (with a machine-readable error JSON on stdout);
* report-producing commands write delimited data and, next to it, rendered
  figures (disable with --no-figures).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ._rng import DEFAULT_SEED
from .bayes import HmcConfig, PriorSpec, be1, be2, hmc_fit, sbc
from .core import density_grid, sample
from .diagnostics import DEFAULT_M_THRESHOLD, gn_test, m_test
from .elicitation import elicit
from .errors import BibetaError
from .estimators import MOMENT_METHODS, bootstrap_ci, estimate
from .experiments import (
    ExperimentSpec,
    GeneratorSpec,
    run_misspecified,
    run_well_specified,
    sampling_distribution,
)
from .types import AlphaParams, PairedSample

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_DOMAIN = 2


def _default_threads() -> int:
    env = os.environ.get("BIBETA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parse_alpha(text: str) -> AlphaParams:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 4:
        raise ValueError(f"--alpha needs four comma-separated values, got {text!r}")
    return AlphaParams.from_array([float(p) for p in parts])


def _parse_prior(text: str) -> PriorSpec:
    path = Path(text)
    if path.exists():
        return PriorSpec.from_json(path.read_text())
    return PriorSpec.from_json(text)


def _read_sample(path: str) -> PairedSample:
    return PairedSample.from_csv(Path(path).read_text())


def _announce_seed(seed: int) -> None:
    print(f"seed: {seed}", file=sys.stderr)


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommand implementations ----------------------------------------------


def _cmd_sample(args) -> int:
    alpha = _parse_alpha(args.alpha)
    _announce_seed(args.seed)
    data = sample(alpha, args.n, args.seed)
    _write_or_print(data.to_csv(), args.out)
    return _EXIT_OK


def _cmd_fit(args) -> int:
    data = _read_sample(args.input)
    method = args.method.lower()
    payload: dict = {}
    if method in MOMENT_METHODS:
        _announce_seed(args.seed)
        report = estimate(data, method)
        payload["estimate"] = json.loads(report.to_json())
        if args.bootstrap > 0:
            ci = bootstrap_ci(data, method, B=args.bootstrap, level=args.level, seed=args.seed)
            payload["bootstrap"] = json.loads(ci.to_json())
            if args.out_dir:
                out_dir = Path(args.out_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                (out_dir / "resamples.csv").write_text(ci.resamples_csv())
                if not args.no_figures:
                    from .plotting import save_bootstrap_pairs

                    save_bootstrap_pairs(ci.resample_estimates, out_dir / "resamples_pairs.png")
    elif method in ("be1", "be2"):
        _announce_seed(args.seed)
        prior = _parse_prior(args.prior)
        config = HmcConfig(
            chains=args.chains,
            warmup=args.warmup,
            iters=args.iters,
            target_accept=args.target_accept,
            seed=args.seed,
        )
        draws = hmc_fit(data, prior, config)
        report = be1(draws) if method == "be1" else be2(draws)
        payload["estimate"] = json.loads(report.to_json())
        payload["diagnostics"] = json.loads(draws.diagnostics_json())
        if args.out_dir:
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "draws.csv").write_text(draws.to_csv())
            (out_dir / "diagnostics.json").write_text(draws.diagnostics_json())
    else:
        raise ValueError(f"unknown method {args.method!r}")
    print(json.dumps(payload))
    return _EXIT_OK


def _cmd_density(args) -> int:
    alpha = _parse_alpha(args.alpha)
    k = args.grid
    if k < 2:
        raise ValueError("--grid must be at least 2")
    centers = (np.arange(k) + 0.5) / k
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    values = density_grid(alpha, gx.ravel(), gy.ravel()).reshape(k, k)
    lines = ["x,y,density"]
    for i in range(k):
        for j in range(k):
            v = values[i, j]
            lines.append(f"{gx[i, j]:.17g},{gy[i, j]:.17g},{'undefined' if np.isnan(v) else f'{v:.17g}'}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    if args.out and not args.no_figures:
        from .plotting import save_density_heatmap

        save_density_heatmap(centers, centers, values, Path(args.out).with_suffix(".png"))
    return _EXIT_OK


def _cmd_elicit(args) -> int:
    result = elicit(args.m1, args.m2, args.v1, args.v2, args.rho, preference=args.preference)
    print(result.to_json())
    return _EXIT_OK


def _cmd_diagnose(args) -> int:
    data = _read_sample(args.input)
    _announce_seed(args.seed)
    gn = gn_test(data)
    m = m_test(data, c=args.c, B=args.bootstrap if args.bootstrap > 0 else None, seed=args.seed)
    print(json.dumps({"gn": json.loads(gn.to_json()), "m": json.loads(m.to_json())}))
    return _EXIT_OK


def _load_config(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    kind = cfg.get("kind", "well-specified")
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    if kind == "sampling-distribution":
        generator = GeneratorSpec.from_dict(cfg["generator"])
        seed = int(cfg.get("seed", DEFAULT_SEED))
        _announce_seed(seed)
        summary = sampling_distribution(
            statistic=cfg.get("statistic", "pn"),
            generator=generator,
            n=int(cfg["n"]),
            reps=int(cfg.get("reps", 200)),
            seed=seed,
        )
        if out_dir:
            (out_dir / "histogram.csv").write_text(summary.histogram_csv())
            (out_dir / "summary.json").write_text(summary.to_json())
            if not args.no_figures and summary.values.size:
                from .plotting import save_statistic_histogram

                save_statistic_histogram(
                    summary.values,
                    out_dir / "histogram.png",
                    overlay_standard_normal=summary.statistic == "gn_z",
                )
        print(summary.to_json())
        return _EXIT_OK

    threads = args.threads if args.threads is not None else cfg.get("threads", _default_threads())
    spec = ExperimentSpec.from_dict({**cfg, "threads": threads})
    _announce_seed(spec.seed)
    if kind == "well-specified":
        table = run_well_specified(spec)
    elif kind == "misspecified":
        table = run_misspecified(spec)
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    if out_dir:
        (out_dir / "metrics.csv").write_text(table.to_csv())
        (out_dir / "metrics.json").write_text(table.to_json())
        if not args.no_figures:
            from .plotting import save_metric_bars

            save_metric_bars(table, "mape", out_dir / "mape.png")
            save_metric_bars(table, "bias", out_dir / "bias.png")
    print(table.to_json())
    return _EXIT_OK


def _cmd_sbc(args) -> int:
    cfg = _load_config(args.config)
    prior = PriorSpec.from_json(json.dumps(cfg.get("prior", {"kind": "gamma", "a": 1, "b": 1})))
    config = HmcConfig.from_dict(cfg.get("hmc", {}))
    seed = int(cfg.get("seed", DEFAULT_SEED))
    _announce_seed(seed)
    report = sbc(
        prior,
        n=int(cfg["n"]),
        L=int(cfg["L"]),
        N=int(cfg["N"]),
        config=config,
        seed=seed,
    )
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "ranks.csv").write_text(report.histogram_csv())
        (out_dir / "sbc.json").write_text(report.to_json())
        if not args.no_figures:
            from .plotting import save_rank_histograms

            save_rank_histograms(report.histogram(), report.ranks.shape[0], out_dir / "ranks.png")
    print(report.to_json())
    return _EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bibeta",
        description="Bivariate beta distribution: sampling, estimation, diagnostics, studies.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads for replicated studies (default: BIBETA_THREADS or logical cores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw pairs and emit CSV")
    p.add_argument("--alpha", required=True, help="four comma-separated positive reals")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("fit", help="estimate the parameter vector from a CSV sample")
    p.add_argument("input", help="CSV file with header x,y")
    p.add_argument("--method", required=True, choices=list(MOMENT_METHODS) + ["be1", "be2"])
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap resamples (moment methods)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--prior", default='{"kind": "gamma", "a": 1, "b": 1}', help="prior JSON or path")
    p.add_argument("--chains", type=int, default=4)
    p.add_argument("--warmup", type=int, default=2000)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--target-accept", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out-dir", default=None, help="directory for resamples/draws reports")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("density", help="density values on an interior grid")
    p.add_argument("--alpha", required=True)
    p.add_argument("--grid", type=int, required=True, help="grid cells per axis (cell centers)")
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=_cmd_density)

    p = sub.add_parser("elicit", help="moment summary to parameter vector")
    p.add_argument("--m1", type=float, required=True)
    p.add_argument("--m2", type=float, required=True)
    p.add_argument("--v1", type=float, required=True)
    p.add_argument("--v2", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--preference", choices=["means-first", "balanced"], default="means-first")
    p.set_defaults(handler=_cmd_elicit)

    p = sub.add_parser("diagnose", help="model-adequacy tests on a CSV sample")
    p.add_argument("input")
    p.add_argument("--c", type=float, default=DEFAULT_M_THRESHOLD)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(handler=_cmd_diagnose)

    p = sub.add_parser("experiment", help="run a replication study from a JSON config")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("sbc", help="simulation-based calibration from a JSON config")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(handler=_cmd_sbc)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BibetaError as err:
        print(json.dumps({"error": type(err).__name__, "message": str(err)}))
        return _EXIT_DOMAIN
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
