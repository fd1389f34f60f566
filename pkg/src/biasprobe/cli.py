"""Command line interface.

Subcommands: simulate (sample the causal model and report induced
dependence), dsep (d-separation queries), probe (full scoring run), fit
(re-fit a cached series), report (summary table over runs), serve (HTTP
service). Exit codes: 0 success, 1 configuration or usage error, 2 scorer or
network failure, 3 degenerate statistics.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import (
    BiasProbeError,
    DegenerateSeriesError,
    DegenerateVariableError,
    ScorerError,
)
from .experiment import ExperimentConfig, load_run, run_experiment
from .scm import (
    ScmParams,
    apply_selection,
    build_dag,
    d_separated,
    dependence_report,
    sample_population,
    samples_to_csv,
)
from .stats import fit as fit_series
from .stats import read_series_csv, render_report, report_table

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # Usage problems are configuration errors: exit 1, not argparse's 2.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="biasprobe", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="sample the causal model and measure dependence")
    sim.add_argument("--seed", type=int, default=7)
    sim.add_argument("--n", type=int, default=200000)
    sim.add_argument("--p-female", type=float, default=0.5)
    sim.add_argument("--levels", type=int, default=22)
    sim.add_argument("--base-f", type=float, default=0.2)
    sim.add_argument("--gain-f", type=float, default=0.6)
    sim.add_argument("--base-m", type=float, default=0.5)
    sim.add_argument("--gain-m", type=float, default=0.0)
    sim.add_argument("--csv", help="also write the samples as CSV to this path")
    sim.set_defaults(func=_cmd_simulate)

    dsep = sub.add_parser("dsep", help="query d-separation on a built-in graph")
    dsep.add_argument("--dag", choices=("with_gender", "with_selection"), required=True)
    dsep.add_argument("--a", required=True)
    dsep.add_argument("--b", required=True)
    dsep.add_argument("--given", nargs="*", default=[])
    dsep.set_defaults(func=_cmd_dsep)

    probe = sub.add_parser("probe", help="render probes, score them, aggregate and fit")
    probe.add_argument("--config", help="JSON config file (replaces the flags below)")
    probe.add_argument("--scorer", choices=("synthetic", "remote", "mock"))
    probe.add_argument("--category", choices=("date", "place", "subreddit"))
    probe.add_argument("--axis-file")
    probe.add_argument("--template-file")
    probe.add_argument("--lexicon-file")
    probe.add_argument("--k", type=int)
    probe.add_argument("--degree", type=int, default=1)
    probe.add_argument("--seed", type=int, default=7)
    probe.add_argument("--out", default="runs")
    probe.add_argument("--endpoint")
    probe.add_argument("--mask-token")
    probe.add_argument("--table", help="mock scorer table (JSON)")
    probe.add_argument("--corpus-n", type=int, default=200000)
    probe.add_argument("--smoothing", type=float, default=1.0)
    probe.set_defaults(func=_cmd_probe)

    fit_cmd = sub.add_parser("fit", help="re-fit the series of a cached run")
    fit_cmd.add_argument("--run", required=True, help="run directory (contains series.csv)")
    fit_cmd.add_argument("--degree", type=int, default=1)
    fit_cmd.set_defaults(func=_cmd_fit)

    report = sub.add_parser("report", help="slope / Pearson's r table over runs")
    report.add_argument("runs", nargs="*", help="run directories; default scans --out")
    report.add_argument("--out", default="runs")
    report.set_defaults(func=_cmd_report)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--out", default="runs")
    serve.add_argument("--static", help="directory of UI assets to serve at /")
    serve.set_defaults(func=_cmd_serve)

    return parser


def _cmd_simulate(args) -> int:
    params = ScmParams(
        p_female=args.p_female,
        axis_levels=args.levels,
        access_base_f=args.base_f,
        access_gain_f=args.gain_f,
        access_base_m=args.base_m,
        access_gain_m=args.gain_m,
        rng_seed=args.seed,
    )
    samples = sample_population(params, args.n)
    selected = apply_selection(samples)
    if args.csv:
        samples_to_csv(samples, args.csv)
    full = dependence_report(samples, "w", "g")
    print(
        f"full population: n={full.n}  mi_nats={full.mi_nats:.6f}  "
        f"chi2={full.chi2:.2f}  p={full.p_value:.3g}  dof={full.dof}"
    )
    sel = dependence_report(selected, "w", "g")
    print(
        f"selected (s=1):  n={sel.n}  mi_nats={sel.mi_nats:.6f}  "
        f"chi2={sel.chi2:.2f}  p={sel.p_value:.3g}  dof={sel.dof}"
    )
    return 0


def _cmd_dsep(args) -> int:
    dag = build_dag(args.dag)
    separated = d_separated(dag, args.a, args.b, args.given)
    given = ", ".join(args.given) if args.given else "nothing"
    verdict = "d-separated" if separated else "not d-separated"
    print(f"{args.a} and {args.b} given {given}: {verdict}")
    return 0


def _require_both_usable(fit_result) -> None:
    if fit_result.pearson_female is None and fit_result.pearson_male is None:
        raise DegenerateSeriesError("both gender series are constant; nothing to correlate")


def _cmd_probe(args) -> int:
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BiasProbeError(f"cannot read config {args.config}: {exc}") from exc
        config = ExperimentConfig.from_dict(raw)
    else:
        if not args.scorer:
            raise BiasProbeError("either --config or --scorer is required")
        config = ExperimentConfig(
            scorer=args.scorer,
            category=args.category,
            axis_file=args.axis_file,
            template_file=args.template_file,
            lexicon_file=args.lexicon_file,
            k=args.k,
            fit_degree=args.degree,
            seed=args.seed,
            out_dir=args.out,
            corpus_n=args.corpus_n,
            smoothing=args.smoothing,
            endpoint=args.endpoint,
            mask_token=args.mask_token,
            table_file=args.table,
        )
    result = run_experiment(config)
    manifest = result.manifest
    print(
        f"run {manifest.run_id}: {manifest.probe_count} probes over "
        f"{len(result.series)} axis values -> {result.run_dir}"
    )
    print(render_report(report_table([(manifest.label, result.fit)])))
    _require_both_usable(result.fit)
    return 0


def _cmd_fit(args) -> int:
    series = read_series_csv(Path(args.run) / "series.csv")
    result = fit_series(series, args.degree)
    print(json.dumps(result.to_dict(), indent=2))
    _require_both_usable(result)
    return 0


def _cmd_report(args) -> int:
    if args.runs:
        run_dirs = [Path(p) for p in args.runs]
    else:
        root = Path(args.out)
        run_dirs = sorted(p.parent for p in root.glob("*/manifest.json"))
    if not run_dirs:
        raise BiasProbeError(f"no runs found under {args.out}")
    labeled = []
    for run_dir in run_dirs:
        run = load_run(run_dir)
        labeled.append((f"{run.manifest.label} {run.manifest.run_id[:8]}", run.fit))
    print(render_report(report_table(labeled)))
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    static = args.static
    if static is None and Path("frontend/dist").is_dir():
        static = "frontend/dist"
    serve(port=args.port, host=args.host, out_dir=args.out, static_dir=static)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DegenerateVariableError, DegenerateSeriesError) as exc:
        print(f"degenerate statistics: {exc}", file=sys.stderr)
        return 3
    except ScorerError as exc:
        print(f"scorer failure: {exc}", file=sys.stderr)
        return 2
    except BiasProbeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
