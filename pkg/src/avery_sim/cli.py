"""Command-line front end: ``avery-sim <verb> ...``.

Exit status: 0 on success, 1 for parse/validation errors, 2 for simulation failures.
Every failure prints exactly one ``ERROR <code>: <detail>`` line on stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, svg
from .core import (
    COMPARISON_POLICIES,
    Dataset,
    MissionGoal,
    Policy,
    Tier,
    derive_threshold,
    load_lut,
)
from .errors import AverySimError, InputError, IOFailure
from .traces import write_trace_csv

log = logging.getLogger("avery_sim")

_TIER_LEVEL = {Tier.HIGH_THROUGHPUT: 1, Tier.BALANCED: 2, Tier.HIGH_ACCURACY: 3}


class UsageError(InputError):
    code = "E_ARG"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _out_dir(raw) -> Path:
    out = Path(raw)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
    return out


def _load(args):
    scenario = harness.load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "policy", None):
        overrides["policy"] = Policy(args.policy)
    if getattr(args, "goal", None):
        overrides["goal"] = MissionGoal(args.goal)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        scenario = replace(scenario, **overrides)
    # validate referenced inputs before running anything
    scenario.resolve_lut()
    trace = scenario.resolve_trace()
    return scenario, trace


def _print_summaries(summaries):
    sys.stdout.write(harness.summary_csv(summaries))


def _plots(out: Path, trace, lut, results, duration_s):
    threshold = lut.bandwidth_threshold_mbps
    points = [(i * trace.resolution_s, b) for i, b in enumerate(trace.samples)]
    points.append((trace.duration_s, trace.samples[-1]))
    _write(
        out / "bandwidth.svg",
        svg.line_chart(
            [("bandwidth", points)],
            "Bandwidth over time",
            "time (s)",
            "Mbps",
            step=True,
            hlines=[(f"threshold {threshold:g} Mbps", threshold)],
        ),
    )

    tier_series = []
    for policy, (timeline, _) in results.items():
        pts = [(d.t_s, _TIER_LEVEL[d.tier]) for d in timeline.decisions if d.tier is not None]
        if pts:
            pts.append((duration_s, pts[-1][1]))
            tier_series.append((policy.value, pts))
    _write(
        out / "tiers.svg",
        svg.line_chart(
            tier_series,
            "Operational tier (3 = HighAccuracy, 2 = Balanced, 1 = HighThroughput)",
            "time (s)",
            "tier",
            step=True,
            yrange=(0.5, 3.5),
        ),
    )

    groups = [
        (
            policy.value,
            [s.dataset_iou(Dataset.ORIGINAL), s.dataset_iou(Dataset.FINETUNED), s.avg_iou_percent],
        )
        for policy, (_, s) in results.items()
    ]
    _write(out / "accuracy.svg", svg.bar_chart(groups, ["Original", "Finetuned", "Blended"], "Average IoU", "IoU (%)"))

    _write(
        out / "throughput.svg",
        svg.line_chart(
            [(p.value, harness.pps_series(tl)) for p, (tl, _) in results.items()],
            "Insight throughput (60 s windows)",
            "time (s)",
            "PPS",
        ),
    )


def cmd_run(args) -> int:
    scenario, trace = _load(args)
    out = _out_dir(args.out)
    timeline, summary = harness.run_scenario(scenario, trace)
    _write(out / "timeline.csv", harness.timeline_csv(timeline))
    _write(out / "summary.csv", harness.summary_csv([summary]))
    if args.plot:
        _plots(out, trace, scenario.resolve_lut(), {summary.policy: (timeline, summary)}, scenario.duration_s)
    _print_summaries([summary])
    return 0


def cmd_compare(args) -> int:
    scenario, trace = _load(args)
    out = _out_dir(args.out)
    results = harness.run_comparison(scenario, workers=args.workers)
    for policy, (timeline, _) in results.items():
        _write(out / f"timeline_{policy.value}.csv", harness.timeline_csv(timeline))
    summaries = [s for _, s in results.values()]
    _write(out / "summary.csv", harness.summary_csv(summaries))
    if args.plot:
        _plots(out, trace, scenario.resolve_lut(), results, scenario.duration_s)
    _print_summaries(summaries)
    return 0


def parse_range(text: str):
    parts = text.split("..")
    try:
        if len(parts) == 1:
            lo = hi = float(parts[0])
        elif len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise UsageError(f"bandwidth range must look like 8..20 or 11.68, got {text!r}") from None
    if not (0 < lo <= hi):
        raise UsageError(f"bandwidth range must satisfy 0 < min <= max, got {text!r}")
    return lo, hi


def sweep_points(lo: float, hi: float, step: float):
    if not step > 0:
        raise UsageError(f"invalid step {step}: must be > 0")
    n = int((hi - lo) / step + 1e-9)
    return [round(lo + i * step, 9) for i in range(n + 1)]


def cmd_sweep(args) -> int:
    lo, hi = parse_range(args.range)
    points = sweep_points(lo, hi, args.step)
    if not args.duration > 0:
        raise UsageError(f"duration must be > 0, got {args.duration}")
    out = _out_dir(args.out)
    base = None
    if args.scenario:
        base = harness.load_scenario(args.scenario)
    frontier = harness.sweep(points, goal=MissionGoal(args.goal), duration_s=args.duration, base=base, workers=args.workers)
    _write(out / "frontier.csv", harness.frontier_csv(frontier))
    if args.plot:
        order = [p for p in COMPARISON_POLICIES if p is not Policy.AVERY] + [Policy.AVERY]
        series = [
            (p.value, [(s.avg_pps, s.avg_iou_percent) for _, pol, s in frontier if pol is p]) for p in order
        ]
        _write(
            out / "frontier.svg",
            svg.scatter_chart(series, "Average accuracy vs average throughput", "avg PPS", "avg IoU (%)"),
        )
    sys.stdout.write(harness.frontier_csv(frontier))
    return 0


def cmd_gen_trace(args) -> int:
    scenario, trace = _load(args)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        _out_dir(out.parent)
    try:
        write_trace_csv(trace, out)
    except OSError as exc:
        raise IOFailure(f"cannot write {out}: {exc}") from exc
    print(f"wrote {len(trace)} samples ({trace.duration_s:g} s, mean {trace.mean():.6f} Mbps) to {out}")
    return 0


def cmd_validate_lut(args) -> int:
    path = harness.resolve_path(args.lut, Path("."))
    if not path.is_file():
        raise IOFailure(f"LUT file not found: {path}")
    lut = load_lut(path)
    print(f"{'tier':<16}{'r':>6}{'IoU orig':>10}{'IoU ft':>9}{'size MB':>9}")
    for spec in lut.tiers:
        print(
            f"{spec.name.value:<16}{spec.compression_ratio:>6.2f}{spec.accuracy_original:>10.2f}"
            f"{spec.accuracy_finetuned:>9.2f}{spec.data_size_mb:>9.2f}"
        )
    print(f"bandwidth_threshold_mbps {lut.bandwidth_threshold_mbps:g}")
    return 0


def _number_text(value: float) -> str:
    text = f"{value:.6f}".rstrip("0").rstrip(".")
    return text or "0"


def cmd_derive_threshold(args) -> int:
    print(_number_text(derive_threshold(args.size_mb, args.pps)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="avery-sim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    policies = [p.value for p in Policy]
    goals = [g.value for g in MissionGoal]

    p = sub.add_parser("run", help="run one policy over a scenario")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--policy", choices=policies)
    p.add_argument("--goal", choices=goals)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run Avery and the three static baselines")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--goal", choices=goals)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=None, help=f"process fan-out (default: ${harness.THREADS_ENV})")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="constant-bandwidth accuracy/throughput frontier")
    p.add_argument("range", help="bandwidth range in Mbps, e.g. 8..20")
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--goal", choices=goals, default=MissionGoal.PRIORITIZE_ACCURACY.value)
    p.add_argument("--duration", type=float, default=1200.0)
    p.add_argument("--scenario", help="take LUT, stage profile and timing from this scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--plot", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-trace", help="write a scenario's bandwidth trace as CSV")
    p.add_argument("scenario")
    p.add_argument("--out", default="trace.csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("validate-lut", help="check a LUT file and print its tiers")
    p.add_argument("lut")
    p.set_defaults(func=cmd_validate_lut)

    p = sub.add_parser("derive-threshold", help="bandwidth needed for the HighAccuracy tier at a minimum rate")
    p.add_argument("--size-mb", type=float, required=True)
    p.add_argument("--pps", type=float, required=True)
    p.set_defaults(func=cmd_derive_threshold)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except InputError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except AverySimError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"ERROR E_RUNTIME: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
