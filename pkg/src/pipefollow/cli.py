"""Command-line front end.

Exit codes: 0 mission complete and inside tolerance, 1 mission failure or
tolerance exceeded, 2 usage or file/parse errors.  Data goes to stdout when
no output path is given; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import fis, netpbm, sim
from .features import extract_features
from .imgproc import NoObjectError, ThresholdBand, rgb_to_gray


def _diag(message: str) -> None:
    print(f"pipefollow: {message}", file=sys.stderr)


def _write_output(text: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def _load_rulebase(args, scenario=None):
    if getattr(args, "rules", None):
        path = Path(args.rules)
        try:
            return fis.parse_rulebase(path.read_text())
        except fis.RuleParseError as exc:
            raise sim.ScenarioError(f"{path.name}: {exc}") from exc
    if scenario is not None:
        return sim.load_rulebase(scenario)
    return fis.default_rulebase()


def _load_scenario(args) -> sim.Scenario:
    scenario = sim.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, world=replace(scenario.world, seed=args.seed))
    return scenario


def plot_svg(record: sim.PathRecord, envelope=(150.0, 200.0),
             step_length: float = 22.5, start_y: float = 0.0) -> str:
    """Deterministic top-down SVG: envelope, tolerance band, centerline, path.

    Path point k is drawn at the nominal along-track station
    start_y + k * step_length.
    """
    scale, margin = 3.0, 20.0
    width = envelope[0] * scale + 2 * margin
    height = envelope[1] * scale + 2 * margin

    def px(x):
        return margin + x * scale

    def py(y):
        return height - margin - y * scale

    ys = [start_y + p.step * step_length for p in record.points]
    tol = record.tolerance
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="{px(0):.2f}" y="{py(envelope[1]):.2f}" '
        f'width="{envelope[0] * scale:.2f}" height="{envelope[1] * scale:.2f}" '
        f'fill="white" stroke="black"/>',
    ]
    band = [(p.actual_x - tol, y) for p, y in zip(record.points, ys)]
    band += [(p.actual_x + tol, y) for p, y in reversed(list(zip(record.points, ys)))]
    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in band)
    parts.append(f'<polygon points="{pts}" fill="#cfe3f5" stroke="none"/>')
    pipe = " ".join(f"{px(p.actual_x):.2f},{py(y):.2f}" for p, y in zip(record.points, ys))
    parts.append(f'<polyline points="{pipe}" fill="none" stroke="#004080" stroke-width="2"/>')
    for p, y in zip(record.points, ys):
        parts.append(f'<circle cx="{px(p.sim_x):.2f}" cy="{py(y):.2f}" r="4" fill="#c22"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_run(args) -> int:
    scenario = _load_scenario(args)
    rb = _load_rulebase(args, scenario)
    try:
        record = sim.run_mission(scenario, rb, mode=args.mode, tolerance=args.tolerance)
    except sim.MissionFailure as exc:
        _diag(str(exc))
        return 1
    _write_output(record.to_csv(), args.out)
    if args.plot:
        Path(args.plot).write_text(plot_svg(record, scenario.world.envelope,
                                            scenario.step_length, scenario.start.y))
    if not record.within_tolerance():
        _diag(f"drift exceeds +/-{args.tolerance:.1f} cm tolerance "
              f"(max {record.max_abs_drift():.1f} cm)")
        return 1
    return 0


def cmd_features(args) -> int:
    with open(args.image, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P6":
        gray = rgb_to_gray(netpbm.read_ppm(args.image))
    else:
        gray = netpbm.read_pgm(args.image)
    if args.scenario:
        scenario = sim.load_scenario(args.scenario)
        thresholds, min_area = scenario.thresholds, scenario.min_area
    else:
        thresholds, min_area = ThresholdBand(180, 255), 25
    try:
        vectors = extract_features(gray, thresholds, min_area)
    except NoObjectError as exc:
        _diag(f"no-object: {exc}")
        return 1
    lines = ["band,x1,x2,x3,x4,x5,x6"]
    for v in vectors:
        lines.append(f"{v.band_index}," + ",".join(f"{c:.6f}" for c in v.as_tuple()))
    _write_output("\n".join(lines) + "\n", args.out)
    return 0


def cmd_infer(args) -> int:
    rb = _load_rulebase(args)
    values = dict(zip(fis.INPUT_VARIABLES, args.values))
    try:
        result = fis.infer(rb, values)
    except ValueError as exc:
        _diag(str(exc))
        return 2
    lines = []
    for i, (alpha, rule) in enumerate(zip(result.firing_strengths, rb.rules), start=1):
        center = rb.variables[rule.consequent[0]].terms[rule.consequent[1]].center
        lines.append(f"rule {i:2d}  alpha={alpha:.6f}  center={center:6.1f}  "
                     f"{fis.format_rule(rule)}")
    if result.no_fire:
        lines.append("no rule fired; steering defaults to 90")
    lines.append(f"y' = {result.output:.3f}")
    _write_output("\n".join(lines) + "\n", args.out)
    return 0


def cmd_tune(args) -> int:
    scenarios = [sim.load_scenario(p) for p in args.scenario]
    rb = _load_rulebase(args)
    result = sim.tune(scenarios, fis.term_parameters(rb), args.budget, rulebase=rb)
    _diag(f"objective: max|drift| {result.initial_objective[0]:.2f} -> "
          f"{result.best_objective[0]:.2f} cm in {result.evaluations} evaluations")
    tuned = fis.with_term_parameters(rb, result.params)
    _write_output(fis.format_rulebase(tuned), args.out)
    return 0


def cmd_render(args) -> int:
    scenario = _load_scenario(args)
    img = sim.render_view(scenario.world, scenario.start, scenario.camera, frame=0)
    netpbm.write_pgm(args.out, img)
    return 0


def cmd_plot(args) -> int:
    try:
        record = sim.PathRecord.from_csv(Path(args.record).read_text(),
                                         tolerance=args.tolerance)
    except ValueError as exc:
        _diag(str(exc))
        return 2
    envelope, step_length, start_y = (150.0, 200.0), 22.5, 0.0
    if args.scenario:
        scenario = sim.load_scenario(args.scenario)
        envelope = scenario.world.envelope
        step_length, start_y = scenario.step_length, scenario.start.y
    _write_output(plot_svg(record, envelope, step_length, start_y), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipefollow",
        description="Vision-guided pipeline following: fuzzy steering over a "
                    "simulated underwater run.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="fly a mission and emit the drift record CSV")
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--rules", help="rule base DSL file (overrides the scenario's)")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--seed", type=int, help="override the scenario's noise seed")
    p.add_argument("--plot", help="also write an SVG path plot here")
    p.add_argument("--mode", choices=("sequential", "overlapped"), default="sequential")
    p.add_argument("--tolerance", type=float, default=sim.DEFAULT_TOLERANCE_CM,
                   help="drift tolerance in cm (default 8.0)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("features", help="print band feature vectors for an image")
    p.add_argument("image", help="PGM (P5) or PPM (P6) input image")
    p.add_argument("--scenario", help="scenario file supplying threshold band and min area")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("infer", help="trace one fuzzy inference")
    p.add_argument("values", type=float, nargs=6, metavar="x",
                   help="feature values x1..x6")
    p.add_argument("--rules", help="rule base DSL file")
    p.add_argument("--out", help="output path (default stdout)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("tune", help="tune membership parameters on scenarios")
    p.add_argument("--scenario", action="append", required=True,
                   help="scenario file (repeatable)")
    p.add_argument("--rules", help="initial rule base DSL file")
    p.add_argument("--budget", type=int, default=200, help="objective evaluations")
    p.add_argument("--out", help="output path for the tuned rule base DSL")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("render", help="render the camera view from the start pose")
    p.add_argument("--scenario", required=True, help="scenario file")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--seed", type=int, help="override the scenario's noise seed")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("plot", help="plot a drift record CSV as SVG")
    p.add_argument("record", help="PathRecord CSV file")
    p.add_argument("--scenario", help="scenario file for envelope/step geometry")
    p.add_argument("--out", help="output SVG path (default stdout)")
    p.add_argument("--tolerance", type=float, default=sim.DEFAULT_TOLERANCE_CM)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except sim.ScenarioError as exc:
        _diag(str(exc))
        return 2
    except fis.RuleParseError as exc:
        _diag(str(exc))
        return 2
    except netpbm.NetpbmError as exc:
        _diag(str(exc))
        return 2
    except OSError as exc:
        _diag(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
