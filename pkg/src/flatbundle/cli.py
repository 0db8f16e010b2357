"""Command line driver: catalog listing, experiment runs, SVG rendering."""

from __future__ import annotations

import argparse
import difflib
import json
import math
import random
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import catalog, render, slimness
from .cylinders import trace_direction
from .errors import (
    FlatBundleError,
    MissingHoroRegion,
    MissingInput,
    NoClosureFound,
    NotFound,
    UnknownCatalogId,
)
from .hyperbolic import hyp_distance
from .paths import (
    CombinatorialPath,
    FiberPoint,
    build_direction_graphs,
    build_fan,
    build_preferred_path,
    check_structure_lemma,
    collapsed_length,
    combinatorial_path,
)
from .surface import enumerate_saddle_connections, load_surface, tighten_chain
from .veech import build_group_data, build_horoball_family, region_for

_COUNTS = {
    "paths": 120,
    "fans": 60,
    "slim_triangles": 40,
    "ratio_pairs": 60,
}


# -- configuration -----------------------------------------------------------


@dataclass
class ExperimentConfig:
    surface: str = "octagon"
    group: str = "octagon_lattice"
    depth: int = 6
    max_length: float = 3.0
    max_trace: float = 40.0
    seed: int = 1
    step: float = 0.05
    out: str = "out"

    def validate(self) -> None:
        if self.depth <= 0:
            raise ValueError("depth must be positive")
        if self.max_length <= 0:
            raise ValueError("max-length must be positive")
        if self.max_trace <= 0:
            raise ValueError("max-trace must be positive")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def _suggest(name: str, options) -> str:
    close = difflib.get_close_matches(name, options, n=1)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return f"unknown catalog id {name!r}{hint}"


def _resolve_surface(name: str):
    if name in catalog.surface_names():
        return catalog.load_catalog_surface(name)
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        d = json.loads(p.read_text())
        polygons = [[complex(x, y) for x, y in poly] for poly in d["polygons"]]
        gluings = {}
        for (a, e), (b, f) in (tuple(map(tuple, g)) for g in d["gluings"]):
            gluings[(a, e)] = (b, f)
            gluings[(b, f)] = (a, e)
        return load_surface(polygons, gluings, name=p.stem)
    raise UnknownCatalogId(_suggest(name, catalog.surface_names()))


def _resolve_group(name: str) -> dict:
    if name in catalog.group_names():
        return catalog.load_group_preset(name)
    p = Path(name)
    if p.suffix == ".json" and p.exists():
        d = json.loads(p.read_text())
        d["generators"] = [tuple(tuple(r) for r in m) for m in d["generators"]]
        d.setdefault("name", p.stem)
        return d
    raise UnknownCatalogId(_suggest(name, catalog.group_names()))


def _build_pipeline(cfg: ExperimentConfig):
    surface = _resolve_surface(cfg.surface)
    preset = _resolve_group(cfg.group)
    if preset.get("surface") and preset["surface"] != surface.name:
        raise ValueError(
            f"group {preset.get('name', cfg.group)!r} is defined on surface "
            f"{preset['surface']!r}, not {surface.name!r}"
        )
    gdata = build_group_data(
        surface,
        preset["generators"],
        depth=cfg.depth,
        verify_basis=preset.get("verify_basis"),
        verify_words=preset.get("verify_words"),
    )
    saddles = enumerate_saddle_connections(surface, cfg.max_length)
    family = build_horoball_family(gdata, saddles)
    return surface, gdata, saddles, family


# -- invariant suites --------------------------------------------------------


def _suite_gauss_bonnet(surface) -> dict:
    total = sum(cc.angle - 2 * math.pi for cc in surface.cone_classes)
    expected = 2 * math.pi * (2 * surface.genus - 2)
    return {
        "passed": abs(total - expected) < 1e-9,
        "angleExcess": total,
        "expected": expected,
    }


def _suite_classification(family) -> dict:
    balls = sum(1 for r in family.values() if r.kind == "ball")
    points = sum(1 for r in family.values() if r.kind == "point")
    witnessed = all(
        (r.kind == "ball") == (r.witness is not None) for r in family.values()
    )
    return {
        "passed": witnessed and balls + points == len(family),
        "balls": balls,
        "points": points,
    }


def _suite_cylinders(surface, family, max_trace) -> dict:
    checked, failures, decomps = 0, 0, []
    for key in sorted(family):
        reg = family[key]
        if reg.kind != "ball":
            continue
        checked += 1
        result = trace_direction(surface, reg.theta, max_trace)
        if isinstance(result, NoClosureFound):
            failures += 1
            continue
        if abs(result.area - surface.area) > 1e-6:
            failures += 1
            continue
        decomps.append(result)
    return {
        "passed": failures == 0,
        "directionsChecked": checked,
        "areaViolationsOrUnclosed": failures,
    }, decomps


def _random_path(surface, saddles, family, rng):
    a, b = rng.choice(saddles), rng.choice(saddles)
    x = FiberPoint(0j, a.start)
    y = FiberPoint(
        complex(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)), b.end
    )
    return build_preferred_path(surface, x, y, family, [a, b])


def _suite_lipschitz(surface, saddles, family, graphs, rng, count) -> dict:
    done, violations, margin = 0, 0, math.inf
    attempts = 0
    if not saddles:
        return {"passed": False, "paths": 0, "violations": 0, "minMargin": None}
    while done < count and attempts < count * 40:
        attempts += 1
        try:
            path = _random_path(surface, saddles, family, rng)
            collapsed = collapsed_length(surface, path, family, graphs)
        except FlatBundleError:
            continue
        done += 1
        gap = path.d_length - collapsed
        margin = min(margin, gap)
        if gap < -1e-12:
            violations += 1
    return {
        "passed": done > 0 and violations == 0,
        "paths": done,
        "violations": violations,
        "minMargin": margin if done else None,
    }


def _suite_structure(surface, saddles, rng, count) -> dict:
    built, failures = 0, 0
    attempts = 0
    last_fan = None
    if not saddles:
        return {"passed": False, "fans": 0, "failures": 0}, None
    while built < count and attempts < count * 60:
        attempts += 1
        a, b = rng.choice(saddles), rng.choice(saddles)
        if rng.random() < 0.5:
            a = a.reverse(surface)
        if rng.random() < 0.5:
            b = b.reverse(surface)
        try:
            bottom = tighten_chain(surface, [a.reverse(surface), b])
            if not bottom.pieces:
                continue
            fan = build_fan(surface, a, bottom)
        except FlatBundleError:
            continue
        built += 1
        last_fan = fan
        if not check_structure_lemma(fan).ok:
            failures += 1
    return {
        "passed": built > 0 and failures == 0,
        "fans": built,
        "failures": failures,
    }, last_fan


def _suite_slimness(surface, family, saddles, seed, step, count):
    report = slimness.slimness_sweep(
        surface, family, saddles, count=count, seed=seed, step=step
    )
    full, second = slimness.stability_split(report)
    return {
        "passed": report.samples > 0
        and math.isfinite(report.delta_max)
        and second <= full + 1e-12,
        "triangles": report.samples,
        "deltaMax": report.delta_max,
        "deltaSecondHalf": second,
        "quantiles": report.delta_quantiles,
    }, report


def _surrogate_distance(family, key1, key2) -> float:
    a1, a2 = family[key1].anchor, family[key2].anchor
    d = hyp_distance(a1, a2)
    for ball in slimness._family_balls(family):
        d = min(d, ball.distance_to_point(a1) + ball.distance_to_point(a2))
    return d


def _suite_ratio(family, rng, count) -> dict:
    keys = sorted(family)
    ratios = []
    if len(keys) < 2:
        return {"passed": False, "pairs": 0, "maxRatio": None}
    for _ in range(count):
        k1, k2 = rng.choice(keys), rng.choice(keys)
        if k1 == k2:
            continue
        result = combinatorial_path(family, k1, k2)
        if not isinstance(result, CombinatorialPath):
            continue
        dist = max(_surrogate_distance(family, k1, k2), 0.1)
        ratios.append(result.length / dist)
    return {
        "passed": bool(ratios) and all(math.isfinite(r) for r in ratios),
        "pairs": len(ratios),
        "maxRatio": max(ratios) if ratios else None,
    }


# -- commands ----------------------------------------------------------------


def cmd_catalog(args) -> int:
    listing = catalog.describe()
    if args.json:
        print(json.dumps(listing, indent=2, sort_keys=True))
        return 0
    print("surfaces:")
    for name, info in listing["surfaces"].items():
        print(f"  {name}: {info['description']} (genus {info['genus']})")
    print("groups:")
    for name, info in listing["groups"].items():
        print(f"  {name} [{info['kind']}, on {info['surface']}]: {info['description']}")
    return 0


def run_experiment(cfg: ExperimentConfig) -> dict:
    """The full pipeline; returns the report dictionary."""
    cfg.validate()
    surface, gdata, saddles, family = _build_pipeline(cfg)
    rng = random.Random(cfg.seed)
    graphs = build_direction_graphs(surface, family, max_trace=cfg.max_trace)

    suites: dict = {}
    suites["gaussBonnet"] = _suite_gauss_bonnet(surface)
    suites["classification"] = _suite_classification(family)
    suites["cylinderArea"], decomps = _suite_cylinders(
        surface, family, cfg.max_trace
    )
    suites["lipschitzCollapse"] = _suite_lipschitz(
        surface, saddles, family, graphs, rng, _COUNTS["paths"]
    )
    suites["structureLemma"], last_fan = _suite_structure(
        surface, saddles, rng, _COUNTS["fans"]
    )
    suites["slimness"], slim_report = _suite_slimness(
        surface, family, saddles, rng.randrange(2**31), cfg.step,
        _COUNTS["slim_triangles"],
    )
    suites["combinatorialRatio"] = _suite_ratio(
        family, rng, _COUNTS["ratio_pairs"]
    )

    report = {
        "config": asdict(cfg),
        "surface": {
            "name": surface.name,
            "genus": surface.genus,
            "area": surface.area,
            "saddleConnections": len(saddles),
        },
        "suites": suites,
        "passed": all(s["passed"] for s in suites.values()),
    }

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n"
    )
    rows = ["triangle,delta"]
    rows += [f"{desc},{val!r}" for desc, val in slim_report.per_triangle]
    (out / "deltas.csv").write_text("\n".join(rows) + "\n")

    (out / "horoballs.svg").write_text(render.render_horoballs(gdata, family))
    if decomps:
        (out / "cylinders.svg").write_text(
            render.render_cylinders(surface, decomps[0])
        )
    if last_fan is not None:
        (out / "ideal-fan.svg").write_text(render.render_ideal_fan(last_fan))
    path_rng = random.Random(cfg.seed + 1)
    for _ in range(200 if saddles else 0):
        try:
            path = _random_path(surface, saddles, family, path_rng)
        except FlatBundleError:
            continue
        (out / "path.svg").write_text(render.render_path(path))
        break
    return report


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    try:
        report = run_experiment(cfg)
    except (ValueError, UnknownCatalogId) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        for name, suite in report["suites"].items():
            print(f"{name}: {'pass' if suite['passed'] else 'FAIL'}")
        print(f"report written to {cfg.out}/report.json")
    if not report["passed"]:
        failing = next(
            n for n, s in report["suites"].items() if not s["passed"]
        )
        print(f"first failing suite: {failing}", file=sys.stderr)
        return 1
    return 0


def cmd_render(args) -> int:
    cfg = _config_from_args(args)
    try:
        cfg.validate()
        surface, gdata, saddles, family = _build_pipeline(cfg)
    except (ValueError, UnknownCatalogId) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rng = random.Random(cfg.seed)
    try:
        if args.kind == "horoballs":
            svg = render.render_horoballs(gdata, family)
        elif args.kind == "cylinders":
            ball_keys = [
                k for k in sorted(family) if family[k].kind == "ball"
            ]
            if not ball_keys:
                raise MissingInput("no parabolic direction to decompose")
            result = trace_direction(
                surface, family[ball_keys[0]].theta, cfg.max_trace
            )
            if isinstance(result, NoClosureFound):
                raise MissingInput("direction did not close within max-trace")
            svg = render.render_cylinders(surface, result)
        elif args.kind == "ideal-fan":
            svg = None
            for _ in range(2000):
                a, b = rng.choice(saddles), rng.choice(saddles)
                if rng.random() < 0.5:
                    a = a.reverse(surface)
                try:
                    bottom = tighten_chain(surface, [a.reverse(surface), b])
                    if not bottom.pieces:
                        continue
                    fan = build_fan(surface, a, bottom)
                except FlatBundleError:
                    continue
                svg = render.render_ideal_fan(fan)
                break
            if svg is None:
                raise MissingInput("no fan found at this seed and cutoff")
        elif args.kind == "path":
            svg = None
            for _ in range(2000):
                try:
                    path = _random_path(surface, saddles, family, rng)
                except FlatBundleError:
                    continue
                svg = render.render_path(path)
                break
            if svg is None:
                raise MissingInput("no preferred path found at this seed")
        else:  # unreachable behind argparse choices
            raise MissingInput(f"unknown render kind {args.kind!r}")
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out if args.out != "out" else f"{args.kind}.svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out}")
    return 0


# -- argument parsing --------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--surface", help="catalog surface id or JSON file")
    p.add_argument("--group", help="catalog group id or JSON file")
    p.add_argument("--depth", type=int, help="group word depth")
    p.add_argument("--max-length", type=float, help="saddle enumeration cutoff")
    p.add_argument("--max-trace", type=float, help="separatrix trace budget")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--step", type=float, help="slimness discretization step")
    p.add_argument("--out", default="out", help="output directory or file")


def _config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
        for key, value in data.items():
            field = key.replace("-", "_")
            if not hasattr(cfg, field):
                raise ValueError(f"unknown config field {key!r}")
            setattr(cfg, field, value)
    for field in (
        "surface", "group", "depth", "max_length", "max_trace", "seed", "step",
    ):
        value = getattr(args, field, None)
        if value is not None:
            setattr(cfg, field, value)
    if getattr(args, "out", None):
        cfg.out = args.out
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatbundle",
        description="Flat-surface bundle experiments over Veech-group disks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cat = sub.add_parser("catalog", help="list built-in surfaces and groups")
    p_cat.add_argument("--json", action="store_true")
    p_cat.set_defaults(func=cmd_catalog)

    p_run = sub.add_parser("run", help="run the full experiment pipeline")
    _add_config_flags(p_run)
    p_run.add_argument("--json", action="store_true", help="print the report")
    p_run.set_defaults(func=cmd_run)

    p_ren = sub.add_parser("render", help="render one SVG diagram")
    p_ren.add_argument(
        "--kind",
        required=True,
        choices=("ideal-fan", "horoballs", "cylinders", "path"),
    )
    _add_config_flags(p_ren)
    p_ren.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UnknownCatalogId, NotFound) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
