"""Command-line pipeline: build, percolate, services, report (and run = all).

Artifacts for a city land in ``<out>/<city>/``. Exit codes: 0 success,
1 runtime failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import geo_io
from .geo_io import CATEGORIES, InputError, ValidationError
from .percolation import (
    PercolationEnsemble,
    PercolationRun,
    pearson,
    run_attack,
    run_error_ensemble,
    surviving_gcc,
)
from .road_graph import (
    RoadNetwork,
    build_network,
    compute_metrics,
    read_network_csv,
    write_network_csv,
)
from .services import (
    AvailabilityReport,
    assign_venues,
    availability_at_threshold,
    average_reports,
)

log = logging.getLogger("roadperc")

CONVENTIONS = {
    "graph": "undirected multigraph; parallel edges kept, self-loops dropped",
    "edge_length": "haversine polyline length in km",
    "betweenness": "unweighted hop-count shortest paths, ordered pairs",
    "error_p_c": "mean of per-run SLCC-peak thresholds",
    "availability_error": "per-run availability at own p_c, averaged",
}


@dataclass
class RunConfig:
    city_name: str
    output_dir: Path
    paths_file: Path | None = None
    venues_file: Path | None = None
    mode: str = "both"
    runs: int = 50
    checkpoint_fraction: float = 0.01
    seed: int = 42
    radius_km: float = 2.0
    recompute_every: int = 1

    def validate(self):
        if not self.city_name or any(sep in self.city_name for sep in ("/", "\\")) \
                or self.city_name in (".", ".."):
            raise ValidationError(f"invalid city name {self.city_name!r}")
        if self.mode not in ("error", "attack", "both"):
            raise ValidationError(f"mode must be error, attack or both, got {self.mode!r}")
        if self.runs < 1:
            raise ValidationError("--runs must be a positive integer")
        if not 0 < self.checkpoint_fraction <= 0.5:
            raise ValidationError("--checkpoint-fraction must lie in (0, 0.5]")
        if not self.radius_km > 0:
            raise ValidationError("--radius-km must be positive")
        if self.recompute_every < 1:
            raise ValidationError("--recompute-every must be a positive integer")
        for f in (self.paths_file, self.venues_file):
            if f is not None and not Path(f).is_file():
                raise FileNotFoundError(f"input file not found: {f}")

    @property
    def city_dir(self) -> Path:
        return Path(self.output_dir) / self.city_name

    @property
    def schemes(self) -> list[str]:
        return ["error", "attack"] if self.mode == "both" else [self.mode]


def _write_all(files: dict[Path, str]):
    """Write every artifact to a temp file first, then rename them into place."""
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def _load_summary(cfg: RunConfig) -> dict:
    path = cfg.city_dir / "summary.json"
    if path.is_file():
        return geo_io.parse_summary_json(path.read_text(encoding="utf-8"))
    return {}


def _merge_summary(old: dict, **updates) -> str:
    merged = {**old, **{k: v for k, v in updates.items() if v is not None}}
    if "availability" in updates and "availability" in old:
        merged["availability"] = {**old["availability"], **updates["availability"]}
    order = ["city_name", "metrics", "conventions", "error", "attack", "availability", "services"]
    out = {k: merged[k] for k in order if k in merged}
    out.update({k: v for k, v in merged.items() if k not in out})
    return geo_io.write_summary_json(out)


def _network(cfg: RunConfig) -> tuple[RoadNetwork, dict[Path, str]]:
    """Build from --paths when given, else reload a previous build dump."""
    if cfg.paths_file is not None:
        return _build(cfg)
    nodes, edges = cfg.city_dir / "network_nodes.csv", cfg.city_dir / "network_edges.csv"
    if not (nodes.is_file() and edges.is_file()):
        raise FileNotFoundError(f"no --paths given and no built network in {cfg.city_dir}")
    return read_network_csv(nodes.read_text(encoding="utf-8"),
                            edges.read_text(encoding="utf-8")), {}


def _build(cfg: RunConfig) -> tuple[RoadNetwork, dict[Path, str]]:
    network = build_network(geo_io.read_paths(cfg.paths_file))
    metrics = compute_metrics(network).to_dict()
    log.info("%s: built network v=%d e=%d", cfg.city_name, metrics["v"], metrics["e"])
    nodes_csv, edges_csv = write_network_csv(network)
    d = cfg.city_dir
    files = {
        d / "network_nodes.csv": nodes_csv,
        d / "network_edges.csv": edges_csv,
        d / "metrics.json": geo_io.write_summary_json(metrics),
    }
    return network, files


def _percolate(cfg: RunConfig, network: RoadNetwork):
    ensemble = attack = None
    if "error" in cfg.schemes:
        ensemble = run_error_ensemble(network, cfg.seed, cfg.runs, cfg.checkpoint_fraction)
        log.info("%s: error p_c mean=%.4f std=%.4f", cfg.city_name,
                 ensemble.p_c_mean, ensemble.p_c_std)
    if "attack" in cfg.schemes:
        attack = run_attack(network, cfg.recompute_every)
        log.info("%s: attack p_c=%.4f", cfg.city_name, attack.p_c)
    return ensemble, attack


def _percolation_files(cfg: RunConfig, ensemble: PercolationEnsemble | None,
                       attack: PercolationRun | None):
    d = cfg.city_dir
    files: dict[Path, str] = {}
    error_block = attack_block = None
    if ensemble is not None:
        files[d / "error_curve.csv"] = geo_io.write_curve_csv(ensemble.mean_curve)
        files[d / "runs_pc.csv"] = geo_io.write_runs_csv(ensemble.p_c_values)
        error_block = {
            "p_c_mean": ensemble.p_c_mean,
            "p_c_std": ensemble.p_c_std,
            "runs": len(ensemble.runs),
            "checkpoint_fraction": cfg.checkpoint_fraction,
            "seed": cfg.seed,
        }
    if attack is not None:
        files[d / "attack_curve.csv"] = geo_io.write_curve_csv(attack.curve)
        attack_block = {"p_c": attack.p_c, "recompute_every": cfg.recompute_every}
    return files, error_block, attack_block


def _availability_csv(report: AvailabilityReport) -> str:
    rows = []
    for c in CATEGORIES:
        assigned = report.assigned_counts[c]
        retained = report.retained_counts[c]
        retained_s = str(int(retained)) if float(retained).is_integer() else f"{retained:.6f}"
        frac = f"{report.per_category[c]:.6f}" if c in report.per_category else "NA"
        rows.append([c, assigned, retained_s, frac])
    return geo_io.write_table_csv(["category", "assigned", "retained", "fraction"], rows)


def _services(cfg: RunConfig, network: RoadNetwork, ensemble, attack):
    venues = geo_io.read_venues(cfg.venues_file)
    assignments = assign_venues(network, venues, cfg.radius_km)
    omitted = len(venues) - len(assignments)
    print(f"omitted {omitted} of {len(venues)} venues farther than {cfg.radius_km} km "
          f"from every node")
    if not assignments:
        raise ValidationError("no venue lies within the assignment radius")
    d = cfg.city_dir
    files: dict[Path, str] = {}
    baseline = availability_at_threshold(assignments, [True] * network.n_nodes)
    availability = {"baseline": baseline.to_dict()}
    if ensemble is not None:
        report = average_reports([
            availability_at_threshold(assignments, surviving_gcc(network, run))
            for run in ensemble.runs
        ])
        files[d / "availability_error.csv"] = _availability_csv(report)
        availability["error"] = report.to_dict()
    if attack is not None:
        report = availability_at_threshold(assignments, surviving_gcc(network, attack))
        files[d / "availability_attack.csv"] = _availability_csv(report)
        availability["attack"] = report.to_dict()
    services_block = {
        "venues": len(venues),
        "assigned": len(assignments),
        "omitted": omitted,
        "radius_km": cfg.radius_km,
        "missing_categories": baseline.missing,
    }
    for c in baseline.missing:
        log.warning("%s: no venues assigned for category %r", cfg.city_name, c)
    return files, availability, services_block


def cmd_build(cfg: RunConfig) -> int:
    if cfg.paths_file is None:
        raise ValidationError("build needs --paths")
    network, files = _build(cfg)
    metrics = compute_metrics(network).to_dict()
    files[cfg.city_dir / "summary.json"] = _merge_summary(
        _load_summary(cfg), city_name=cfg.city_name, metrics=metrics, conventions=CONVENTIONS)
    _write_all(files)
    return 0


def cmd_percolate(cfg: RunConfig) -> int:
    network, files = _network(cfg)
    ensemble, attack = _percolate(cfg, network)
    more, error_block, attack_block = _percolation_files(cfg, ensemble, attack)
    files.update(more)
    files[cfg.city_dir / "summary.json"] = _merge_summary(
        _load_summary(cfg), city_name=cfg.city_name,
        metrics=compute_metrics(network).to_dict(), conventions=CONVENTIONS,
        error=error_block, attack=attack_block)
    _write_all(files)
    return 0


def cmd_services(cfg: RunConfig) -> int:
    if cfg.venues_file is None:
        raise ValidationError("services needs --venues")
    network, files = _network(cfg)
    ensemble, attack = _percolate(cfg, network)
    more, availability, services_block = _services(cfg, network, ensemble, attack)
    files.update(more)
    files[cfg.city_dir / "summary.json"] = _merge_summary(
        _load_summary(cfg), city_name=cfg.city_name, availability=availability,
        services=services_block)
    _write_all(files)
    return 0


def cmd_run(cfg: RunConfig) -> int:
    """Build, percolate and (with --venues) services in one pass."""
    if cfg.paths_file is None:
        raise ValidationError("run needs --paths")
    network, files = _build(cfg)
    ensemble, attack = _percolate(cfg, network)
    more, error_block, attack_block = _percolation_files(cfg, ensemble, attack)
    files.update(more)
    availability = services_block = None
    if cfg.venues_file is not None:
        more, availability, services_block = _services(cfg, network, ensemble, attack)
        files.update(more)
    files[cfg.city_dir / "summary.json"] = _merge_summary(
        {}, city_name=cfg.city_name, metrics=compute_metrics(network).to_dict(),
        conventions=CONVENTIONS, error=error_block, attack=attack_block,
        availability=availability, services=services_block)
    _write_all(files)
    return 0


def build_report(summaries: list[dict]) -> tuple[dict, str]:
    """Rank cities by threshold per scheme and correlate Error vs Attack."""
    if not summaries:
        raise ValidationError("no city summaries to report on")
    ranking: dict[str, list[dict]] = {}
    rows = []
    for scheme, key in (("error", "p_c_mean"), ("attack", "p_c")):
        entries = sorted(
            ((s[scheme][key], s["city_name"]) for s in summaries if scheme in s),
        )
        ranking[scheme] = [{"rank": i + 1, "city": c, "p_c": p}
                           for i, (p, c) in enumerate(entries)]
        rows.extend([scheme, i + 1, c, f"{p:.6f}"] for i, (p, c) in enumerate(entries))
    report: dict = {"cities": sorted(s["city_name"] for s in summaries), "ranking": ranking}
    paired = sorted((s["city_name"], s["error"]["p_c_mean"], s["attack"]["p_c"])
                    for s in summaries if "error" in s and "attack" in s)
    if len(paired) >= 2:
        try:
            report["pearson_error_attack"] = pearson([p[1] for p in paired],
                                                     [p[2] for p in paired])
        except ValueError as exc:
            log.warning("correlation omitted: %s", exc)
    ranking_csv = geo_io.write_table_csv(["scheme", "rank", "city", "p_c"], rows)
    return report, ranking_csv


def cmd_report(out: Path, cities: list[str] | None) -> int:
    out = Path(out)
    if cities:
        paths = [out / c / "summary.json" for c in cities]
        for p in paths:
            if not p.is_file():
                raise FileNotFoundError(f"summary not found: {p}")
    else:
        paths = sorted(out.glob("*/summary.json"))
    summaries = [geo_io.parse_summary_json(p.read_text(encoding="utf-8")) for p in paths]
    report, ranking_csv = build_report(summaries)
    _write_all({out / "report.json": geo_io.write_summary_json(report),
                out / "ranking.csv": ranking_csv})
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roadperc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def verbose(p):
        p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    def city_args(p, paths_required=False):
        verbose(p)
        p.add_argument("--city", required=True)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--paths", type=Path, required=paths_required)
        p.add_argument("--venues", type=Path)
        p.add_argument("--mode", choices=["error", "attack", "both"], default="both")
        p.add_argument("--runs", type=int, default=50)
        p.add_argument("--checkpoint-fraction", type=float, default=0.01)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--radius-km", type=float, default=2.0)
        p.add_argument("--recompute-every", type=int, default=1)

    city_args(sub.add_parser("build", help="build network, dump it, compute metrics"), True)
    city_args(sub.add_parser("percolate", help="Error/Attack percolation curves and thresholds"))
    city_args(sub.add_parser("services", help="service availability at the threshold"))
    city_args(sub.add_parser("run", help="build + percolate (+ services with --venues)"), True)
    rep = sub.add_parser("report", help="cross-city ranking and correlation")
    verbose(rep)
    rep.add_argument("--out", required=True, type=Path)
    rep.add_argument("--city", action="append", dest="cities")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args.out, args.cities)
        cfg = RunConfig(
            city_name=args.city, output_dir=args.out, paths_file=args.paths,
            venues_file=args.venues, mode=args.mode, runs=args.runs,
            checkpoint_fraction=args.checkpoint_fraction, seed=args.seed,
            radius_km=args.radius_km, recompute_every=args.recompute_every,
        )
        cfg.validate()
        commands = {"build": cmd_build, "percolate": cmd_percolate,
                    "services": cmd_services, "run": cmd_run}
        return commands[args.command](cfg)
    except (InputError, FileNotFoundError, UnicodeDecodeError) as exc:
        print(f"roadperc: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("runtime failure", exc_info=True)
        print(f"roadperc: runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
