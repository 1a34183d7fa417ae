"""
Batch command surface: ``python run.py <command> --config <path> [--key value ...]``
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.cli.config_parser import emit_config, load_config, parse_config
from app.config import settings
from app.core.exceptions import ConfigError, RobustPottsError
from app.models.bonds import BoundaryCondition
from app.models.chain import BoundaryMode
from app.models.experiments import RobustnessCurve
from app.models.results import MarginalEstimate
from app.models.run_config import Command, RunConfig
from app.repositories.result_repository import SCAN_COLUMNS, SCHEMA_VERSION, ResultRepository
from app.services.contour_service import contour_service
from app.services.exact_service import exact_service
from app.services.robustness_service import build_geometry, exact_estimate, robustness_service, tv_from_free
from app.services.sampler_service import sampler_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_REFUSED = 2

Row = Dict[str, Any]


@dataclass
class Table:
    columns: Sequence[str]
    rows: List[Row] = field(default_factory=list)


@dataclass
class RunOutput:
    tables: Dict[str, Table] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)


def canonical_config(cfg: RunConfig) -> Dict[str, Any]:
    """Resolved configuration echoed into every artifact"""
    data = cfg.model_dump(mode="json")
    data["resolved_J"] = cfg.model.resolved_J
    return data


def _scan_row(cfg: RunConfig, mode: BoundaryMode, epsilon: float, L: int, r: Optional[int],
              estimate: MarginalEstimate, seed: Optional[int]) -> Row:
    tv, tv_se = tv_from_free(estimate)
    return {
        "schema_version": SCHEMA_VERSION,
        "d": cfg.model.d,
        "q": cfg.model.q,
        "J": cfg.model.resolved_J,
        "epsilon": epsilon,
        "L": L,
        "r": r,
        "mode": mode.value,
        "theta": estimate.theta,
        "theta_se": estimate.theta_se,
        "tv": tv,
        "tv_se": tv_se,
        "n_samples": estimate.n_samples,
        "seed": seed,
    }


def _geometry(cfg: RunConfig, L: int, epsilon: float):
    model = cfg.model
    return build_geometry(model.mode, model.d, L, model.resolved_J, epsilon, model.r, model.annulus_width)


def _cells(cfg: RunConfig) -> List[Tuple[int, float]]:
    return [(L, eps) for eps in cfg.model.epsilons for L in cfg.model.sizes]


def run_enumerate(cfg: RunConfig) -> RunOutput:
    model = cfg.model
    output = RunOutput(tables={"results": Table(SCAN_COLUMNS)})
    results = []
    for L, eps in _cells(cfg):
        lat, bonds = _geometry(cfg, L, eps)
        estimate = exact_estimate(lat, bonds, model.q, model.mode.wired,
                                  edge_cap=cfg.caps.enumeration_edge_cap, workers=settings.workers)
        radius = bonds.cutset.radius if bonds.cutset is not None else None
        output.tables["results"].rows.append(_scan_row(cfg, model.mode, eps, L, radius, estimate, None))

        entry = {
            "L": L,
            "epsilon": eps,
            "theta": estimate.theta,
            "origin_marginal": estimate.probabilities,
            "edge_marginals": estimate.edge_means,
            "log_partition_function": estimate.metadata["log_partition_function"],
        }
        if model.q ** lat.n_vertices <= cfg.caps.spin_cap:
            bc = BoundaryCondition.wired_to(0) if model.mode.wired else BoundaryCondition.free()
            entry["spin_route_marginal"] = exact_service.spin_enumerate(lat, bonds, model.q, bc, cfg.caps.spin_cap)
        results.append(entry)
    output.summary["results"] = results
    return output


def run_sample(cfg: RunConfig) -> RunOutput:
    model = cfg.model
    output = RunOutput(tables={"results": Table(SCAN_COLUMNS)})
    results = []
    for index, (L, eps) in enumerate(_cells(cfg)):
        lat, bonds = _geometry(cfg, L, eps)
        chain = cfg.chain.to_chain_config(model.mode, model.annulus_width, stream_offset=index)
        estimate = sampler_service.run_chain(lat, bonds, model.q, chain)
        radius = bonds.cutset.radius if bonds.cutset is not None else None
        output.tables["results"].rows.append(_scan_row(cfg, model.mode, eps, L, radius, estimate, chain.seed))
        results.append({
            "L": L,
            "epsilon": eps,
            "stream_id": chain.stream_id,
            "theta": estimate.theta,
            "theta_se": estimate.theta_se,
            "origin_marginal": estimate.probabilities,
            "origin_marginal_se": estimate.standard_errors,
            "raw_origin_marginal": estimate.raw_probabilities,
            "effective_sample_size": estimate.effective_sample_size,
        })
    output.summary["results"] = results
    return output


def _curve_rows(curve: RobustnessCurve) -> List[Row]:
    p = curve.parameters
    return [
        {
            "schema_version": SCHEMA_VERSION,
            "d": p.d, "q": p.q, "J": p.J, "epsilon": p.epsilon,
            "L": point.L, "r": point.r, "mode": p.mode.value,
            "theta": point.theta, "theta_se": point.theta_se,
            "tv": point.tv, "tv_se": point.tv_se,
            "n_samples": point.n_samples,
            "seed": point.seed,
        }
        for point in curve.points
    ]


def _scan(cfg: RunConfig, diagonal: bool) -> RunOutput:
    model = cfg.model
    output = RunOutput(tables={"results": Table(SCAN_COLUMNS)})
    curves: List[RobustnessCurve] = []
    for index, eps in enumerate(model.epsilons):
        offset = index * len(model.sizes)
        mode = BoundaryMode.WEAKLY_WIRED_DIAGONAL if diagonal else model.mode
        chain = cfg.chain.to_chain_config(mode, model.annulus_width, stream_offset=offset)
        if diagonal:
            curve = robustness_service.diagonal_limit_scan(
                model.d, model.q, model.resolved_J, eps, model.sizes, chain,
                use_exact=model.use_exact, workers=settings.workers, edge_cap=cfg.caps.enumeration_edge_cap,
            )
        else:
            curve = robustness_service.robustness_scan(
                model.d, model.q, model.resolved_J, eps, model.sizes, model.mode, chain,
                r=model.r, annulus_width=model.annulus_width, use_exact=model.use_exact,
                workers=settings.workers, edge_cap=cfg.caps.enumeration_edge_cap,
            )
        curves.append(curve)
        output.tables["results"].rows.extend(_curve_rows(curve))

    output.summary["curves"] = [
        {
            "epsilon": curve.parameters.epsilon,
            "verdict": curve.trend.verdict.value,
            "slope": curve.trend.slope,
            "slope_se": curve.trend.slope_se,
            "seeds": sorted({point.seed for point in curve.points}),
            "streams": [point.stream_id for point in curve.points],
            "sources": [point.source.value for point in curve.points],
        }
        for curve in curves
    ]
    if len(curves) > 1:
        strongest = max(curves, key=lambda c: c.parameters.epsilon)
        L = model.sizes[-1]
        output.summary["separations"] = [
            {
                "epsilon": curve.parameters.epsilon,
                "reference_epsilon": strongest.parameters.epsilon,
                "L": L,
                "sigma": robustness_service.epsilon_separation(curve, strongest, L),
            }
            for curve in curves if curve is not strongest
        ]
    return output


def run_robustness(cfg: RunConfig) -> RunOutput:
    return _scan(cfg, diagonal=False)


def run_diagonal(cfg: RunConfig) -> RunOutput:
    return _scan(cfg, diagonal=True)


def run_fkg_check(cfg: RunConfig) -> RunOutput:
    """Exact theta per epsilon and event domination between neighbouring epsilons"""
    model = cfg.model
    output = RunOutput(tables={"results": Table(SCAN_COLUMNS)})
    pairs = []
    epsilons = sorted(model.epsilons)
    for L in model.sizes:
        geometries = {eps: _geometry(cfg, L, eps) for eps in epsilons}
        for eps in epsilons:
            lat, bonds = geometries[eps]
            estimate = exact_estimate(lat, bonds, model.q, model.mode.wired, edge_cap=cfg.caps.enumeration_edge_cap)
            radius = bonds.cutset.radius if bonds.cutset is not None else None
            output.tables["results"].rows.append(_scan_row(cfg, model.mode, eps, L, radius, estimate, None))
        for weak, strong in zip(epsilons, epsilons[1:]):
            lat, bonds_strong = geometries[strong]
            _, bonds_weak = geometries[weak]
            report = exact_service.check_event_domination(
                lat, bonds_strong, bonds_weak, model.q, wired=model.mode.wired,
                edge_cap=cfg.caps.enumeration_edge_cap,
            )
            pairs.append({
                "L": L,
                "epsilon_weak": weak,
                "epsilon_strong": strong,
                "passed": report.passed,
                "n_events": len(report.checks),
                "failed_events": [check.event for check in report.checks if not check.holds],
            })
    output.summary["domination"] = pairs
    output.summary["all_passed"] = all(pair["passed"] for pair in pairs)
    return output


def run_contours(cfg: RunConfig) -> RunOutput:
    model = cfg.model
    bound_columns = [f"log_bound_C{c:g}" for c in model.peierls_constants]
    columns = ["schema_version", "d", "q", "J", "epsilon", "L", "mode", "length", "count",
               "probability", "standard_error"] + bound_columns
    output = RunOutput(tables={"census": Table(columns)})
    results = []
    for index, (L, eps) in enumerate(_cells(cfg)):
        lat, bonds = _geometry(cfg, L, eps)
        chain = cfg.chain.to_chain_config(model.mode, model.annulus_width, stream_offset=index)
        histogram = contour_service.run_census(lat, bonds, model.q, chain, model.peierls_constants)
        for row in histogram.rows:
            record = {
                "schema_version": SCHEMA_VERSION,
                "d": model.d, "q": model.q, "J": model.resolved_J, "epsilon": eps, "L": L,
                "mode": model.mode.value, "length": row.length, "count": row.count,
                "probability": row.probability, "standard_error": row.standard_error,
            }
            record.update({f"log_bound_C{c}": value for c, value in row.log_bounds.items()})
            output.tables["census"].rows.append(record)

        entry: Dict[str, Any] = {"L": L, "epsilon": eps, "n_samples": histogram.n_samples,
                                 "seed": chain.seed, "stream_id": chain.stream_id}
        observed = [row for row in histogram.rows if row.count > 0]
        if len(observed) >= 2:
            slope, slope_se = contour_service.census_log_slope(histogram)
            entry.update(log_slope=slope, log_slope_se=slope_se)
        results.append(entry)
    output.summary["results"] = results
    return output


def run_bkl_check(cfg: RunConfig) -> RunOutput:
    model = cfg.model
    columns = ["schema_version", "q", "J", "epsilon", "L", "pattern", "log_z", "rhs", "holds", "n_colourings",
               "E0", "E1", "E2", "E3", "E4", "E4prime"]
    output = RunOutput(tables={"bkl": Table(columns)})
    results = []
    for L, eps in _cells(cfg):
        lat, bonds = _geometry(cfg, L, eps)
        table = contour_service.bkl_table(lat, bonds, model.q, epsilon=model.bkl_epsilon, spin_cap=cfg.caps.spin_cap)
        for check in table.checks:
            record = {
                "schema_version": SCHEMA_VERSION,
                "q": model.q, "J": model.resolved_J, "epsilon": table.epsilon, "L": L,
                "pattern": "".join("b" if flag else "u" for flag in check.broken),
                "log_z": check.log_z, "rhs": check.rhs, "holds": check.holds,
                "n_colourings": check.n_colourings,
            }
            record.update(check.classes)
            output.tables["bkl"].rows.append(record)
        results.append({
            "L": L,
            "epsilon": table.epsilon,
            "n_patterns": table.n_patterns,
            "n_violations": table.n_violations,
            "max_excess": table.max_excess,
        })
    output.summary["results"] = results
    return output


HANDLERS: Dict[Command, Callable[[RunConfig], RunOutput]] = {
    Command.ENUMERATE: run_enumerate,
    Command.SAMPLE: run_sample,
    Command.ROBUSTNESS: run_robustness,
    Command.DIAGONAL: run_diagonal,
    Command.FKG_CHECK: run_fkg_check,
    Command.CONTOURS: run_contours,
    Command.BKL_CHECK: run_bkl_check,
}


def dispatch(cfg: RunConfig, repository: Optional[ResultRepository] = None) -> int:
    """Run the configured experiment and write its artifacts; refusals propagate"""
    repository = repository or ResultRepository(cfg.output.directory)
    config = canonical_config(cfg)
    started = time.perf_counter()
    logger.info(f"Running {cfg.command.value} with J={cfg.model.resolved_J!r}")

    output = HANDLERS[cfg.command](cfg)
    wall_time = time.perf_counter() - started

    if "csv" in cfg.output.formats:
        for name, table in output.tables.items():
            stem = cfg.stem if len(output.tables) == 1 else f"{cfg.stem}_{name}"
            repository.write_table(stem, table.columns, table.rows, config)
    if "json" in cfg.output.formats:
        summary = dict(output.summary, command=cfg.command.value, resolved_J=cfg.model.resolved_J,
                       seed=cfg.chain.seed)
        repository.write_summary(cfg.stem, summary, config, wall_time)
    logger.info(f"Finished {cfg.command.value} in {wall_time:.1f}s")
    return EXIT_OK


def _parse_overrides(tokens: Sequence[str]) -> Dict[str, str]:
    overrides: Dict[str, str] = {}
    tokens = list(tokens)
    while tokens:
        token = tokens.pop(0)
        if not token.startswith("--"):
            raise ConfigError(token, "expected --key value")
        key, eq, value = token[2:].partition("=")
        if not eq:
            if not tokens:
                raise ConfigError(key, "missing value")
            value = tokens.pop(0)
        overrides[key.replace("-", "_")] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="run.py",
        description="Weak-boundary robustness experiments for Potts and random-cluster models",
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Experiment to run")
    parser.add_argument("--config", help="Run configuration file (INI)")
    parser.add_argument("--emit-config", action="store_true",
                        help="Print the resolved configuration and exit without running")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    args, extra = build_parser().parse_known_args(argv)
    try:
        overrides = _parse_overrides(extra)
        if args.config:
            cfg = load_config(args.config, overrides, args.command)
        else:
            cfg = parse_config("", overrides, args.command)
        if args.emit_config:
            sys.stdout.write(emit_config(cfg))
            return EXIT_OK
        return dispatch(cfg)
    except RobustPottsError as e:
        logger.error(f"Refused: {e}")
        return EXIT_REFUSED
    except Exception:
        logger.exception("Run failed")
        return EXIT_FAILURE
