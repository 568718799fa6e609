"""
Experiments: each one runs a family of verifications and returns a report plus CSV tables.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.config import Settings
from app.core.errors import LandslideError, SingularOperator
from app.core.prometheus import increment_error_count
from app.experiments.report import Comparison, ExperimentReport
from app.geometry.degeneration import (
    PinchSchedule,
    ext_bounds,
    flat_cylinder_extremal_length,
    predicted_antipode_limit,
    predicted_center_limit,
    schedule_table,
    transversal_asymptote,
    transversal_length,
    weight_ratio,
)
from app.geometry.harmonic import SolverLimits, minimal_lagrangian
from app.geometry.holonomy import (
    PANTS_CURVES,
    RELATOR_TOL,
    FNCoords,
    fn_to_rep,
    length_spectrum,
    normalization_factors,
    pinch_sequence,
    projective_limit_diagnostic,
    twist_rep,
)
from app.geometry.mesh_surface import (
    MetricField,
    OperatorField,
    TriSurface,
    build_octagon_surface,
    codazzi_residual,
    discrete_curvature,
    landslide_field,
    mesh_curve_length,
    synthetic_operator_field,
    total_curvature,
)
from app.geometry.sampling import random_pair
from app.geometry.tensor_core import (
    OperatorSample,
    TangentMetric,
    ads_embedding_data,
    beltrami,
    beta,
    cauchy_riemann_residual,
    center,
    complex_landslide_operator,
    complex_structure,
    conformal_grafted_metric,
    conjugated_b,
    gauss_residual,
    hopf,
    hyp_grafting_data,
    jb_decomposition_residual,
    landslide_point,
    largest_eigenvalue,
    push_metric,
    shape_variation_residual,
    singular_radius,
    trace_identity_residual,
    variation_residuals,
)

logger = logging.getLogger("landslide")

EXPERIMENTS = ("flow", "complexflow", "mesh", "limit", "degenerate", "spectrum")
GAUSS_GRID_SIZE = 16
CR_PAIRS = 5


@dataclass
class ExperimentOutput:
    report: ExperimentReport
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    surfaces: Dict[str, Tuple[TriSurface, MetricField, Optional[OperatorField]]] = field(default_factory=dict)


def experiment_rng(seed: int, experiment: str) -> np.random.Generator:
    """Independent stream per experiment, split off the global seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(EXPERIMENTS.index(experiment),)))


def _new_report(experiment: str, config: Settings, seed: int, samples: int) -> ExperimentReport:
    return ExperimentReport(
        experiment=experiment, seed=seed, samples=samples, config=config.model_dump(mode="json")
    )


def _gap(a, b) -> float:
    """Largest entrywise difference, relative to the larger entry once it exceeds 1."""
    A, B = a.matrix(), b.matrix()
    return float(np.abs(A - B).max() / max(1.0, np.abs(A).max(), np.abs(B).max()))


def _exact_pair() -> Tuple[TangentMetric, OperatorSample]:
    return TangentMetric(2.0, 0.0, 3.0), OperatorSample(2.0, 0.0, 0.0, 0.5)


def cmd_flow(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Pointwise landslide identities over random pairs."""
    report = _new_report("flow", config, seed, samples)
    rng = experiment_rng(seed, "flow")
    thetas = np.linspace(0.0, 2 * math.pi, config.THETA_GRID_SIZE, endpoint=False)
    ads_angles = np.linspace(0.05, math.pi - 0.05, GAUSS_GRID_SIZE)
    distances = np.linspace(0.05, 5.0, GAUSS_GRID_SIZE)

    rows = []
    for i in range(samples):
        h, b = random_pair(rng, config.KAPPA_MAX)
        theta, theta_prime = rng.uniform(-math.pi, math.pi, size=2)
        J = complex_structure(h)

        h_theta, _ = landslide_point(h, b, theta)
        composed = landslide_point(h_theta, conjugated_b(b, J, theta), theta_prime)
        direct = landslide_point(h, b, theta + theta_prime)
        group_law = max(_gap(composed[0], direct[0]), _gap(composed[1], direct[1]))

        h_pi, h_pi_star = landslide_point(h, b, math.pi)
        antipode = max(_gap(h_pi, push_metric(h, b)), _gap(h_pi_star, h), _gap(conjugated_b(b, J, math.pi), b.inverse()))

        c = center(h, b)
        sample = hopf(h, b, J)
        scale = max(1.0, abs(c.g11), abs(c.g22))
        center_gap = hopf_gap = det_gap = 0.0
        for t in thetas:
            first, second = landslide_point(h, b, t)
            center_gap = max(center_gap, _gap(first + second, c))
            hopf_gap = max(hopf_gap, (first - second).scaled(0.25).distance(sample.rotated(t)) / scale)
            det_gap = max(det_gap, abs(beta(t, b, J).det - 1.0))

        first_variation, shape_variation = variation_residuals(h, b, 1.0, config.FD_STEP)
        rows.append(
            {
                "sample": i,
                "kappa": largest_eigenvalue(b),
                "group_law": group_law,
                "antipode": antipode,
                "center_invariance": center_gap,
                "hopf_rotation": hopf_gap,
                "det_beta": det_gap,
                "gauss_ads": max(gauss_residual(ads_embedding_data(h, b, t), h) for t in ads_angles),
                "gauss_grafting": max(gauss_residual(hyp_grafting_data(h, b, s), h) for s in distances),
                "first_form_variation": first_variation,
                "shape_variation": shape_variation,
                "shape_operator_variation": shape_variation_residual(h, b, 0.8, config.FD_STEP),
                "trace_identity": trace_identity_residual(b) / max(1.0, b.norm()),
                "jb_decomposition": jb_decomposition_residual(b, J) / max(1.0, (J @ b).norm()),
            }
        )
    table = pd.DataFrame(rows)

    exact = [
        "group_law", "antipode", "center_invariance", "hopf_rotation", "det_beta", "trace_identity", "jb_decomposition"
    ]
    for name in exact:
        report.check(name, table[name].max(), config.IDENTITY_TOL)
    for name in ("gauss_ads", "gauss_grafting"):
        report.check(name, table[name].max(), config.GAUSS_TOL)
    for name in ("first_form_variation", "shape_variation", "shape_operator_variation"):
        report.check(name, table[name].max(), config.FD_TOL)

    h, b = _exact_pair()
    coarse = variation_residuals(h, b, 1.0, 10 * config.FD_STEP)
    fine = variation_residuals(h, b, 1.0, 5 * config.FD_STEP)
    report.check("first_form_halving_ratio", coarse[0] / fine[0], config.FD_HALVING_RATIO, Comparison.AT_LEAST)
    report.check("shape_halving_ratio", coarse[1] / fine[1], config.FD_HALVING_RATIO, Comparison.AT_LEAST)
    return ExperimentOutput(report, {"flow_samples": table})


def cmd_complexflow(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Holomorphic extension of the flow and the disc where it stays invertible."""
    report = _new_report("complexflow", config, seed, samples)
    rng = experiment_rng(seed, "complexflow")
    grid = np.linspace(-config.CR_RADIUS, config.CR_RADIUS, config.CR_GRID_SIZE)

    rows = []
    for i in range(samples):
        h, b = random_pair(rng, config.KAPPA_MAX)
        J = complex_structure(h)
        c = center(h, b)
        J_c = complex_structure(c)
        kappa = largest_eigenvalue(b)

        def mu(zeta: complex) -> complex:
            return beltrami(c, J_c, conformal_grafted_metric(h, b, zeta))

        cr = 0.0
        if i < CR_PAIRS:
            for x in grid:
                for y in grid:
                    if abs(complex(x, y)) <= config.CR_RADIUS:
                        cr = max(cr, cauchy_riemann_residual(mu, complex(x, y), config.FD_STEP))

        radius = 0.99 * singular_radius(kappa)
        failures = 0
        probes = config.SINGULAR_PROBE_SAMPLES if i == 0 else 0
        for _ in range(probes):
            r, phi = radius * math.sqrt(rng.uniform()), rng.uniform(0.0, 2 * math.pi)
            zeta = complex(r * math.cos(phi), r * math.sin(phi))
            if abs(zeta) < 1e-9:
                continue
            try:
                if complex_landslide_operator(zeta, b, J).realization(J).det <= 0:
                    failures += 1
            except SingularOperator:
                failures += 1

        rows.append(
            {
                "sample": i,
                "kappa": kappa,
                "center_at_zero": abs(mu(0.0)),
                "h_at_one": abs(beltrami(h, J, conformal_grafted_metric(h, b, 1.0))),
                "near_zero_ratio": abs(mu(1e-3)) / kappa,
                "cauchy_riemann": cr,
                "probe_failures": failures,
            }
        )
    table = pd.DataFrame(rows)
    report.check("center_at_zero", table["center_at_zero"].max(), config.IDENTITY_TOL)
    report.check("h_at_one", table["h_at_one"].max(), config.IDENTITY_TOL)
    report.check("near_zero_ratio", table["near_zero_ratio"].max(), 1e-3)
    report.check("cauchy_riemann", table["cauchy_riemann"].max(), config.CR_TOL)
    report.check("invertible_inside_radius", table["probe_failures"].sum(), 0)

    h, b = TangentMetric.identity(), OperatorSample(2.0, 0.0, 0.0, 0.5)
    try:
        complex_landslide_operator(-singular_radius(2.0), b, complex_structure(h))
        singular = 0.0
    except SingularOperator:
        singular = 1.0
    report.check("singular_on_radius", singular, 1.0, Comparison.AT_LEAST)
    return ExperimentOutput(report, {"complexflow_samples": table})


def cmd_mesh(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Discrete curvature, refinement and the minimal Lagrangian solvers on the octagon surface."""
    report = _new_report("mesh", config, seed, samples)
    level = config.SUBDIVISION_LEVEL
    surface, metric = build_octagon_surface(level)
    report.check("gauss_bonnet", abs(total_curvature(surface, metric) + 4 * math.pi), config.GAUSS_BONNET_TOL)

    refinement = []
    for refined_level in range(1, max(level, 2) + 1):
        refined, refined_metric = build_octagon_surface(refined_level)
        _, stretched = synthetic_operator_field(refined, refined_metric)
        deviation = np.abs(discrete_curvature(refined, stretched) - discrete_curvature(refined, refined_metric)).max()
        refinement.append({"level": refined_level, "faces": refined.n_faces, "deviation": float(deviation)})
    for coarse, fine in zip(refinement, refinement[1:]):
        report.check(
            f"refinement_{coarse['level']}_{fine['level']}",
            coarse["deviation"] / fine["deviation"],
            config.REFINEMENT_FACTOR,
            Comparison.AT_LEAST,
        )

    rep = surface.rep
    limits = SolverLimits.from_settings(config)
    identity = minimal_lagrangian(surface, rep, rep, limits=limits)
    report.check("identity_operator", np.abs(identity.b.ops - np.array([1.0, 0.0, 0.0, 1.0])).max(), config.IDENTITY_B_TOL)

    target = twist_rep(rep, "a", config.TARGET_TWIST_FRACTION * rep.word_length("a"))
    result = minimal_lagrangian(surface, rep, target, cross_check=True, limits=limits)
    report.check("det_b", result.det_deviation(), config.DET_TOL)
    report.check("area_match", result.area_deviation(), config.AREA_TOL)
    report.check("invalid_faces", len(result.b.invalid_faces(result.h_metric)), 0)
    report.check("dual_b_sup_norm", result.dual_agreement(), config.DUAL_SOLVER_TOL)
    report.check("center_hopf_residual", result.cross_check.residuals[-1], config.CENTER_TOL)
    report.check("codazzi_residual", codazzi_residual(surface, result.h_metric, result.b).max(), 1.0, gating=False)

    solver = pd.DataFrame(
        {
            "face": np.arange(surface.n_faces),
            "kappa": result.b.largest_eigenvalues(),
            "det_raw": result.raw_dets,
            "kappa_cross_check": result.cross_check.b.largest_eigenvalues(),
        }
    )
    return ExperimentOutput(
        report,
        {"refinement": pd.DataFrame(refinement), "minimal_lagrangian": solver},
        {"octagon": (surface, result.h_metric, result.b)},
    )


def _decreasing_tail(values: List[float], points: int = 3) -> float:
    """Steps among the last `points` values that fail to decrease."""
    tail = values[-points:]
    return float(sum(1 for earlier, later in zip(tail, tail[1:]) if not later < earlier))


def cmd_limit(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Landslides of a pinched sequence against the earthquake along the pinched curve."""
    report = _new_report("limit", config, seed, samples)
    coords = FNCoords(tuple(config.FN_LENGTHS), tuple(config.FN_TWISTS))
    reps = pinch_sequence(coords, config.PINCH_CURVE, config.PINCH_LENGTHS)
    thetas = normalization_factors(reps, config.REFERENCE_CURVE)

    projective = projective_limit_diagnostic(reps, thetas, config.TEST_CURVES, config.PROJECTIVE_VARIATION_TOL)
    for word, variation in projective.variations.items():
        report.check(f"projective_{word}", variation, config.PROJECTIVE_VARIATION_TOL, gating=strict)

    surface, _ = build_octagon_surface(config.LIMIT_LEVEL)
    base = fn_to_rep(coords)
    limits = SolverLimits.from_settings(config)
    word = PANTS_CURVES[config.PINCH_CURVE - 1]
    expected = twist_rep(base, word, 0.5 * config.LIMIT_TWIST_SIGN)

    # each solve reuses the realization of the base structure and starts from the previous map
    domain_map, previous = None, None
    rows = []
    for n, (rep, theta) in enumerate(zip(reps, thetas)):
        row = {"n": n, "pinch_length": config.PINCH_LENGTHS[n], "theta": theta}
        try:
            result = minimal_lagrangian(
                surface, base, rep, domain_map=domain_map, initial=previous, limits=limits
            )
            domain_map, previous = result.h_map, result.m_map.class_points
            row["solver_iterations"] = result.m_map.iterations
            flowed, _ = landslide_field(surface, result.h_metric, result.b, theta)
            gaps = []
            for letter in config.LIMIT_TEST_LETTERS:
                mesh_ratio = mesh_curve_length(surface, flowed, letter) / mesh_curve_length(surface, result.h_metric, letter)
                rep_ratio = expected.word_length(letter) / base.word_length(letter)
                row[f"mesh_ratio_{letter}"] = mesh_ratio
                row[f"twist_ratio_{letter}"] = rep_ratio
                gaps.append(abs(mesh_ratio - rep_ratio))
            row["discrepancy"] = max(gaps)
        except LandslideError as exc:
            logger.error(f"Limit step {n} failed: {exc}")
            increment_error_count(type(exc).__name__, "cmd_limit")
            row["discrepancy"] = math.nan
        rows.append(row)

    discrepancies = [row["discrepancy"] for row in rows]
    trend = math.nan if any(math.isnan(x) for x in discrepancies) else _decreasing_tail(discrepancies)
    report.check("discrepancy_trend", trend, 0.0, gating=strict)
    return ExperimentOutput(
        report, {"limit": pd.DataFrame(rows), "projective": pd.DataFrame(projective.rows())}
    )


def cmd_degenerate(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Extremal-length bounds, transversal lengths and limit classes of pinching schedules."""
    report = _new_report("degenerate", config, seed, samples)
    schedule = PinchSchedule.from_lists(
        config.SCHEDULE_LENGTHS, config.SCHEDULE_A, config.SCHEDULE_B, config.T_GRID, config.C1
    )

    violation = 0.0
    for i in range(len(schedule.curves)):
        for n in range(len(schedule.t_grid)):
            lower, upper = ext_bounds(schedule, i, n)
            flat = flat_cylinder_extremal_length(1.0, 2.0 * schedule.s(i, n))
            violation = max(violation, (lower - flat) / flat, (flat - upper) / flat)
    report.check("ext_bracketing", max(violation, 0.0), 1e-12)

    for t, tol in ((1e4, config.TRL_TOL_1E4), (1e8, config.TRL_TOL_1E8)):
        if t in schedule.t_grid:
            n = schedule.t_grid.index(t)
            ratio = transversal_length(schedule, 0, n) / transversal_asymptote(schedule, 0, n)
            report.check(f"transversal_ratio_1e{round(math.log10(t))}", abs(ratio - 1.0), tol)

    equal_exponents = PinchSchedule.from_lists(
        config.SCHEDULE_LENGTHS, config.COUNTEREXAMPLE_A, [1.0] * len(config.COUNTEREXAMPLE_A), config.T_GRID, config.C1
    )
    expected = config.COUNTEREXAMPLE_A[0] / config.COUNTEREXAMPLE_A[1]
    ratio_gap = max(abs(weight_ratio(equal_exponents, 0, 1, n) - expected) for n in range(len(config.T_GRID)))
    report.check("weight_ratio_equal_exponents", ratio_gap, 1e-12)

    counterexample = PinchSchedule.from_lists(
        config.SCHEDULE_LENGTHS, config.COUNTEREXAMPLE_A, config.COUNTEREXAMPLE_B, config.T_GRID, config.C1
    )
    ratios = [weight_ratio(counterexample, 0, 1, n) for n in range(len(config.T_GRID))]
    report.check("weight_ratio_diverges", float(sum(1 for x, y in zip(ratios, ratios[1:]) if not y > x)), 0.0)
    center_class = predicted_center_limit(counterexample)
    antipode_class = predicted_antipode_limit(counterexample)
    class_gap = max(abs(x - y) for x, y in zip(center_class.weights, antipode_class.weights))
    report.check("center_differs_from_antipode", class_gap, 1e-9, Comparison.AT_LEAST)

    return ExperimentOutput(
        report,
        {
            "schedule": pd.DataFrame(schedule_table(schedule)),
            "counterexample": pd.DataFrame(schedule_table(counterexample)),
            "limit_classes": pd.DataFrame(
                {"center": center_class.weights, "antipode": antipode_class.weights}
            ),
        },
    )


def cmd_spectrum(config: Settings, seed: int, samples: int, strict: bool = False) -> ExperimentOutput:
    """Length spectrum of the configured Fenchel-Nielsen structure."""
    report = _new_report("spectrum", config, seed, samples)
    coords = FNCoords(tuple(config.FN_LENGTHS), tuple(config.FN_TWISTS))
    rep = fn_to_rep(coords)
    report.check("relator_residual", rep.relator_residual, RELATOR_TOL)
    for word, length in zip(PANTS_CURVES, coords.lengths):
        report.check(f"pants_length_{word}", abs(rep.word_length(word) - length), 1e-9)

    entries = length_spectrum(rep, config.SPECTRUM_MAX_WORD_LENGTH, workers=config.thread_limit)
    report.check("systole", entries[0].length if entries else math.nan, 0.0, Comparison.AT_LEAST)
    table = pd.DataFrame([entry.to_dict() for entry in entries])
    return ExperimentOutput(report, {"spectrum": table})


COMMANDS: Dict[str, Callable[..., ExperimentOutput]] = {
    "flow": cmd_flow,
    "complexflow": cmd_complexflow,
    "mesh": cmd_mesh,
    "limit": cmd_limit,
    "degenerate": cmd_degenerate,
    "spectrum": cmd_spectrum,
}
