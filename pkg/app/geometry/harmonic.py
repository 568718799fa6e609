"""
Equivariant discrete maps into the hyperbolic plane: harmonic maps, Hopf differentials
and the discrete minimal Lagrangian map between two structures.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import torch
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import LinearOperator, cg

from app.core.config import Settings, settings
from app.core.errors import OutOfRange, SolverDiverged, StructureMismatch
from app.core.prometheus import record_solver_progress, track_solver_operation
from app.geometry import hyperboloid
from app.geometry.holonomy import RELATOR_TOL, SurfaceGroupRep, psl_distance
from app.geometry.mesh_surface import (
    MetricField,
    OperatorField,
    TriSurface,
    center_field,
    edge_graph,
    exact_metric,
    face_areas,
    trace_mass,
)
from app.geometry.tensor_core import TangentMetric, det_normalize, operator_sqrt

logger = logging.getLogger("landslide")

DTYPE = torch.float64
SAME_REP_TOL = 1e-12
ANGLE_CLAMP = 1.0 - 1e-15
FLAT_TOL = 64.0 * np.finfo(float).eps
NEWTON_HALVINGS = 10


@dataclass(frozen=True)
class SolverLimits:
    """Stopping rules shared by the harmonic, graph-area and center solvers."""
    gradient_tol: float
    max_iterations: int
    max_restarts: int
    newton_steps: int
    center_max_iterations: int
    center_tol: float

    @classmethod
    def from_settings(cls, config: Optional[Settings] = None) -> "SolverLimits":
        config = settings if config is None else config
        return cls(
            gradient_tol=config.SOLVER_GRADIENT_TOL,
            max_iterations=config.SOLVER_MAX_ITERATIONS,
            max_restarts=config.SOLVER_MAX_RESTARTS,
            newton_steps=config.SOLVER_NEWTON_STEPS,
            center_max_iterations=config.CENTER_MAX_ITERATIONS,
            center_tol=config.CENTER_TOL,
        )


@dataclass
class DiscreteMap:
    """A rep-equivariant vertex map: one hyperboloid point per identified vertex."""
    surface: TriSurface
    target: SurfaceGroupRep
    class_points: np.ndarray
    energy_history: List[float] = field(default_factory=list)
    gradient_norm: float = 0.0
    iterations: int = 0

    @property
    def points(self) -> np.ndarray:
        """Images of all cut vertices, shape (n, 3)."""
        frames = self.surface.lorentz_frames(self.target)
        return np.einsum("vij,vj->vi", frames, self.class_points[self.surface.vertex_class])

    def edge_lengths_sq(self) -> np.ndarray:
        P = self.points[self.surface.faces]
        return np.column_stack([hyperboloid.distance(P[:, k], P[:, (k + 1) % 3]) ** 2 for k in range(3)])

    def pullback_metric(self) -> MetricField:
        return MetricField.from_edge_lengths_sq(self.edge_lengths_sq())

    def equivariance_residual(self) -> float:
        """Largest gap between a linked vertex image and the side pairing applied to its partner."""
        points = self.points
        worst = 0.0
        for letter in sorted(set(self.surface.link_letters)):
            mask = np.array([x == letter for x in self.surface.link_letters])
            v, u = self.surface.links[mask, 0], self.surface.links[mask, 1]
            moved = points[v] @ self.target.lorentz(letter).T
            worst = max(worst, float(np.abs(points[u] - moved).max()))
        return worst


def identity_map(surface: TriSurface) -> DiscreteMap:
    """The cut mesh itself, as a map equivariant for the surface's own representation."""
    if surface.rep is None:
        raise StructureMismatch("Surface has no holonomy representation")
    return DiscreteMap(surface, surface.rep, surface.points[surface.class_representatives].copy())


def same_rep(first: SurfaceGroupRep, second: SurfaceGroupRep, tol: float = SAME_REP_TOL) -> bool:
    return all(
        psl_distance(first.word_matrix(letter), second.word_matrix(letter)) <= tol for letter in "abcd"
    )


def _check_target(surface: TriSurface, rep: SurfaceGroupRep):
    if surface.genus != 2:
        raise StructureMismatch(f"Expected a genus-2 surface, got genus {surface.genus}")
    if rep.relator_residual > RELATOR_TOL:
        raise StructureMismatch(f"Representation violates the surface relation: {rep.relator_residual:.3g}")


def _layout(x: torch.Tensor, frames: torch.Tensor, vertex_class: torch.Tensor) -> torch.Tensor:
    x0 = torch.sqrt(1.0 + (x * x).sum(dim=1, keepdim=True))
    class_points = torch.cat([x0, x], dim=1)
    return torch.einsum("vij,vj->vi", frames, class_points[vertex_class])


def _edge_lengths(Y: torch.Tensor, faces: torch.Tensor) -> torch.Tensor:
    columns = []
    for k in range(3):
        diff = Y[faces[:, k]] - Y[faces[:, (k + 1) % 3]]
        gap = diff[:, 1] ** 2 + diff[:, 2] ** 2 - diff[:, 0] ** 2
        columns.append(2.0 * torch.asinh(0.5 * torch.sqrt(gap.clamp_min(1e-300))))
    return torch.stack(columns, dim=1)


def _hyperbolic_areas(lengths: torch.Tensor) -> torch.Tensor:
    angles = []
    for k in range(3):
        x, y, opposite = lengths[:, k], lengths[:, (k - 1) % 3], lengths[:, (k + 1) % 3]
        cosine = (torch.cosh(x) * torch.cosh(y) - torch.cosh(opposite)) / (torch.sinh(x) * torch.sinh(y))
        angles.append(torch.acos(cosine.clamp(-ANGLE_CLAMP, ANGLE_CLAMP)))
    return math.pi - torch.stack(angles, dim=1).sum(dim=1)


def _gram(lengths_sq: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    g11, g22 = lengths_sq[:, 0], lengths_sq[:, 2]
    return g11, 0.5 * (g11 + g22 - lengths_sq[:, 1]), g22


def _lbfgs(x: torch.Tensor) -> torch.optim.LBFGS:
    return torch.optim.LBFGS(
        [x],
        lr=1.0,
        max_iter=1,
        max_eval=25,
        tolerance_grad=0.0,
        tolerance_change=0.0,
        history_size=20,
        line_search_fn="strong_wolfe",
    )


def _evaluate(objective: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor) -> Tuple[float, float]:
    x.grad = None
    loss = objective(x)
    loss.backward()
    return float(loss.item()), float(x.grad.norm().item())


def _newton_direction(objective: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor) -> torch.Tensor:
    """Solve H d = -grad by conjugate gradients on exact Hessian-vector products."""
    point = x.detach().clone().requires_grad_(True)
    (gradient,) = torch.autograd.grad(objective(point), point, create_graph=True)

    def product(v: np.ndarray) -> np.ndarray:
        direction = torch.as_tensor(np.ravel(v), dtype=DTYPE).reshape(point.shape)
        (hv,) = torch.autograd.grad(gradient, point, grad_outputs=direction, retain_graph=True)
        return hv.detach().reshape(-1).numpy()

    n = point.numel()
    hessian = LinearOperator((n, n), matvec=product, dtype=np.float64)
    step, _ = cg(hessian, -gradient.detach().reshape(-1).numpy(), maxiter=n)
    return torch.as_tensor(step, dtype=DTYPE).reshape(point.shape)


def _minimize(
    objective: Callable[[torch.Tensor], torch.Tensor],
    x: torch.Tensor,
    solver: str,
    limits: SolverLimits,
) -> Tuple[List[float], float, int]:
    """Drive the gradient norm below limits.gradient_tol or raise SolverDiverged.

    L-BFGS (strong Wolfe) runs from the best point seen so far and restarts with an empty
    history whenever a step makes no progress. Once restarts run out, Newton-CG steps finish
    the solve, each accepted when it lowers the gradient norm without raising the value
    beyond rounding.
    """
    gradient_tol, max_iterations = limits.gradient_tol, limits.max_iterations
    best_value, gradient_norm = _evaluate(objective, x)
    best_x = x.detach().clone()
    flat = FLAT_TOL * max(1.0, abs(best_value))
    history = [best_value]
    iterations = restarts = 0
    optimizer = _lbfgs(x)

    def closure():
        x.grad = None
        loss = objective(x)
        loss.backward()
        return loss

    while gradient_norm >= gradient_tol and iterations < max_iterations and restarts <= limits.max_restarts:
        optimizer.step(closure)
        iterations += 1
        value, norm = _evaluate(objective, x)
        if value < best_value - flat or (value <= best_value + flat and norm < gradient_norm):
            best_value, gradient_norm = value, norm
            best_x = x.detach().clone()
            history.append(value)
            restarts = 0
        else:
            restarts += 1
            with torch.no_grad():
                x.copy_(best_x)
            optimizer = _lbfgs(x)
        if iterations % 100 == 0:
            logger.debug(f"{solver}: iteration {iterations}, value {best_value:.12g}, |grad| {gradient_norm:.3e}")

    steps = 0
    while gradient_norm >= gradient_tol and iterations < max_iterations and steps < limits.newton_steps:
        direction = _newton_direction(objective, x)
        steps += 1
        iterations += 1
        accepted = False
        length = 1.0
        for _ in range(NEWTON_HALVINGS):
            with torch.no_grad():
                x.copy_(best_x + length * direction)
            value, norm = _evaluate(objective, x)
            if norm < gradient_norm and value <= best_value + flat:
                best_value, gradient_norm = value, norm
                best_x = x.detach().clone()
                history.append(value)
                accepted = True
                break
            length *= 0.5
        with torch.no_grad():
            x.copy_(best_x)
        if not accepted:
            break

    record_solver_progress(solver, iterations, gradient_norm)
    if gradient_norm < gradient_tol:
        logger.debug(f"{solver}: converged after {iterations} iterations ({steps} Newton)")
        return history, gradient_norm, iterations
    logger.error(f"{solver}: no convergence after {iterations} iterations, |grad| {gradient_norm:.3e}")
    raise SolverDiverged(f"{solver} did not converge", gradient_norm=gradient_norm, iterations=iterations)


@track_solver_operation(solver="harmonic", stage="solve")
def harmonic_map(
    surface: TriSurface,
    domain: MetricField,
    target: SurfaceGroupRep,
    initial: Optional[np.ndarray] = None,
    limits: Optional[SolverLimits] = None,
) -> DiscreteMap:
    """Minimize the cotangent Dirichlet energy 1/4 sum cot * d^2 over target-equivariant maps.

    The domain metric only enters through its conformal class (the cotangent weights).
    """
    _check_target(surface, target)
    if domain.n_faces != surface.n_faces:
        raise StructureMismatch("Domain metric does not match the surface")
    start = surface.points[surface.class_representatives] if initial is None else np.asarray(initial)

    weights = torch.tensor(domain.cot_weights(), dtype=DTYPE)
    frames = torch.tensor(surface.lorentz_frames(target), dtype=DTYPE)
    vertex_class = torch.as_tensor(surface.vertex_class, dtype=torch.long)
    faces = torch.as_tensor(surface.faces, dtype=torch.long)
    x = torch.tensor(start[:, 1:], dtype=DTYPE, requires_grad=True)

    def energy(x: torch.Tensor) -> torch.Tensor:
        lengths = _edge_lengths(_layout(x, frames, vertex_class), faces)
        return 0.25 * (weights * lengths * lengths).sum()

    history, gradient_norm, iterations = _minimize(energy, x, "harmonic", limits or SolverLimits.from_settings())
    result = hyperboloid.project(np.column_stack([np.zeros(len(start)), x.detach().numpy()]))
    return DiscreteMap(surface, target, result, history, gradient_norm, iterations)


def hopf_from_pullback(c: TangentMetric, g: TangentMetric) -> complex:
    """Hopf coefficient of g relative to the conformal structure of c.

    The c-traceless part of g, read in the frame (e1, J_c e1), is Re(phi dz^2).
    """
    return complex(hopf_field(MetricField(np.array([c.to_tuple()])), MetricField(np.array([g.to_tuple()])))[0])


def hopf_field(c: MetricField, g: MetricField) -> np.ndarray:
    """Per-face Hopf coefficients, complex array of shape (F,)."""
    C, G = c.matrices(), g.matrices()
    trace = np.einsum("fii->f", np.linalg.solve(C, G))
    T = G - 0.5 * trace[:, None, None] * C
    c11, c12, _ = c.gram.T
    root = np.sqrt(c.det())
    frame = np.zeros_like(C)
    frame[:, 0, 0] = 1.0
    frame[:, 0, 1] = -c12 / root
    frame[:, 1, 1] = c11 / root
    T_hat = np.transpose(frame, (0, 2, 1)) @ T @ frame
    return 0.5 * (T_hat[:, 0, 0] - 1j * T_hat[:, 0, 1])


def hopf_of_map(domain: MetricField, dmap: DiscreteMap) -> np.ndarray:
    return hopf_field(domain, dmap.pullback_metric())


def _energy_scale(c: MetricField, g: MetricField) -> np.ndarray:
    """Trace part of g relative to c, read in the same chart frame as the Hopf coefficient."""
    trace = np.einsum("fii->f", np.linalg.solve(c.matrices(), g.matrices()))
    return 0.5 * trace * c.gram[:, 0]


@dataclass
class CenterFixedPoint:
    """Cross-check of the minimal Lagrangian map through its center metric."""
    b: OperatorField
    scales: np.ndarray
    center: MetricField
    domain: MetricField
    image: MetricField
    residuals: List[float]


def hopf_sum_residual(c: MetricField, g: MetricField, g_star: MetricField) -> np.ndarray:
    """Per-face |Phi(c, g) + Phi(c, g_star)| over the energy density of the pair."""
    mismatch = np.abs(hopf_field(c, g) + hopf_field(c, g_star))
    scale = np.maximum(_energy_scale(c, g) + _energy_scale(c, g_star), np.finfo(float).tiny)
    return mismatch / scale


def _operator_field(domain: MetricField, target: MetricField) -> Tuple[OperatorField, np.ndarray]:
    samples, scales = [], []
    for f in range(domain.n_faces):
        normalized, scale = det_normalize(operator_sqrt(domain.face(f), target.face(f)))
        samples.append(normalized)
        scales.append(scale)
    return OperatorField.from_samples(samples), np.array(scales)


@track_solver_operation(solver="center_fixed_point", stage="solve")
def center_fixed_point(
    surface: TriSurface,
    center: MetricField,
    h_rep: SurfaceGroupRep,
    hstar_rep: SurfaceGroupRep,
    initial: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    limits: Optional[SolverLimits] = None,
) -> CenterFixedPoint:
    """Iterate c <- f*h + f_star*h_star with f, f_star harmonic from c.

    At the fixed point the Hopf differentials cancel and f_star o f^-1 is minimal Lagrangian.
    Raises SolverDiverged when the Hopf sum stays above limits.center_tol.
    """
    limits = limits or SolverLimits.from_settings()
    if limits.center_max_iterations < 1:
        raise OutOfRange(f"center_max_iterations must be positive, got {limits.center_max_iterations}")
    c = center
    f_points, fs_points = (None, None) if initial is None else initial
    residuals: List[float] = []
    for k in range(limits.center_max_iterations):
        f = harmonic_map(surface, c, h_rep, initial=f_points, limits=limits)
        f_star = harmonic_map(surface, c, hstar_rep, initial=fs_points, limits=limits)
        f_points, fs_points = f.class_points, f_star.class_points
        G_f, G_star = f.pullback_metric(), f_star.pullback_metric()
        residuals.append(float(hopf_sum_residual(c, G_f, G_star).max()))
        logger.debug(f"center iteration {k}: Hopf residual {residuals[-1]:.3e}")
        if residuals[-1] < limits.center_tol:
            break
        c = G_f + G_star
    else:
        logger.error(
            f"Center iteration stopped at residual {residuals[-1]:.3e} after {limits.center_max_iterations} rounds"
        )
        raise SolverDiverged(
            "center fixed point did not converge",
            gradient_norm=residuals[-1],
            iterations=limits.center_max_iterations,
        )

    b, scales = _operator_field(G_f, G_star)
    return CenterFixedPoint(b, scales, c, G_f, G_star, residuals)


@dataclass
class MinimalLagrangianResult:
    """The discrete minimal Lagrangian map m from (S, h) to (S, h_star) and its operator field."""
    h_map: DiscreteMap
    m_map: DiscreteMap
    h_metric: MetricField
    hstar_metric: MetricField
    b: OperatorField
    scales: np.ndarray
    center: MetricField
    objective_history: List[float]
    cross_check: Optional[CenterFixedPoint] = None

    @property
    def raw_dets(self) -> np.ndarray:
        """det of b before normalization, the per-face area ratio."""
        return self.scales ** 2

    def det_deviation(self) -> float:
        """Area-weighted mean of |det b_raw - 1|."""
        areas = face_areas(self.h_metric)
        return float((np.abs(self.raw_dets - 1.0) * areas).sum() / areas.sum())

    def area_deviation(self) -> float:
        area_h = face_areas(self.h_metric).sum()
        return float(abs(face_areas(self.hstar_metric).sum() - area_h) / area_h)

    def sup_kappa(self) -> float:
        return float(self.b.largest_eigenvalues().max())

    def trace_mass(self) -> float:
        return trace_mass(self.h_metric, self.b)

    def dual_agreement(self) -> float:
        """Sup-norm gap between the per-face operators of the two solvers, relative to sup |b|."""
        if self.cross_check is None:
            raise OutOfRange("No cross-check was run")
        return float(np.abs(self.cross_check.b.ops - self.b.ops).max() / np.abs(self.b.ops).max())


@track_solver_operation(solver="graph_area", stage="solve")
def minimal_lagrangian(
    surface: TriSurface,
    h_rep: SurfaceGroupRep,
    hstar_rep: SurfaceGroupRep,
    cross_check: bool = False,
    domain_map: Optional[DiscreteMap] = None,
    initial: Optional[np.ndarray] = None,
    limits: Optional[SolverLimits] = None,
) -> MinimalLagrangianResult:
    """Minimize the graph area of an equivariant map from an h-realization to h_star.

    Per face the graph area is sqrt det(G_h + G_m) / (sqrt det G_h + sqrt det G_m) times
    the sum of the hyperbolic face areas; its minimum 8 pi is reached exactly at the
    identity when both structures agree. The objective is symmetric in the two maps.

    domain_map reuses an existing h-equivariant realization; initial seeds the target map
    and defaults to the realization's own points.
    """
    limits = limits or SolverLimits.from_settings()
    _check_target(surface, h_rep)
    _check_target(surface, hstar_rep)
    if domain_map is not None:
        if not same_rep(domain_map.target, h_rep):
            raise StructureMismatch("Domain map is not equivariant for the domain structure")
        h_map = domain_map
    elif surface.rep is not None and same_rep(h_rep, surface.rep):
        h_map = identity_map(surface)
    else:
        logger.info("Realizing the domain structure by a harmonic map")
        h_map = harmonic_map(surface, exact_metric(surface), h_rep, limits=limits)
    h_metric = h_map.pullback_metric()
    start = h_map.class_points if initial is None else np.asarray(initial)
    if start.shape != h_map.class_points.shape:
        raise StructureMismatch(f"Initial points have shape {start.shape}, expected {h_map.class_points.shape}")

    h11, h12, h22 = (torch.tensor(col, dtype=DTYPE) for col in h_metric.gram.T)
    root_h = torch.sqrt(h11 * h22 - h12 * h12)
    area_h = torch.tensor(face_areas(h_metric), dtype=DTYPE)
    frames = torch.tensor(surface.lorentz_frames(hstar_rep), dtype=DTYPE)
    vertex_class = torch.as_tensor(surface.vertex_class, dtype=torch.long)
    faces = torch.as_tensor(surface.faces, dtype=torch.long)
    x = torch.tensor(start[:, 1:], dtype=DTYPE, requires_grad=True)

    def graph_area(x: torch.Tensor) -> torch.Tensor:
        lengths = _edge_lengths(_layout(x, frames, vertex_class), faces)
        m11, m12, m22 = _gram(lengths * lengths)
        root_m = torch.sqrt((m11 * m22 - m12 * m12).clamp_min(1e-300))
        root_sum = torch.sqrt((h11 + m11) * (h22 + m22) - (h12 + m12) ** 2)
        return (root_sum / (root_h + root_m) * (area_h + _hyperbolic_areas(lengths))).sum()

    history, gradient_norm, iterations = _minimize(graph_area, x, "graph_area", limits)
    class_points = hyperboloid.project(np.column_stack([np.zeros(len(start)), x.detach().numpy()]))
    m_map = DiscreteMap(surface, hstar_rep, class_points, history, gradient_norm, iterations)
    hstar_metric = m_map.pullback_metric()

    b, scales = _operator_field(h_metric, hstar_metric)
    center = center_field(h_metric, b)
    logger.info(
        f"Minimal Lagrangian map: graph area {history[-1]:.10g} after {iterations} iterations, "
        f"sup kappa {float(b.largest_eigenvalues().max()):.6g}"
    )
    result = MinimalLagrangianResult(h_map, m_map, h_metric, hstar_metric, b, scales, center, history)
    if cross_check:
        result.cross_check = center_fixed_point(
            surface,
            h_metric + hstar_metric,
            h_rep,
            hstar_rep,
            initial=(h_map.class_points, m_map.class_points),
            limits=limits,
        )
    return result


def rescaled_pullback_length(dmap: DiscreteMap, theta: float, start: int, end: int) -> float:
    """theta times the shortest cut-mesh path from start to end, measured in the image."""
    if theta < 0:
        raise OutOfRange(f"theta must be non-negative, got {theta}")
    if theta == 0:
        return 0.0
    lengths = np.sqrt(dmap.edge_lengths_sq())
    distances = dijkstra(edge_graph(dmap.surface, lengths), directed=False, indices=start)
    return float(theta * distances[end])
