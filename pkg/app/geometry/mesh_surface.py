"""
Triangulated genus-2 surfaces cut open along the regular octagon.

Every face carries the affine chart of the reference triangle (0,0), (1,0), (0,1);
local edge k joins local vertices k and k+1. Metric fields store chart Gram
matrices (g11, g12, g22) per face, operator fields chart matrices (a11, a12, a21, a22).
"""
import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from app.core.errors import DegenerateFace, OutOfRange, StructureMismatch
from app.geometry import hyperboloid
from app.geometry.holonomy import INVERSE, SurfaceGroupRep, free_reduce, octagon_rep, octagon_vertex
from app.geometry.tensor_core import (
    OperatorSample,
    TangentMetric,
    landslide_point,
    operator_sqrt,
    push_metric,
)

logger = logging.getLogger("landslide")

MAX_LEVEL = 6
MATCH_TOL = 1e-7
EDGE_VECTORS = np.array([[1.0, 0.0], [-1.0, 1.0], [0.0, -1.0]])


class Background(Enum):
    """Constant curvature used to turn edge lengths into angles."""
    HYPERBOLIC = "hyperbolic"
    EUCLIDEAN = "euclidean"


@dataclass
class MetricField:
    """Per-face chart Gram matrices, shape (F, 3)."""
    gram: np.ndarray

    def __post_init__(self):
        self.gram = np.asarray(self.gram, dtype=float)
        if self.gram.ndim != 2 or self.gram.shape[1] != 3:
            raise OutOfRange(f"Metric field needs shape (F, 3), got {self.gram.shape}")

    @property
    def n_faces(self) -> int:
        return self.gram.shape[0]

    @classmethod
    def from_edge_lengths_sq(cls, lengths_sq: np.ndarray) -> "MetricField":
        L = np.asarray(lengths_sq, dtype=float)
        return cls(np.column_stack([L[:, 0], 0.5 * (L[:, 0] + L[:, 2] - L[:, 1]), L[:, 2]]))

    def face(self, f: int) -> TangentMetric:
        return TangentMetric(*self.gram[f])

    def matrices(self) -> np.ndarray:
        g11, g12, g22 = self.gram.T
        return np.stack([np.stack([g11, g12], axis=-1), np.stack([g12, g22], axis=-1)], axis=-2)

    def det(self) -> np.ndarray:
        g11, g12, g22 = self.gram.T
        return g11 * g22 - g12 * g12

    def edge_lengths_sq(self) -> np.ndarray:
        g11, g12, g22 = self.gram.T
        return np.column_stack([g11, g11 - 2 * g12 + g22, g22])

    def edge_lengths(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.edge_lengths_sq(), 0.0))

    def cot_weights(self) -> np.ndarray:
        """Cotangent of the angle opposite each local edge, shape (F, 3)."""
        g11, g12, g22 = self.gram.T
        root = np.sqrt(self.det())
        return np.column_stack([(g22 - g12) / root, g12 / root, (g11 - g12) / root])

    def __add__(self, other: "MetricField") -> "MetricField":
        return MetricField(self.gram + other.gram)

    def scaled(self, factor: float) -> "MetricField":
        return MetricField(factor * self.gram)


@dataclass
class OperatorField:
    """Per-face chart operators, shape (F, 4)."""
    ops: np.ndarray

    def __post_init__(self):
        self.ops = np.asarray(self.ops, dtype=float)
        if self.ops.ndim != 2 or self.ops.shape[1] != 4:
            raise OutOfRange(f"Operator field needs shape (F, 4), got {self.ops.shape}")

    @classmethod
    def constant(cls, n_faces: int, sample: OperatorSample = OperatorSample.identity()) -> "OperatorField":
        return cls(np.tile(sample.to_tuple(), (n_faces, 1)))

    @classmethod
    def from_samples(cls, samples: Sequence[OperatorSample]) -> "OperatorField":
        return cls(np.array([s.to_tuple() for s in samples]))

    @property
    def n_faces(self) -> int:
        return self.ops.shape[0]

    def face(self, f: int) -> OperatorSample:
        return OperatorSample(*self.ops[f])

    def matrices(self) -> np.ndarray:
        return self.ops.reshape(-1, 2, 2)

    def traces(self) -> np.ndarray:
        return self.ops[:, 0] + self.ops[:, 3]

    def dets(self) -> np.ndarray:
        return self.ops[:, 0] * self.ops[:, 3] - self.ops[:, 1] * self.ops[:, 2]

    def largest_eigenvalues(self) -> np.ndarray:
        t, d = self.traces(), self.dets()
        return 0.5 * (t + np.sqrt(np.maximum(t * t - 4 * d, 0.0)))

    def invalid_faces(self, metric: MetricField, tol: float = 1e-9) -> List[int]:
        """Faces where the operator is not self-adjoint, unimodular and positive."""
        bad = []
        for f in range(self.n_faces):
            b, h = self.face(f), metric.face(f)
            if not (b.is_self_adjoint(h, tol) and b.is_unimodular(tol) and b.is_positive(h)):
                bad.append(f)
        return bad


@dataclass
class TriSurface:
    """A closed triangulated surface, stored as a cut mesh with identified vertices.

    links[i] = (v, u) with letter link_letters[i] means point u is the image of
    point v under that side pairing; vertex_words[v] places v as the image of its
    class representative.
    """
    points: np.ndarray
    faces: np.ndarray
    vertex_class: np.ndarray
    class_representatives: np.ndarray
    vertex_words: List[str] = field(default_factory=list)
    links: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    link_letters: List[str] = field(default_factory=list)
    edge_neighbors: Optional[np.ndarray] = None
    rep: Optional[SurfaceGroupRep] = None
    level: int = 0
    genus: int = 2
    transition_angles: Optional[np.ndarray] = None

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_classes(self) -> int:
        return len(self.class_representatives)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_edges(self) -> int:
        return 3 * self.n_faces // 2

    @property
    def euler_characteristic(self) -> int:
        return self.n_classes - self.n_edges + self.n_faces

    def lorentz_frames(self, rep: SurfaceGroupRep) -> np.ndarray:
        """Per cut vertex, the Lorentz matrix of its word under rep, shape (n, 3, 3)."""
        cache: Dict[str, np.ndarray] = {}
        frames = np.empty((self.n_vertices, 3, 3))
        for v, word in enumerate(self.vertex_words):
            if word not in cache:
                cache[word] = rep.lorentz(word)
            frames[v] = cache[word]
        return frames

    def edge_list(self) -> np.ndarray:
        """One (face, local edge) per identified edge, shape (E, 2)."""
        neighbors = self.edge_neighbors
        own = np.arange(3 * self.n_faces)
        other = 3 * neighbors[:, :, 0].ravel() + neighbors[:, :, 1].ravel()
        keep = own < other
        return np.column_stack([own[keep] // 3, own[keep] % 3])


def _subdivide(points: List[np.ndarray], faces: List[Tuple[int, int, int]]) -> List[Tuple[int, int, int]]:
    midpoints: Dict[Tuple[int, int], int] = {}

    def mid(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in midpoints:
            midpoints[key] = len(points)
            points.append(hyperboloid.midpoint(points[i], points[j]))
        return midpoints[key]

    refined = []
    for p, q, r in faces:
        a, b, c = mid(p, q), mid(q, r), mid(r, p)
        refined.extend([(p, a, c), (q, b, a), (r, c, b), (a, b, c)])
    return refined


def _side_links(points: np.ndarray, rep: SurfaceGroupRep) -> Tuple[np.ndarray, List[str]]:
    tree = cKDTree(points)
    links, letters = [], []
    for letter in "aAbBcCdD":
        images = points @ rep.lorentz(letter).T
        distances, index = tree.query(images, distance_upper_bound=MATCH_TOL)
        for v in np.nonzero(np.isfinite(distances))[0]:
            links.append((int(v), int(index[v])))
            letters.append(letter)
    return np.array(links, dtype=int).reshape(-1, 2), letters


def _identify(n: int, links: np.ndarray, letters: List[str]) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    parent = list(range(n))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for v, u in links:
        rv, ru = find(v), find(u)
        if rv != ru:
            parent[max(rv, ru)] = min(rv, ru)

    roots = np.array([find(v) for v in range(n)])
    representatives = np.unique(roots)
    class_of_root = {int(r): i for i, r in enumerate(representatives)}
    vertex_class = np.array([class_of_root[int(r)] for r in roots])

    adjacency: Dict[int, List[Tuple[int, str]]] = defaultdict(list)
    for (v, u), letter in zip(links, letters):
        adjacency[int(v)].append((int(u), letter))
    words: List[Optional[str]] = [None] * n
    for root in representatives:
        words[root] = ""
        queue = deque([int(root)])
        while queue:
            v = queue.popleft()
            for u, letter in adjacency[v]:
                if words[u] is None:
                    words[u] = free_reduce(letter + words[v])
                    queue.append(u)
    return vertex_class, representatives, [w or "" for w in words]


def _edge_neighbors(faces: np.ndarray, links: np.ndarray, letters: List[str]) -> np.ndarray:
    directed: Dict[Tuple[int, int], Tuple[int, int]] = {}
    for f, tri in enumerate(faces):
        for k in range(3):
            directed[(int(tri[k]), int(tri[(k + 1) % 3]))] = (f, k)
    image: Dict[int, Dict[str, int]] = defaultdict(dict)
    for (v, u), letter in zip(links, letters):
        image[int(v)][letter] = int(u)

    neighbors = -np.ones((len(faces), 3, 2), dtype=int)
    for (p, q), (f, k) in directed.items():
        if (q, p) in directed:
            neighbors[f, k] = directed[(q, p)]
            continue
        for letter in sorted(image[p].keys() & image[q].keys()):
            partner = (image[q][letter], image[p][letter])
            if partner in directed:
                neighbors[f, k] = directed[partner]
                break
        else:
            raise StructureMismatch(f"Boundary edge {(p, q)} of face {f} has no partner")
    return neighbors


def build_octagon_surface(subdivision_level: int) -> Tuple[TriSurface, MetricField]:
    """Regular octagon genus-2 surface, split 1-to-4 at geodesic midpoints per level."""
    if not 0 <= subdivision_level <= MAX_LEVEL:
        raise OutOfRange(f"subdivision_level must lie in 0..{MAX_LEVEL}, got {subdivision_level}")
    rep = octagon_rep()
    points = [hyperboloid.from_upper(1j)] + [hyperboloid.from_upper(octagon_vertex(k)) for k in range(8)]
    faces = [(0, k + 1, (k + 1) % 8 + 1) for k in range(8)]
    for _ in range(subdivision_level):
        faces = _subdivide(points, faces)

    point_array = np.array(points)
    face_array = np.array(faces, dtype=int)
    links, letters = _side_links(point_array, rep)
    vertex_class, representatives, words = _identify(len(point_array), links, letters)
    surface = TriSurface(
        points=point_array,
        faces=face_array,
        vertex_class=vertex_class,
        class_representatives=representatives,
        vertex_words=words,
        links=links,
        link_letters=letters,
        edge_neighbors=_edge_neighbors(face_array, links, letters),
        rep=rep,
        level=subdivision_level,
    )
    if surface.euler_characteristic != 2 - 2 * surface.genus:
        raise StructureMismatch(f"Octagon mesh has Euler characteristic {surface.euler_characteristic}")
    metric = exact_metric(surface)
    surface.transition_angles = edge_transition_angles(surface, metric)
    logger.info(
        f"Built octagon surface level {subdivision_level}: "
        f"{surface.n_classes} vertices, {surface.n_edges} edges, {surface.n_faces} faces"
    )
    return surface, metric


def exact_metric(surface: TriSurface) -> MetricField:
    """Per-face Gram matrices from the geodesic edge lengths of the cut mesh."""
    P = surface.points[surface.faces]
    lengths = np.column_stack([hyperboloid.distance(P[:, k], P[:, (k + 1) % 3]) for k in range(3)])
    return MetricField.from_edge_lengths_sq(lengths ** 2)


def edge_length_mismatch(surface: TriSurface, metric: MetricField) -> float:
    """Largest disagreement of an edge length seen from its two faces."""
    lengths = metric.edge_lengths()
    neighbors = surface.edge_neighbors
    other = lengths[neighbors[:, :, 0], neighbors[:, :, 1]]
    return float(np.abs(lengths - other).max())


def face_angles(metric: MetricField, background: Background = Background.HYPERBOLIC) -> np.ndarray:
    """Interior angle at each local vertex, shape (F, 3)."""
    lengths = metric.edge_lengths()
    for f, (a, b, c) in enumerate(lengths):
        if min(a, b, c) <= 0 or a >= b + c or b >= a + c or c >= a + b:
            raise DegenerateFace("triangle inequality fails", face=f)
    angles = np.empty_like(lengths)
    for k in range(3):
        # vertex k sits between edges k and k - 1, opposite edge k + 1
        x, y, opposite = lengths[:, k], lengths[:, (k - 1) % 3], lengths[:, (k + 1) % 3]
        if background is Background.HYPERBOLIC:
            cosine = (np.cosh(x) * np.cosh(y) - np.cosh(opposite)) / (np.sinh(x) * np.sinh(y))
        else:
            cosine = (x * x + y * y - opposite * opposite) / (2 * x * y)
        angles[:, k] = np.arccos(np.clip(cosine, -1.0, 1.0))
    return angles


def face_areas(metric: MetricField, background: Background = Background.HYPERBOLIC) -> np.ndarray:
    if background is Background.HYPERBOLIC:
        return math.pi - face_angles(metric, background).sum(axis=1)
    return 0.5 * np.sqrt(metric.det())


def discrete_curvature(
    surface: TriSurface, metric: MetricField, background: Background = Background.HYPERBOLIC
) -> np.ndarray:
    """Angle defect 2 pi - sum of corner angles, per identified vertex."""
    angles = face_angles(metric, background)
    totals = np.zeros(surface.n_classes)
    np.add.at(totals, surface.vertex_class[surface.faces].ravel(), angles.ravel())
    return 2 * math.pi - totals


def total_curvature(
    surface: TriSurface, metric: MetricField, background: Background = Background.HYPERBOLIC
) -> float:
    """Concentrated plus smooth curvature: sum of defects minus area for the hyperbolic background."""
    defects = discrete_curvature(surface, metric, background).sum()
    if background is Background.HYPERBOLIC:
        return float(defects - face_areas(metric, background).sum())
    return float(defects)


def _frame_factors(metric: MetricField) -> np.ndarray:
    """Upper-triangular O with O^T O = G per face."""
    return np.transpose(np.linalg.cholesky(metric.matrices()), (0, 2, 1))


def edge_transition_angles(surface: TriSurface, metric: MetricField) -> np.ndarray:
    """Rotation angle taking the neighbor's orthonormal frame into this face's, shape (F, 3)."""
    O = _frame_factors(metric)
    neighbors = surface.edge_neighbors
    angles = np.empty((surface.n_faces, 3))
    for k in range(3):
        own = O @ EDGE_VECTORS[k]
        g, j = neighbors[:, k, 0], neighbors[:, k, 1]
        theirs = -np.einsum("fij,fj->fi", O[g], EDGE_VECTORS[j])
        angles[:, k] = np.arctan2(own[:, 1], own[:, 0]) - np.arctan2(theirs[:, 1], theirs[:, 0])
    return angles


def _wrap(angle: np.ndarray) -> np.ndarray:
    return np.mod(angle + math.pi, 2 * math.pi) - math.pi


def vertex_holonomy(surface: TriSurface, metric: MetricField) -> np.ndarray:
    """Total transition rotation around each identified vertex, wrapped to [-pi, pi)."""
    psi = edge_transition_angles(surface, metric)
    holonomy = np.zeros(surface.n_classes)
    visited = np.zeros((surface.n_faces, 3), dtype=bool)
    for f in range(surface.n_faces):
        for k in range(3):
            if visited[f, k]:
                continue
            total, corner = 0.0, (f, k)
            while not visited[corner]:
                visited[corner] = True
                total += psi[corner]
                g, j = surface.edge_neighbors[corner]
                corner = (int(g), (int(j) + 1) % 3)
            holonomy[surface.vertex_class[surface.faces[f, k]]] = total
    return _wrap(holonomy)


def codazzi_residual(surface: TriSurface, metric: MetricField, ops: OperatorField) -> np.ndarray:
    """Frobenius mismatch of b transported across each identified edge, shape (E,)."""
    O = _frame_factors(metric)
    frame_ops = O @ ops.matrices() @ np.linalg.inv(O)
    psi = edge_transition_angles(surface, metric)
    edges = surface.edge_list()
    f, k = edges[:, 0], edges[:, 1]
    g = surface.edge_neighbors[f, k, 0]
    c, s = np.cos(psi[f, k]), np.sin(psi[f, k])
    R = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)
    transported = R @ frame_ops[g] @ np.transpose(R, (0, 2, 1))
    return np.linalg.norm(frame_ops[f] - transported, axis=(1, 2))


def landslide_field(
    surface: TriSurface, h: MetricField, b: OperatorField, theta: float
) -> Tuple[MetricField, MetricField]:
    """Face-by-face landslide of the pair (h, h(b., b.))."""
    if h.n_faces != surface.n_faces or b.n_faces != surface.n_faces:
        raise StructureMismatch("Fields do not match the surface")
    first, second = [], []
    for f in range(surface.n_faces):
        h_theta, h_theta_star = landslide_point(h.face(f), b.face(f), theta)
        first.append(h_theta.to_tuple())
        second.append(h_theta_star.to_tuple())
    return MetricField(np.array(first)), MetricField(np.array(second))


def pushed_field(h: MetricField, b: OperatorField) -> MetricField:
    """h(b., b.) per face."""
    return MetricField(np.array([push_metric(h.face(f), b.face(f)).to_tuple() for f in range(h.n_faces)]))


def center_field(h: MetricField, b: OperatorField) -> MetricField:
    return h + pushed_field(h, b)


def _bump_stretch(z: complex, direction: complex, epsilon: float, radius: float) -> float:
    """Hyperbolic stretch of psi(z) = z (1 + epsilon phi(|z|)) along direction, phi a cubic bump."""
    r2 = abs(z) ** 2
    inside = r2 < radius * radius
    bump = (1 - r2 / radius**2) ** 3 if inside else 0.0
    slope = -6 * epsilon / radius**2 * (1 - r2 / radius**2) ** 2 if inside else 0.0
    image = z * (1 + epsilon * bump)
    # d psi(u) = (1 + eps phi) u + z * (d phi / d r^2) * 2 Re(conj(z) u)
    differential = (1 + epsilon * bump) * direction + z * slope * 2 * (z.conjugate() * direction).real
    density = 2 / (1 - r2)
    image_density = 2 / (1 - abs(image) ** 2)
    return image_density * abs(differential) / (density * abs(direction))


def synthetic_operator_field(
    surface: TriSurface, metric: MetricField, epsilon: float = 0.1, radius: float = 0.5
) -> Tuple[OperatorField, MetricField]:
    """Operator field of a smooth radial bump deformation supported inside the octagon.

    Each edge length is scaled by the stretch of the deformation at the edge midpoint;
    b is the square root taking the metric to the stretched one (not det-normalized).
    """
    P = surface.points[surface.faces]
    lengths = metric.edge_lengths()
    stretched = np.empty_like(lengths)
    for f in range(surface.n_faces):
        for k in range(3):
            p, q = P[f, k], P[f, (k + 1) % 3]
            z = complex(hyperboloid.to_disk(hyperboloid.midpoint(p, q)))
            direction = complex(hyperboloid.to_disk(q) - hyperboloid.to_disk(p))
            stretched[f, k] = lengths[f, k] * _bump_stretch(z, direction, epsilon, radius)
    target = MetricField.from_edge_lengths_sq(stretched ** 2)
    ops = [operator_sqrt(metric.face(f), target.face(f)) for f in range(surface.n_faces)]
    return OperatorField.from_samples(ops), target


def trace_mass(
    h: MetricField, b: OperatorField, region: Optional[Sequence[int]] = None, theta: float = 1.0
) -> float:
    """theta * sum of tr(b) times the hyperbolic face area over the region (all faces if None)."""
    weights = b.traces() * face_areas(h)
    if region is None:
        return float(theta * weights.sum())
    index = np.asarray(list(region), dtype=int)
    return float(theta * weights[index].sum()) if index.size else 0.0


def edge_graph(surface: TriSurface, lengths: np.ndarray) -> csr_matrix:
    """Sparse cut-mesh graph weighted by per-face edge lengths (F, 3)."""
    rows = np.concatenate([surface.faces[:, k] for k in range(3)])
    cols = np.concatenate([surface.faces[:, (k + 1) % 3] for k in range(3)])
    weights = np.concatenate([lengths[:, k] for k in range(3)])
    n = surface.n_vertices
    return csr_matrix((weights, (rows, cols)), shape=(n, n))


def shortest_path_length(surface: TriSurface, lengths: np.ndarray, start: int, end: int) -> float:
    distances = dijkstra(edge_graph(surface, lengths), directed=False, indices=start)
    return float(distances[end])


def mesh_curve_length(surface: TriSurface, metric: MetricField, letter: str) -> float:
    """Approximate length of the closed curve of a side pairing.

    Shortest cut-mesh path from a vertex on the paired side to its image, minimized
    over the vertices of that side.
    """
    if letter not in INVERSE:
        raise OutOfRange(f"Unknown side pairing {letter!r}")
    pairs = [(v, u) for (v, u), x in zip(surface.links, surface.link_letters) if x == letter]
    if not pairs:
        raise StructureMismatch(f"No vertices are paired by {letter!r}")
    sources = np.array(sorted({v for v, _ in pairs}))
    distances = dijkstra(edge_graph(surface, metric.edge_lengths()), directed=False, indices=sources)
    row = {v: i for i, v in enumerate(sources)}
    return float(min(distances[row[v], u] for v, u in pairs))
