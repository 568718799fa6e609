"""
JSON persistence for triangulated surfaces and their per-face fields.
"""
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from app.core.errors import StructureMismatch
from app.geometry.holonomy import SurfaceGroupRep
from app.geometry.mesh_surface import MetricField, OperatorField, TriSurface

logger = logging.getLogger("landslide")

FORMAT_VERSION = 1


class MeshDocument(BaseModel):
    """On-disk layout of a surface; arrays are nested lists."""
    format_version: Literal[1] = FORMAT_VERSION
    level: int
    genus: int
    points: List[List[float]]
    faces: List[List[int]]
    vertex_class: List[int]
    class_representatives: List[int]
    vertex_words: List[str]
    links: List[List[int]]
    link_letters: List[str]
    edge_neighbors: List[List[List[int]]]
    transition_angles: Optional[List[List[float]]] = None
    rep: Optional[dict] = None
    metric: Optional[List[List[float]]] = None
    operators: Optional[List[List[float]]] = None


def save_surface(
    path: Union[str, Path],
    surface: TriSurface,
    metric: Optional[MetricField] = None,
    ops: Optional[OperatorField] = None,
):
    """Write a surface and optional metric and operator fields as JSON."""
    document = MeshDocument(
        level=surface.level,
        genus=surface.genus,
        points=surface.points.tolist(),
        faces=surface.faces.tolist(),
        vertex_class=surface.vertex_class.tolist(),
        class_representatives=np.asarray(surface.class_representatives).tolist(),
        vertex_words=list(surface.vertex_words),
        links=surface.links.tolist(),
        link_letters=list(surface.link_letters),
        edge_neighbors=surface.edge_neighbors.tolist(),
        transition_angles=None if surface.transition_angles is None else surface.transition_angles.tolist(),
        rep=None if surface.rep is None else surface.rep.to_dict(),
        metric=None if metric is None else metric.gram.tolist(),
        operators=None if ops is None else ops.ops.tolist(),
    )
    Path(path).write_text(document.model_dump_json())
    logger.info(f"Saved surface with {surface.n_faces} faces to {path}")


def load_surface(path: Union[str, Path]) -> Tuple[TriSurface, Optional[MetricField], Optional[OperatorField]]:
    try:
        document = MeshDocument.model_validate_json(Path(path).read_text())
    except ValidationError as exc:
        raise StructureMismatch(f"Unreadable mesh file {path}: {exc}") from exc
    surface = TriSurface(
        points=np.array(document.points, dtype=float),
        faces=np.array(document.faces, dtype=int),
        vertex_class=np.array(document.vertex_class, dtype=int),
        class_representatives=np.array(document.class_representatives, dtype=int),
        vertex_words=document.vertex_words,
        links=np.array(document.links, dtype=int).reshape(-1, 2),
        link_letters=document.link_letters,
        edge_neighbors=np.array(document.edge_neighbors, dtype=int),
        rep=None if document.rep is None else SurfaceGroupRep.from_dict(document.rep),
        level=document.level,
        genus=document.genus,
        transition_angles=None if document.transition_angles is None else np.array(document.transition_angles),
    )
    metric = None if document.metric is None else MetricField(np.array(document.metric))
    ops = None if document.operators is None else OperatorField(np.array(document.operators))
    return surface, metric, ops
