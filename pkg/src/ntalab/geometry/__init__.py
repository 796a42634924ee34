from .mesh import BoundaryMesh, DomainError, MeshError, Side, SurfaceBall
from .frame import Cone, Frame, GeometryError, build_frame, side_length


def inside_test(mesh: BoundaryMesh, p, tol: float | None = None) -> Side:
    return mesh.inside_test(p, tol)


def distance_to_boundary(mesh: BoundaryMesh, p) -> float:
    import numpy as np
    return float(mesh.distance(np.asarray(p, dtype=float)[None, :])[0])


def surface_ball(mesh: BoundaryMesh, Q, r: float) -> SurfaceBall:
    return mesh.surface_ball(Q, r)


__all__ = [
    "BoundaryMesh", "Cone", "DomainError", "Frame", "GeometryError", "MeshError", "Side",
    "SurfaceBall", "build_frame", "distance_to_boundary", "inside_test", "side_length",
    "surface_ball",
]
