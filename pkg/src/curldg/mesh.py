"""Oriented simplicial meshes of axis-aligned boxes, with facet adjacency.

Mesh data is stored struct-of-arrays.  For every facet a fixed unit normal is
stored; it is the outward normal of the "plus" element, and the plus element
is always the one with the lower element index, so orientation-dependent
quantities are reproducible.  Meshes are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import factorial

import numpy as np

from .quadrature import map_to_simplex, simplex_measure, simplex_rule


class MeshError(Exception):
    """Invalid mesh topology, geometry or boundary configuration."""


class FacetClass(Enum):
    INTERIOR = "interior"
    DIRICHLET_INFLOW = "dirichlet_inflow"
    DIRICHLET_OUTFLOW = "dirichlet_outflow"
    NEUMANN_INFLOW = "neumann_inflow"
    NEUMANN_OUTFLOW = "neumann_outflow"

    @property
    def is_dirichlet(self) -> bool:
        return self in (FacetClass.DIRICHLET_INFLOW, FacetClass.DIRICHLET_OUTFLOW)

    @property
    def is_neumann(self) -> bool:
        return self in (FacetClass.NEUMANN_INFLOW, FacetClass.NEUMANN_OUTFLOW)

    @property
    def is_inflow(self) -> bool:
        return self in (FacetClass.DIRICHLET_INFLOW, FacetClass.NEUMANN_INFLOW)


@dataclass(frozen=True)
class BoundaryTag:
    facet: int
    cls: FacetClass


class SimplicialMesh:
    """Conforming simplicial mesh (triangles for dim=2, tetrahedra for dim=3).

    Attributes
    ----------
    vertices : (nv, dim) float array
    elements : (ne, dim+1) int array, positively oriented
    facet_vertices : (nf, dim) int array
    facet_plus, facet_minus : (nf,) int arrays; minus = -1 on the boundary
    facet_normal : (nf, dim); unit, outward from the plus element
    facet_area, facet_diameter : (nf,)
    elem_volume, elem_diameter : (ne,)
    elem_to_facets : (ne, dim+1); entry j is the facet opposite local vertex j
    """

    def __init__(self, vertices, elements, _locator=None):
        vertices = np.asarray(vertices, dtype=float)
        elements = np.asarray(elements, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] not in (2, 3):
            raise MeshError("vertices must be (nv, 2) or (nv, 3)")
        self.dim = vertices.shape[1]
        if elements.ndim != 2 or elements.shape[1] != self.dim + 1:
            raise MeshError(f"elements must be (ne, {self.dim + 1})")
        self.vertices = vertices
        self.elements = elements
        self.n_elements = elements.shape[0]
        self._locator = _locator

        coords = vertices[elements]  # (ne, d+1, d)
        v0 = coords[:, 0, :]
        edges = coords[:, 1:, :] - v0[:, None, :]
        det = np.linalg.det(edges)
        if np.any(det <= 0):
            bad = int(np.argmax(det <= 0))
            raise MeshError(f"element {bad} has non-positive signed volume")
        self.elem_volume = det / factorial(self.dim)
        self.elem_centroid = coords.mean(axis=1)
        diffs = coords[:, :, None, :] - coords[:, None, :, :]
        self.elem_diameter = np.sqrt((diffs**2).sum(-1)).max(axis=(1, 2))

        self._build_facets()

    # -- construction ---------------------------------------------------

    def _build_facets(self):
        d = self.dim
        seen: dict[tuple, tuple[int, int]] = {}
        f_verts, f_plus, f_minus, f_lplus, f_lminus = [], [], [], [], []
        elem_to_facets = np.full((self.n_elements, d + 1), -1, dtype=np.int64)
        local_faces = [
            tuple(j for j in range(d + 1) if j != i) for i in range(d + 1)
        ]
        for e in range(self.n_elements):
            elem = self.elements[e]
            for loc, face in enumerate(local_faces):
                vids = tuple(sorted(int(elem[j]) for j in face))
                if vids in seen:
                    fid, _ = seen[vids]
                    if f_minus[fid] != -1:
                        raise MeshError(f"facet {vids} shared by >2 elements")
                    f_minus[fid] = e
                    f_lminus[fid] = loc
                    elem_to_facets[e, loc] = fid
                else:
                    fid = len(f_verts)
                    seen[vids] = (fid, e)
                    f_verts.append(vids)
                    f_plus.append(e)
                    f_minus.append(-1)
                    f_lplus.append(loc)
                    f_lminus.append(-1)
                    elem_to_facets[e, loc] = fid
        self.facet_vertices = np.array(f_verts, dtype=np.int64)
        self.facet_plus = np.array(f_plus, dtype=np.int64)
        self.facet_minus = np.array(f_minus, dtype=np.int64)
        self.facet_local_plus = np.array(f_lplus, dtype=np.int64)
        self.facet_local_minus = np.array(f_lminus, dtype=np.int64)
        self.elem_to_facets = elem_to_facets
        self.n_facets = len(f_verts)

        fc = self.vertices[self.facet_vertices]  # (nf, d, d)
        self.facet_centroid = fc.mean(axis=1)
        if d == 2:
            t = fc[:, 1] - fc[:, 0]
            self.facet_area = np.linalg.norm(t, axis=1)
            raw = np.column_stack([t[:, 1], -t[:, 0]])
            self.facet_diameter = self.facet_area.copy()
        else:
            e1 = fc[:, 1] - fc[:, 0]
            e2 = fc[:, 2] - fc[:, 0]
            raw = np.cross(e1, e2)
            self.facet_area = 0.5 * np.linalg.norm(raw, axis=1)
            d01 = np.linalg.norm(e1, axis=1)
            d02 = np.linalg.norm(e2, axis=1)
            d12 = np.linalg.norm(fc[:, 2] - fc[:, 1], axis=1)
            self.facet_diameter = np.maximum(np.maximum(d01, d02), d12)
        normal = raw / np.linalg.norm(raw, axis=1)[:, None]
        # orient outward from the plus element
        outward = self.facet_centroid - self.elem_centroid[self.facet_plus]
        flip = (normal * outward).sum(axis=1) < 0
        normal[flip] *= -1.0
        self.facet_normal = normal

        self.interior_facets = np.nonzero(self.facet_minus >= 0)[0]
        self.boundary_facets = np.nonzero(self.facet_minus < 0)[0]

    # -- queries ---------------------------------------------------------

    def element_coords(self, e: int) -> np.ndarray:
        return self.vertices[self.elements[e]]

    def facet_coords(self, f: int) -> np.ndarray:
        return self.vertices[self.facet_vertices[f]]

    def total_volume(self) -> float:
        return float(self.elem_volume.sum())

    def boundary_area(self) -> float:
        return float(self.facet_area[self.boundary_facets].sum())

    def locate(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Element id containing each point (-1 if outside).

        Uses the uniform-grid structure when the mesh was built by one of the
        constructors below; otherwise falls back to a per-point scan.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(points.shape[0], -1, dtype=np.int64)
        if self._locator is not None:
            candidates = self._locator(points)
        else:
            candidates = [range(self.n_elements)] * points.shape[0]
        for i, cand in enumerate(candidates):
            for e in cand:
                if self._contains(e, points[i], tol):
                    out[i] = e
                    break
        return out

    def _contains(self, e: int, x: np.ndarray, tol: float) -> bool:
        coords = self.element_coords(e)
        A = (coords[1:] - coords[0]).T
        lam = np.linalg.solve(A, x - coords[0])
        return bool(lam.min() >= -tol and lam.sum() <= 1 + tol)

    def dump_text(self) -> str:
        """Plain-text vertex/element/facet listing for debugging."""
        lines = [f"dim {self.dim}", f"vertices {len(self.vertices)}"]
        for v in self.vertices:
            lines.append(" ".join(f"{c:.16g}" for c in v))
        lines.append(f"elements {self.n_elements}")
        for el in self.elements:
            lines.append(" ".join(str(i) for i in el))
        lines.append(f"facets {self.n_facets}")
        for f in range(self.n_facets):
            verts = " ".join(str(i) for i in self.facet_vertices[f])
            n = " ".join(f"{c:.16g}" for c in self.facet_normal[f])
            lines.append(
                f"{verts} plus {self.facet_plus[f]} minus {self.facet_minus[f]} n {n}"
            )
        return "\n".join(lines) + "\n"


def _grid_locator(n, lo, hi, cell_elems):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def locator(points):
        rel = (points - lo) / (hi - lo) * n
        idx = np.clip(np.floor(rel).astype(int), 0, n - 1)
        return [cell_elems[tuple(ij)] for ij in idx]

    return locator


def build_uniform_mesh(dim: int, n: int, lo=0.0, hi=1.0) -> SimplicialMesh:
    """Uniform simplicial mesh of an axis-aligned box with n cells per axis.

    2D: each square is split into two triangles by the (lo,lo)-(hi,hi)
    diagonal.  3D: each cube is split into six tetrahedra sharing the main
    diagonal (Kuhn split), which keeps facets conforming across cubes.
    """
    if dim not in (2, 3):
        raise MeshError(f"dim must be 2 or 3, got {dim}")
    if n < 1:
        raise MeshError(f"cells per axis must be >= 1, got {n}")
    lo = np.full(dim, lo, dtype=float) if np.isscalar(lo) else np.asarray(lo, float)
    hi = np.full(dim, hi, dtype=float) if np.isscalar(hi) else np.asarray(hi, float)
    if np.any(hi <= lo):
        raise MeshError("degenerate box: hi must exceed lo on every axis")

    axes = [np.linspace(lo[a], hi[a], n + 1) for a in range(dim)]
    if dim == 2:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        verts = np.column_stack([X.ravel(), Y.ravel()])

        def vid(i, j):
            return i * (n + 1) + j

        elems = []
        cell_elems = {}
        for i in range(n):
            for j in range(n):
                a, b = vid(i, j), vid(i + 1, j)
                c, d_ = vid(i + 1, j + 1), vid(i, j + 1)
                cell_elems[(i, j)] = [len(elems), len(elems) + 1]
                elems.append((a, b, c))
                elems.append((a, c, d_))
        locator = _grid_locator(n, lo, hi, cell_elems)
        return SimplicialMesh(verts, np.array(elems), _locator=locator)

    X, Y, Z = np.meshgrid(axes[0], axes[1], axes[2], indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def vid3(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    # Kuhn split: one tet per permutation of the axes, all sharing the
    # main diagonal of the cube.
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    elems = []
    cell_elems = {}
    for i in range(n):
        for j in range(n):
            for k in range(n):
                base = np.array([i, j, k])
                ids = []
                for p in perms:
                    corner = base.copy()
                    tet = [vid3(*corner)]
                    for axis in p:
                        corner = corner.copy()
                        corner[axis] += 1
                        tet.append(vid3(*corner))
                    v = verts[tet]
                    if np.linalg.det((v[1:] - v[0]).T) < 0:
                        tet[2], tet[3] = tet[3], tet[2]
                    ids.append(len(elems))
                    elems.append(tuple(tet))
                cell_elems[(i, j, k)] = ids
    locator = _grid_locator(n, lo, hi, cell_elems)
    return SimplicialMesh(verts, np.array(elems), _locator=locator)


def build_slit_mesh(n: int, slit_x: float = 0.5, slit_ymax: float = 0.5) -> SimplicialMesh:
    """Uniform unit-square mesh torn along the segment {x=slit_x, y<=slit_ymax}.

    Vertices on the open slit are duplicated and elements right of the slit
    are remapped to the copies, so slit facets appear twice as boundary
    facets (one per side).  n must be even so the slit lies on mesh lines.
    """
    if n < 2 or n % 2 != 0:
        raise MeshError("slit mesh needs an even number of cells per axis")
    base = build_uniform_mesh(2, n)
    verts = base.vertices.copy()
    elems = base.elements.copy()
    tol = 1e-12
    on_slit = (np.abs(verts[:, 0] - slit_x) < tol) & (verts[:, 1] < slit_ymax - tol)
    dup_ids = np.nonzero(on_slit)[0]
    dup_map = {}
    new_verts = [verts]
    for idx, v in enumerate(dup_ids):
        dup_map[int(v)] = len(verts) + idx
    new_verts.append(verts[dup_ids])
    verts = np.vstack(new_verts)
    centroids = base.elem_centroid
    for e in range(elems.shape[0]):
        if centroids[e, 0] > slit_x:
            for j in range(3):
                if int(elems[e, j]) in dup_map:
                    elems[e, j] = dup_map[int(elems[e, j])]
    return SimplicialMesh(verts, elems, _locator=base._locator)


def classify_boundary(mesh: SimplicialMesh, problem) -> list[BoundaryTag]:
    """Tag every facet by Dirichlet/Neumann and inflow/outflow.

    The Dirichlet predicate is evaluated at interior points of each boundary
    facet (quadrature points plus centroid) and must be unambiguous there.
    The inflow sign is beta . n at the facet centroid; zero counts as
    outflow.
    """
    tags = [BoundaryTag(int(f), FacetClass.INTERIOR) for f in range(mesh.n_facets)]
    if len(mesh.boundary_facets) == 0:
        return tags
    rule = simplex_rule(mesh.dim - 1, 2)
    for f in mesh.boundary_facets:
        f = int(f)
        coords = mesh.facet_coords(f)
        pts, _ = map_to_simplex(rule, coords)
        probe = np.vstack([pts, mesh.facet_centroid[f][None, :]])
        is_d = np.asarray(problem.dirichlet(probe), dtype=bool)
        if is_d.all():
            dirichlet = True
        elif (~is_d).all():
            dirichlet = False
        else:
            raise MeshError(
                f"Dirichlet/Neumann predicate ambiguous on boundary facet {f} "
                f"at {mesh.facet_centroid[f]}"
            )
        bc = problem.beta(mesh.facet_centroid[f][None, :])[0]
        inflow = float(bc @ mesh.facet_normal[f]) < 0.0
        if dirichlet:
            cls = FacetClass.DIRICHLET_INFLOW if inflow else FacetClass.DIRICHLET_OUTFLOW
        else:
            cls = FacetClass.NEUMANN_INFLOW if inflow else FacetClass.NEUMANN_OUTFLOW
        tags[f] = BoundaryTag(f, cls)
    return tags


@dataclass
class StarFacets:
    """Per-element facet where |beta . n| dominates the facet sup of |beta|."""

    facet: np.ndarray  # (ne,) facet id, -1 when beta vanishes on all facets
    ratio: np.ndarray  # (ne,) attained min|beta.n| / max|beta|_inf
    flagged: np.ndarray  # (ne,) bool, ratio below the requested threshold

    @property
    def worst_ratio(self) -> float:
        return float(self.ratio.min()) if len(self.ratio) else float("nan")


def star_facets(mesh: SimplicialMesh, beta, c_beta: float = 20.0,
                quad_degree: int = 4) -> StarFacets:
    """Select, per element, the facet maximizing min |beta.n| / max |beta|_inf.

    ``beta`` is a batched callable (N, dim) -> (N, dim); ``c_beta`` sets the
    flagging threshold ratio < 1/c_beta (normal-domination violated).
    """
    if c_beta <= 0:
        raise ValueError("c_beta must be positive")
    rule = simplex_rule(mesh.dim - 1, quad_degree)
    ne = mesh.n_elements
    best_f = np.full(ne, -1, dtype=np.int64)
    best_r = np.zeros(ne)
    for e in range(ne):
        for f in mesh.elem_to_facets[e]:
            coords = mesh.facet_coords(int(f))
            pts, _ = map_to_simplex(rule, coords)
            b = np.asarray(beta(pts))
            sup = np.abs(b).max()
            if sup == 0.0:
                continue
            r = np.abs(b @ mesh.facet_normal[int(f)]).min() / sup
            if best_f[e] < 0 or r > best_r[e]:
                best_f[e] = int(f)
                best_r[e] = r
    flagged = (best_r < 1.0 / c_beta) | (best_f < 0)
    return StarFacets(best_f, best_r, flagged)
