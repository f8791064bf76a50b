"""Admissible cell-centered meshes of plane polygonal domains.

Two-point flux approximation needs each interior edge to be orthogonal to
the segment joining the two cell points, with the points strictly on
opposite sides.  Construction verifies this and rejects violating meshes
with the offending edge named.  Boundary edges carry no flux, so their
cell-point distance may be zero (a right triangle with its circumcenter on
the hypotenuse is fine alone, but pairing two of them across the hypotenuse
gives coincident points and is rejected).

Mesh file format (plain text, ``#`` comments and blank lines ignored)::

    nv nc has_cell_points
    x y            <- nv vertex lines
    m v1 ... vm    <- nc cell lines, 0-based vertex ids, counterclockwise
    x y            <- nc cell-point lines, only if has_cell_points is 1

Without explicit cell points, triangles get their circumcenter and other
polygons their area centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: cos of the allowed angle between an interior edge and the cell-point segment
ORTHOGONALITY_TOL = 1e-10


class MeshError(ValueError):
    """Malformed mesh data or a failed admissibility check."""


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _centroid(pts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(np.sum(cross))
    cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
    return np.array([cx, cy])


def triangle_circumcenter(a, b, c) -> np.ndarray:
    """Center of the circle through three points."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    den = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    scale = max(abs(ax - cx), abs(ay - cy), abs(bx - cx), abs(by - cy), 1e-300)
    if abs(den) <= 1e-12 * scale * scale:
        raise MeshError("degenerate triangle: collinear vertices")
    a2 = ax * ax + ay * ay
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / den
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / den
    return np.array([ux, uy])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Polygonal cells, their points, and precomputed edge geometry.

    Interior-edge arrays (``int_*``) and the fixed Jacobian sparsity pattern
    (``jac_rows``/``jac_cols``) are laid out for the assembly kernels: the
    pattern starts with the 2*n_cells diagonal entries, then 16 blocks of one
    entry per interior edge, rows (2K, 2K+1, 2L, 2L+1) x columns in the same
    cycle, columns fastest.
    """

    vertices: np.ndarray
    cells: tuple
    cell_points: np.ndarray
    cell_measures: np.ndarray
    edge_vertices: np.ndarray
    edge_cells: np.ndarray
    edge_measures: np.ndarray
    edge_dK: np.ndarray
    edge_dL: np.ndarray
    int_K: np.ndarray
    int_L: np.ndarray
    int_measure: np.ndarray
    int_dK: np.ndarray
    int_dL: np.ndarray
    jac_rows: np.ndarray
    jac_cols: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return self.edge_vertices.shape[0]

    @property
    def n_interior_edges(self) -> int:
        return self.int_K.shape[0]

    @property
    def n_boundary_edges(self) -> int:
        return self.n_edges - self.n_interior_edges

    @property
    def total_measure(self) -> float:
        return float(self.cell_measures.sum())


def _jacobian_pattern(n_cells, int_K, int_L):
    rows = [np.arange(2 * n_cells, dtype=np.int64)]
    cols = [np.arange(2 * n_cells, dtype=np.int64)]
    rK, rL = 2 * int_K, 2 * int_L
    cycle = (rK, rK + 1, rL, rL + 1)
    for row in cycle:
        for col in cycle:
            rows.append(row)
            cols.append(col)
    return np.concatenate(rows), np.concatenate(cols)


def build_mesh(vertices, cells, cell_points=None) -> "Mesh":
    """Assemble and verify a mesh from polygon soup.

    ``vertices`` is (nv, 2); ``cells`` lists counterclockwise vertex-id
    tuples; ``cell_points`` overrides the per-cell defaults (circumcenter
    for triangles, centroid otherwise).
    """
    verts = np.asarray(vertices, dtype=np.float64)
    if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
        raise MeshError("vertices must be an (nv >= 3, 2) array")
    if not np.all(np.isfinite(verts)):
        raise MeshError("non-finite vertex coordinates")
    cell_tuples = []
    for ci, cell in enumerate(cells):
        ids = tuple(int(v) for v in cell)
        if len(ids) < 3 or len(set(ids)) != len(ids):
            raise MeshError(f"cell {ci}: needs at least 3 distinct vertices")
        if min(ids) < 0 or max(ids) >= verts.shape[0]:
            raise MeshError(f"cell {ci}: vertex id out of range")
        cell_tuples.append(ids)
    if not cell_tuples:
        raise MeshError("mesh has no cells")

    nc = len(cell_tuples)
    measures = np.empty(nc)
    points = np.empty((nc, 2))
    for ci, ids in enumerate(cell_tuples):
        pts = verts[list(ids)]
        area = _signed_area(pts)
        if area <= 0.0:
            raise MeshError(
                f"cell {ci}: non-positive measure {area:.3e} "
                "(vertices must be counterclockwise)")
        measures[ci] = area
        if cell_points is not None:
            points[ci] = np.asarray(cell_points)[ci]
        elif len(ids) == 3:
            points[ci] = triangle_circumcenter(pts[0], pts[1], pts[2])
        else:
            points[ci] = _centroid(pts)
    if not np.all(np.isfinite(points)):
        raise MeshError("non-finite cell points")

    # first-encounter edge ordering keeps everything deterministic
    edge_index: dict = {}
    edge_list = []
    for ci, ids in enumerate(cell_tuples):
        for k in range(len(ids)):
            a, b = ids[k], ids[(k + 1) % len(ids)]
            key = (a, b) if a < b else (b, a)
            if key not in edge_index:
                edge_index[key] = len(edge_list)
                edge_list.append([a, b, ci, -1])
            else:
                rec = edge_list[edge_index[key]]
                if rec[3] != -1:
                    raise MeshError(
                        f"edge {key[0]}-{key[1]}: shared by more than two cells")
                rec[3] = ci

    ne = len(edge_list)
    edge_vertices = np.empty((ne, 2), dtype=np.int64)
    edge_cells = np.empty((ne, 2), dtype=np.int64)
    edge_measures = np.empty(ne)
    edge_dK = np.zeros(ne)
    edge_dL = np.zeros(ne)
    for ei, (a, b, K, L) in enumerate(edge_list):
        edge_vertices[ei] = (a, b)
        edge_cells[ei] = (K, L)
        va, vb = verts[a], verts[b]
        t = vb - va
        length = float(np.hypot(t[0], t[1]))
        if length <= 0.0:
            raise MeshError(f"edge {a}-{b}: zero measure")
        edge_measures[ei] = length
        # signed cell-point distance to the edge line, cross(t, p - va)/|t|
        sK = float(t[0] * (points[K, 1] - va[1])
                   - t[1] * (points[K, 0] - va[0])) / length
        edge_dK[ei] = abs(sK)
        if L == -1:
            continue
        sL = float(t[0] * (points[L, 1] - va[1])
                   - t[1] * (points[L, 0] - va[0])) / length
        edge_dL[ei] = abs(sL)
        seg = points[L] - points[K]
        d_KL = float(np.hypot(seg[0], seg[1]))
        where = f"edge {a}-{b} between cells {K} and {L}"
        if d_KL <= 0.0:
            raise MeshError(f"{where}: coincident cell points (d_KL = 0)")
        if abs(float(t @ seg)) > ORTHOGONALITY_TOL * length * d_KL:
            raise MeshError(
                f"{where}: cell-point segment not orthogonal "
                f"(relative skew {abs(float(t @ seg)) / (length * d_KL):.3e})")
        if abs(sK) <= 0.0 or abs(sL) <= 0.0 or sK * sL >= 0.0:
            raise MeshError(
                f"{where}: cell points not strictly on opposite sides "
                f"(signed distances {sK:.3e}, {sL:.3e})")
        if abs(edge_dK[ei] + edge_dL[ei] - d_KL) > ORTHOGONALITY_TOL * d_KL:
            raise MeshError(f"{where}: distances do not sum to d_KL")

    interior = np.flatnonzero(edge_cells[:, 1] >= 0)
    int_K = np.ascontiguousarray(edge_cells[interior, 0])
    int_L = np.ascontiguousarray(edge_cells[interior, 1])
    jac_rows, jac_cols = _jacobian_pattern(nc, int_K, int_L)
    return Mesh(
        vertices=verts,
        cells=tuple(cell_tuples),
        cell_points=points,
        cell_measures=measures,
        edge_vertices=edge_vertices,
        edge_cells=edge_cells,
        edge_measures=edge_measures,
        edge_dK=edge_dK,
        edge_dL=edge_dL,
        int_K=int_K,
        int_L=int_L,
        int_measure=np.ascontiguousarray(edge_measures[interior]),
        int_dK=np.ascontiguousarray(edge_dK[interior]),
        int_dL=np.ascontiguousarray(edge_dL[interior]),
        jac_rows=jac_rows,
        jac_cols=jac_cols,
    )


def build_cartesian_mesh(nx: int, ny: int) -> Mesh:
    """Uniform rectangular cells on the unit square, admissible by construction."""
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be at least 1")
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    verts = np.array([(x, y) for y in ys for x in xs])
    cells = []
    for iy in range(ny):
        for ix in range(nx):
            v00 = iy * (nx + 1) + ix
            cells.append((v00, v00 + 1, v00 + nx + 2, v00 + nx + 1))
    return build_mesh(verts, cells)


def save_mesh(mesh: Mesh, path) -> None:
    """Write the documented text format, always with explicit cell points."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# finite-volume mesh\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_cells} 1\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for ids in mesh.cells:
            fh.write(f"{len(ids)} " + " ".join(str(v) for v in ids) + "\n")
        for x, y in mesh.cell_points:
            fh.write(f"{x:.17g} {y:.17g}\n")


def load_mesh(path) -> Mesh:
    """Parse the documented text format and run the admissibility checks."""
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh]
    rows = [ln.split() for ln in lines if ln and not ln.startswith("#")]
    if not rows:
        raise MeshError(f"{path}: empty mesh file")
    header = rows[0]
    if len(header) != 3:
        raise MeshError(f"{path}: header must be 'nv nc has_cell_points'")
    try:
        nv, nc, has_points = (int(tok) for tok in header)
    except ValueError as exc:
        raise MeshError(f"{path}: bad header {header!r}") from exc
    if has_points not in (0, 1):
        raise MeshError(f"{path}: has_cell_points must be 0 or 1")
    need = 1 + nv + nc + (nc if has_points else 0)
    if len(rows) != need:
        raise MeshError(f"{path}: expected {need} data lines, found {len(rows)}")
    try:
        verts = np.array([[float(r[0]), float(r[1])] for r in rows[1:1 + nv]])
        cells = []
        for r in rows[1 + nv:1 + nv + nc]:
            m = int(r[0])
            if len(r) != m + 1:
                raise MeshError(f"{path}: cell line {r!r} length mismatch")
            cells.append(tuple(int(v) for v in r[1:]))
        points = None
        if has_points:
            points = np.array([[float(r[0]), float(r[1])]
                               for r in rows[1 + nv + nc:]])
    except MeshError:
        raise
    except ValueError as exc:
        raise MeshError(f"{path}: unparseable number ({exc})") from exc
    return build_mesh(verts, cells, points)
