"""Geometric containers, the [-1,1] normalization transform, and file I/O.

Supported formats: XYZ (whitespace separated, 3 or 6 columns, '#' comments),
PLY 1.0 (ascii and binary_little_endian), OBJ (v/f records), and a simple
grid dump (text header + raw float32 little-endian payload).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointCloud",
    "NormalizationTransform",
    "TriangleMesh",
    "Polyline2D",
    "ScalarGrid",
    "GeometryError",
    "ParseError",
    "load_point_cloud",
    "normalize",
    "save_point_cloud",
    "save_mesh",
    "load_mesh",
    "save_polyline",
    "save_grid",
    "load_grid",
]


class GeometryError(ValueError):
    """Invalid geometric data (non-finite coordinates, bad indices, ...)."""


class ParseError(GeometryError):
    """File could not be parsed; message carries the offending location."""


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray                  # (n, d) float64
    normals: np.ndarray | None = None   # (n, d) unit vectors, optional

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise GeometryError(f"points must be (n, 2) or (n, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise GeometryError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
            if nrm.shape != pts.shape:
                raise GeometryError(
                    f"normal count {nrm.shape} does not match points {pts.shape}"
                )
            lengths = np.linalg.norm(nrm, axis=1)
            if not np.isfinite(nrm).all() or (lengths < 1e-8).any():
                raise GeometryError("normals contain non-finite or degenerate entries")
            nrm = nrm / lengths[:, None]
            nrm.flags.writeable = False
            object.__setattr__(self, "normals", nrm)
        pts.flags.writeable = False

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


@dataclass(frozen=True)
class NormalizationTransform:
    """World -> normalized map  x_n = (x - center) * scale  (isotropic)."""

    center: np.ndarray   # (d,)
    scale: float         # 1 / world-unit

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if self.scale <= 0 or not np.isfinite(self.scale):
            raise GeometryError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "center", c)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.center) * self.scale

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) / self.scale + self.center

    @property
    def dim(self):
        return self.center.shape[0]


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray    # (nv, 3) float64
    triangles: np.ndarray   # (nt, 3) int

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise GeometryError("triangle index out of range")
        if len(t) and ((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])).any():
            raise GeometryError("triangle with repeated vertex index")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        if self.n_triangles == 0:
            return np.zeros((0, 2), dtype=np.int64)
        e = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles


@dataclass(frozen=True)
class Polyline2D:
    vertices: np.ndarray   # (nv, 2)
    segments: np.ndarray   # (ns, 2) int

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2))
        s = np.ascontiguousarray(np.asarray(self.segments, dtype=np.int64).reshape(-1, 2))
        if len(s) and (s.min() < 0 or s.max() >= len(v)):
            raise GeometryError("segment index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "segments", s)

    def connected_components(self) -> int:
        """Number of connected components of the segment graph."""
        n = len(self.vertices)
        if n == 0:
            return 0
        parent = np.arange(n)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for a, b in self.segments:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        roots = {find(i) for i in range(n)}
        return len(roots)


@dataclass(frozen=True)
class ScalarGrid:
    dims: tuple            # d integers, nodes per axis
    origin: np.ndarray     # (d,)
    spacing: np.ndarray    # (d,) positive, per axis
    values: np.ndarray     # flat, row-major, last axis fastest

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        origin = np.asarray(self.origin, dtype=np.float64)
        spacing = np.atleast_1d(np.asarray(self.spacing, dtype=np.float64))
        if spacing.shape == (1,):
            spacing = np.repeat(spacing, len(dims))
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if (spacing <= 0).any():
            raise GeometryError("grid spacing must be positive")
        if len(vals) != int(np.prod(dims)):
            raise GeometryError(
                f"values length {len(vals)} != product of dims {dims}"
            )
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", vals)

    @property
    def ndim(self):
        return len(self.dims)

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def node_coordinates(self) -> np.ndarray:
        """All node positions, shape (prod(dims), d), same order as values."""
        axes = [self.origin[i] + self.spacing[i] * np.arange(self.dims[i])
                for i in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# normalization


def normalize(cloud: PointCloud) -> tuple[PointCloud, NormalizationTransform]:
    """Center the cloud and scale its longest bbox axis to exactly [-1, 1].

    Scaling is isotropic so distances stay isotropic in normalized space.
    """
    if len(cloud) == 0:
        raise GeometryError("cannot normalize an empty point cloud")
    lo = cloud.points.min(axis=0)
    hi = cloud.points.max(axis=0)
    extent = hi - lo
    longest = extent.max()
    if longest <= 0:
        raise GeometryError("all points identical; bounding box is degenerate")
    center = (lo + hi) / 2.0
    scale = 2.0 / longest
    tf = NormalizationTransform(center=center, scale=scale)
    out = PointCloud(points=tf.apply(cloud.points), normals=cloud.normals)
    return out, tf


# ---------------------------------------------------------------------------
# XYZ / PLY point clouds


def load_point_cloud(path, format: str | None = None) -> PointCloud:
    path = str(path)
    if format is None:
        format = "ply" if path.lower().endswith(".ply") else "xyz"
    if format == "xyz":
        return _load_xyz(path)
    if format == "ply":
        verts, normals, _ = _read_ply(path)
        return PointCloud(points=verts, normals=normals)
    raise ValueError(f"unknown point cloud format {format!r}")


def _load_xyz(path) -> PointCloud:
    pts, nrms = [], []
    ncols = None
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) not in (3, 6):
                raise ParseError(f"{path}:{lineno}: expected 3 or 6 columns, got {len(tokens)}")
            if ncols is None:
                ncols = len(tokens)
            elif len(tokens) != ncols:
                raise ParseError(f"{path}:{lineno}: inconsistent column count")
            try:
                vals = [float(t) for t in tokens]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            pts.append(vals[:3])
            if ncols == 6:
                nrms.append(vals[3:])
    if not pts:
        raise ParseError(f"{path}: no points found")
    pts = np.asarray(pts, dtype=np.float64)
    if not np.isfinite(pts).all():
        raise ParseError(f"{path}: non-finite coordinate")
    normals = None
    if nrms:
        normals = np.asarray(nrms, dtype=np.float64)
        lengths = np.linalg.norm(normals, axis=1)
        # degenerate normals -> treat as unoriented rather than fabricate
        if (lengths < 1e-8).any() or not np.isfinite(normals).all():
            normals = None
    return PointCloud(points=pts, normals=normals)


def save_point_cloud(cloud: PointCloud, path, format: str | None = None,
                     binary: bool = True) -> None:
    path = str(path)
    if format is None:
        format = "ply" if path.lower().endswith(".ply") else "xyz"
    if format == "xyz":
        with open(path, "w") as fh:
            for i in range(len(cloud)):
                row = list(cloud.points[i])
                if cloud.normals is not None:
                    row += list(cloud.normals[i])
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
        return
    if format == "ply":
        _write_ply(path, cloud.points, cloud.normals, None, binary=binary)
        return
    raise ValueError(f"unknown point cloud format {format!r}")


# ---------------------------------------------------------------------------
# PLY


_PLY_PROP_ORDER = ("x", "y", "z", "nx", "ny", "nz")


def _write_ply(path, vertices, normals, faces, binary=True):
    vertices = np.asarray(vertices, dtype=np.float32)
    n, d = vertices.shape
    if d == 2:   # pad 2D points for PLY storage
        vertices = np.column_stack([vertices, np.zeros(n, dtype=np.float32)])
    has_normals = normals is not None
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {n}")
    header += [f"property float {name}" for name in _PLY_PROP_ORDER[:3]]
    if has_normals:
        header += [f"property float {name}" for name in _PLY_PROP_ORDER[3:]]
    nf = 0 if faces is None else len(faces)
    if faces is not None:
        header.append(f"element face {nf}")
        header.append("property list uchar int vertex_indices")
    header.append("end_header")
    cols = [vertices]
    if has_normals:
        nrm = np.asarray(normals, dtype=np.float32)
        if nrm.shape[1] == 2:
            nrm = np.column_stack([nrm, np.zeros(len(nrm), dtype=np.float32)])
        cols.append(nrm)
    vdata = np.column_stack(cols).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(vdata.tobytes())
            if faces is not None and nf:
                f = np.asarray(faces, dtype="<i4")
                counts = np.full((nf, 1), 3, dtype=np.uint8)
                rec = np.zeros(nf, dtype=[("c", "u1"), ("idx", "<i4", (3,))])
                rec["c"] = counts[:, 0]
                rec["idx"] = f
                fh.write(rec.tobytes())
        else:
            lines = []
            for row in vdata:
                lines.append(" ".join(f"{v:.9g}" for v in row))
            if faces is not None:
                for tri in np.asarray(faces, dtype=np.int64):
                    lines.append("3 " + " ".join(str(i) for i in tri))
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


def _read_ply(path):
    """Returns (vertices (n,3), normals or None, faces or None)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header")
    if data[:3] != b"ply" or end < 0:
        raise ParseError(f"{path}: not a PLY file")
    end = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end:]

    fmt = None
    elements = []   # (name, count, [(proptype, name) or ('list', counttype, itemtype, name)])
    for lineno, line in enumerate(header, start=1):
        tokens = line.split()
        if not tokens or tokens[0] in ("ply", "comment", "end_header"):
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ParseError(f"{path}: header line {lineno}: property before element")
            if tokens[1] == "list":
                elements[-1][2].append(("list", tokens[2], tokens[3], tokens[4]))
            else:
                elements[-1][2].append((tokens[1], tokens[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")

    typmap = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
              "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
              "uchar": "u1", "uint8": "u1", "char": "i1", "int8": "i1",
              "short": "<i2", "ushort": "<u2"}

    verts = normals = faces = None
    if fmt == "ascii":
        tokens = body.split()
        pos = 0
        for name, count, props in elements:
            if name == "vertex":
                pnames = [p[-1] for p in props]
                width = len(props)
                arr = np.array(tokens[pos:pos + count * width], dtype=np.float64)
                pos += count * width
                arr = arr.reshape(count, width)
                verts, normals = _extract_vertex_props(arr, pnames, path)
            elif name == "face":
                rows = []
                for _ in range(count):
                    k = int(tokens[pos]); pos += 1
                    if k != 3:
                        raise ParseError(f"{path}: only triangular faces supported (got {k})")
                    rows.append([int(t) for t in tokens[pos:pos + 3]])
                    pos += 3
                faces = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
            else:   # skip unknown element
                width = len(props)
                pos += count * width
    else:
        offset = 0
        for name, count, props in elements:
            if any(p[0] == "list" for p in props):
                if name != "face" or len(props) != 1:
                    raise ParseError(f"{path}: unsupported list property layout in element {name!r}")
                _, ctype, itype, _ = props[0]
                csize = np.dtype(typmap[ctype]).itemsize
                isize = np.dtype(typmap[itype]).itemsize
                rows = []
                for _ in range(count):
                    k = int(np.frombuffer(body, dtype=typmap[ctype], count=1, offset=offset)[0])
                    offset += csize
                    if k != 3:
                        raise ParseError(f"{path}: only triangular faces supported (got {k})")
                    idx = np.frombuffer(body, dtype=typmap[itype], count=3, offset=offset)
                    offset += 3 * isize
                    rows.append(idx)
                if name == "face":
                    faces = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
            else:
                dtype = np.dtype([(p[1], typmap[p[0]]) for p in props])
                need = count * dtype.itemsize
                if offset + need > len(body):
                    raise ParseError(f"{path}: truncated at byte {end + offset}")
                rec = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
                offset += need
                if name == "vertex":
                    pnames = [p[1] for p in props]
                    arr = np.column_stack([rec[p].astype(np.float64) for p in pnames])
                    verts, normals = _extract_vertex_props(arr, pnames, path)
    if verts is None:
        raise ParseError(f"{path}: no vertex element")
    return verts, normals, faces


def _extract_vertex_props(arr, pnames, path):
    try:
        cols = [pnames.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise ParseError(f"{path}: vertex element missing x/y/z") from None
    verts = arr[:, cols]
    if not np.isfinite(verts).all():
        raise ParseError(f"{path}: non-finite vertex coordinate")
    normals = None
    if all(c in pnames for c in ("nx", "ny", "nz")):
        normals = arr[:, [pnames.index(c) for c in ("nx", "ny", "nz")]]
        lengths = np.linalg.norm(normals, axis=1)
        if (lengths < 1e-8).any():
            normals = None
    return verts, normals


# ---------------------------------------------------------------------------
# meshes


def save_mesh(mesh: TriangleMesh, path, format: str | None = None,
              binary: bool = True) -> None:
    path = str(path)
    if format is None:
        format = "ply" if path.lower().endswith(".ply") else "obj"
    if format == "obj":
        with open(path, "w") as fh:
            for v in mesh.vertices:
                fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
            for t in mesh.triangles:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        return
    if format == "ply":
        _write_ply(path, mesh.vertices, None, mesh.triangles, binary=binary)
        return
    raise ValueError(f"unknown mesh format {format!r}")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    path = str(path)
    if format is None:
        format = "ply" if path.lower().endswith(".ply") else "obj"
    if format == "obj":
        verts, faces = [], []
        with open(path, "r") as fh:
            for lineno, line in enumerate(fh, start=1):
                tokens = line.split()
                if not tokens or tokens[0].startswith("#"):
                    continue
                if tokens[0] == "v":
                    verts.append([float(t) for t in tokens[1:4]])
                elif tokens[0] == "f":
                    try:
                        idx = [int(t.split("/")[0]) - 1 for t in tokens[1:]]
                    except ValueError as exc:
                        raise ParseError(f"{path}:{lineno}: {exc}") from None
                    for i in range(1, len(idx) - 1):   # fan-triangulate
                        faces.append([idx[0], idx[i], idx[i + 1]])
        return TriangleMesh(vertices=np.asarray(verts, dtype=np.float64).reshape(-1, 3),
                            triangles=np.asarray(faces, dtype=np.int64).reshape(-1, 3))
    if format == "ply":
        verts, _, faces = _read_ply(path)
        if faces is None:
            faces = np.zeros((0, 3), dtype=np.int64)
        return TriangleMesh(vertices=verts, triangles=faces)
    raise ValueError(f"unknown mesh format {format!r}")


def save_polyline(poly: Polyline2D, path) -> None:
    """OBJ-line format: 'v x y 0' records and 1-based 'l i j' segments."""
    with open(path, "w") as fh:
        for v in poly.vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} 0\n")
        for s in poly.segments:
            fh.write(f"l {s[0] + 1} {s[1] + 1}\n")


# ---------------------------------------------------------------------------
# scalar grids


_GRID_MAGIC = "SDFGRID 1"


def save_grid(grid: ScalarGrid, path) -> None:
    header = [
        _GRID_MAGIC,
        "dims " + " ".join(str(n) for n in grid.dims),
        "origin " + " ".join(f"{v:.17g}" for v in grid.origin),
        "spacing " + " ".join(f"{v:.17g}" for v in grid.spacing),
        "data",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(grid.values.astype("<f4").tobytes())


def load_grid(path) -> ScalarGrid:
    with open(path, "rb") as fh:
        data = fh.read()
    idx = data.find(b"data\n")
    if not data.startswith(_GRID_MAGIC.encode("ascii")) or idx < 0:
        raise ParseError(f"{path}: not a grid dump")
    header = data[:idx].decode("ascii").splitlines()
    payload = data[idx + 5:]
    dims = origin = spacing = None
    for line in header[1:]:
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "dims":
            dims = tuple(int(t) for t in tokens[1:])
        elif tokens[0] == "origin":
            origin = np.array([float(t) for t in tokens[1:]])
        elif tokens[0] == "spacing":
            spacing = np.array([float(t) for t in tokens[1:]])
    if dims is None or origin is None or spacing is None:
        raise ParseError(f"{path}: incomplete grid header")
    n = int(np.prod(dims))
    if len(payload) < 4 * n:
        raise ParseError(f"{path}: truncated payload ({len(payload)} bytes, need {4 * n})")
    values = np.frombuffer(payload, dtype="<f4", count=n).astype(np.float64)
    return ScalarGrid(dims=dims, origin=origin, spacing=spacing, values=values)
