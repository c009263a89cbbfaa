"""TSPLIB instances, exact integer distances, neighbor lists and tour evaluation."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, TourError

EDGE_WEIGHT_KINDS = ("EUC_2D", "CEIL_2D", "ATT", "GEO", "EXPLICIT")
MATRIX_FORMATS = ("FULL_MATRIX", "UPPER_ROW", "LOWER_ROW", "UPPER_DIAG_ROW", "LOWER_DIAG_ROW")

# Optimal tour lengths published with TSPLIB for the bundled instances.
KNOWN_OPTIMA = {
    "att48": 10628,
    "bays29": 2020,
    "berlin52": 7542,
    "brazil58": 25395,
    "d198": 15780,
    "eil51": 426,
    "gr17": 2085,
    "gr24": 1272,
    "gr96": 55209,
    "kroA100": 21282,
    "lin105": 14379,
    "pcb442": 50778,
    "pr1002": 259045,
    "pr76": 108159,
    "st70": 675,
    "ulysses16": 6859,
    "ulysses22": 7013,
}


@dataclass(frozen=True)
class TspInstance:
    name: str
    n: int
    edge_weight_kind: str
    coords: np.ndarray | None = None
    weights: np.ndarray | None = None
    comment: str = ""

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"instance needs at least 3 nodes, got {self.n}")
        if self.edge_weight_kind not in EDGE_WEIGHT_KINDS:
            raise ConfigError(f"unsupported edge weight kind {self.edge_weight_kind!r}")
        if self.edge_weight_kind == "EXPLICIT":
            w = self.weights
            if w is None or w.shape != (self.n, self.n):
                raise ConfigError("EXPLICIT instance needs an n x n weight matrix")
            if not np.array_equal(w, w.T) or np.any(np.diag(w) != 0):
                raise ConfigError("weight matrix must be symmetric with a zero diagonal")
        elif self.coords is None or self.coords.shape != (self.n, 2):
            raise ConfigError("coordinate instance needs n (x, y) pairs")


@dataclass(frozen=True)
class DistanceMatrix:
    d: np.ndarray

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def __getitem__(self, ij):
        return self.d[ij]


@dataclass(frozen=True)
class NeighborLists:
    nbr: np.ndarray

    @property
    def cl(self) -> int:
        return self.nbr.shape[1]


@dataclass(frozen=True)
class Tour:
    route: np.ndarray
    cost: int

    def __post_init__(self):
        object.__setattr__(self, "route", np.asarray(self.route, dtype=np.int32))

    def __len__(self):
        return len(self.route)


# -- parsing -----------------------------------------------------------------


def _split_header(line: str):
    if ":" in line:
        key, value = line.split(":", 1)
        return key.strip().upper(), value.strip()
    parts = line.split(None, 1)
    return parts[0].strip().upper(), (parts[1].strip() if len(parts) > 1 else "")


def _read_numbers(lines, start, count, lineno_of):
    """Read `count` whitespace separated numbers starting at line index `start`."""
    values = []
    i = start
    while len(values) < count:
        if i >= len(lines):
            raise ParseError(f"expected {count} numbers, found {len(values)} before end of input")
        text = lines[i].strip()
        if text and text[0].isalpha():
            raise ParseError(
                f"expected {count} numbers, found {len(values)} before {text.split()[0]!r}",
                lineno_of(i),
            )
        for tok in text.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise ParseError(f"not a number: {tok!r}", lineno_of(i)) from None
        i += 1
    if len(values) > count:
        raise ParseError(f"section has more than {count} numbers", lineno_of(i - 1))
    return values, i


def _expand_matrix(values, n, fmt):
    w = np.zeros((n, n), dtype=np.int64)
    it = iter(values)
    if fmt == "FULL_MATRIX":
        for i in range(n):
            for j in range(n):
                w[i, j] = next(it)
        return w
    if fmt == "UPPER_ROW":
        cells = ((i, j) for i in range(n) for j in range(i + 1, n))
    elif fmt == "UPPER_DIAG_ROW":
        cells = ((i, j) for i in range(n) for j in range(i, n))
    elif fmt == "LOWER_ROW":
        cells = ((i, j) for i in range(n) for j in range(i))
    else:  # LOWER_DIAG_ROW
        cells = ((i, j) for i in range(n) for j in range(i + 1))
    for i, j in cells:
        w[i, j] = w[j, i] = next(it)
    return w


def _matrix_count(n, fmt):
    return {
        "FULL_MATRIX": n * n,
        "UPPER_ROW": n * (n - 1) // 2,
        "LOWER_ROW": n * (n - 1) // 2,
        "UPPER_DIAG_ROW": n * (n + 1) // 2,
        "LOWER_DIAG_ROW": n * (n + 1) // 2,
    }[fmt]


def _read_text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    if isinstance(source, os.PathLike) or "\n" not in source:
        return Path(source).read_text(encoding="utf-8")
    return source


def parse_tsplib(source) -> TspInstance:
    """Parse a symmetric TSPLIB file from a text stream, a string or a path.

    Raises ParseError naming the offending line on malformed headers,
    unsupported edge weight types or a dimension mismatch.
    """
    lines = _read_text(source).splitlines()

    def lineno_of(i):
        return i + 1

    header = {}
    header_line = {}
    coords = None
    weights = None
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        if not raw:
            i += 1
            continue
        key, value = _split_header(raw)
        if key == "EOF":
            break
        if key == "NODE_COORD_SECTION":
            n = _dimension(header, header_line, i)
            kind = header.get("EDGE_WEIGHT_TYPE")
            if kind == "EXPLICIT":
                raise ParseError("NODE_COORD_SECTION given for an EXPLICIT instance", lineno_of(i))
            coords, i = _read_coords(lines, i + 1, n, lineno_of)
            continue
        if key == "EDGE_WEIGHT_SECTION":
            n = _dimension(header, header_line, i)
            fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper()
            if fmt not in MATRIX_FORMATS:
                raise ParseError(f"unsupported EDGE_WEIGHT_FORMAT {fmt!r}", header_line.get("EDGE_WEIGHT_FORMAT", lineno_of(i)))
            values, i = _read_numbers(lines, i + 1, _matrix_count(n, fmt), lineno_of)
            weights = _expand_matrix(values, n, fmt)
            continue
        if key in ("DISPLAY_DATA_SECTION", "FIXED_EDGES_SECTION", "TOUR_SECTION"):
            i += 1
            while i < len(lines) and (not lines[i].strip() or not lines[i].strip()[0].isalpha()):
                i += 1
            continue
        if key.endswith("_SECTION"):
            raise ParseError(f"unsupported section {key}", lineno_of(i))
        if not value:
            raise ParseError(f"malformed header line {raw!r}", lineno_of(i))
        header[key] = value
        header_line[key] = lineno_of(i)
        if key == "TYPE" and value.upper() != "TSP":
            raise ParseError(f"only symmetric TSP instances are supported, got TYPE {value}", lineno_of(i))
        if key == "EDGE_WEIGHT_TYPE" and value.upper() not in EDGE_WEIGHT_KINDS:
            raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {value}", lineno_of(i))
        i += 1

    n = _dimension(header, header_line, len(lines) - 1)
    kind = header.get("EDGE_WEIGHT_TYPE", "").upper()
    if not kind:
        raise ParseError("missing EDGE_WEIGHT_TYPE header")
    if kind == "EXPLICIT" and weights is None:
        raise ParseError("EXPLICIT instance without EDGE_WEIGHT_SECTION")
    if kind != "EXPLICIT" and coords is None:
        raise ParseError("missing NODE_COORD_SECTION")
    if weights is not None and kind == "EXPLICIT":
        if not np.array_equal(weights, weights.T):
            raise ParseError("explicit weight matrix is not symmetric")
        np.fill_diagonal(weights, 0)
    return TspInstance(
        name=header.get("NAME", "unnamed"),
        n=n,
        edge_weight_kind=kind,
        coords=coords if kind != "EXPLICIT" else None,
        weights=weights if kind == "EXPLICIT" else None,
        comment=header.get("COMMENT", ""),
    )


def _dimension(header, header_line, i):
    if "DIMENSION" not in header:
        raise ParseError("DIMENSION header missing before data section", i + 1)
    try:
        n = int(header["DIMENSION"])
    except ValueError:
        raise ParseError(f"bad DIMENSION {header['DIMENSION']!r}", header_line["DIMENSION"]) from None
    if n < 3:
        raise ParseError(f"DIMENSION must be at least 3, got {n}", header_line["DIMENSION"])
    return n


def _read_coords(lines, i, n, lineno_of):
    coords = np.full((n, 2), np.nan)
    seen = 0
    while i < len(lines):
        text = lines[i].strip()
        if not text:
            i += 1
            continue
        if text[0].isalpha():
            break
        parts = text.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'id x y', got {text!r}", lineno_of(i))
        try:
            node = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"bad coordinate line {text!r}", lineno_of(i)) from None
        if not 1 <= node <= n:
            raise ParseError(f"node id {node} outside 1..{n} (dimension mismatch)", lineno_of(i))
        if not np.isnan(coords[node - 1, 0]):
            raise ParseError(f"duplicate node id {node}", lineno_of(i))
        coords[node - 1] = (x, y)
        seen += 1
        i += 1
    if seen != n:
        raise ParseError(f"DIMENSION is {n} but {seen} coordinates were given", lineno_of(i - 1))
    return coords, i


def parse_tour(source) -> np.ndarray:
    """Read a TSPLIB .tour file and return the 0-based node sequence."""
    text = _read_text(source)
    nodes = []
    in_section = False
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not in_section:
            if s.upper().startswith("TOUR_SECTION"):
                in_section = True
            continue
        for tok in s.split():
            if tok == "-1" or tok.upper() == "EOF":
                return np.asarray(nodes, dtype=np.int32) - 1
            try:
                nodes.append(int(tok))
            except ValueError:
                raise ParseError(f"bad tour entry {tok!r}", lineno) from None
    if not in_section:
        raise ParseError("no TOUR_SECTION found")
    return np.asarray(nodes, dtype=np.int32) - 1


# -- bundled data ------------------------------------------------------------


def bundled_instances():
    root = resources.files("mmas_tsp") / "data"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".tsp"))


def bundled_path(name: str, suffix: str = ".tsp") -> Path:
    path = Path(str(resources.files("mmas_tsp") / "data" / f"{name}{suffix}"))
    if not path.exists():
        raise FileNotFoundError(f"no bundled file {name}{suffix}")
    return path


def load_instance(name_or_path) -> TspInstance:
    """Load a TSPLIB file by path, or one of the bundled instances by name."""
    path = Path(name_or_path)
    if not path.exists():
        path = bundled_path(path.name.removesuffix(".tsp"))
    return parse_tsplib(io.StringIO(path.read_text(encoding="utf-8")))


def load_optimal_tour(name: str) -> np.ndarray:
    return parse_tour(bundled_path(name, ".opt.tour"))


# -- distances ---------------------------------------------------------------


def _nint(x):
    return np.floor(x + 0.5)


def _geo_radians(values):
    deg = np.trunc(values)
    minutes = values - deg
    return 3.141592 * (deg + 5.0 * minutes / 3.0) / 180.0


def _pair_distances(kind, xi, yi, xj, yj):
    """TSPLIB 95 distance between coordinate arrays (broadcasting)."""
    dx = xi - xj
    dy = yi - yj
    if kind == "EUC_2D":
        return _nint(np.sqrt(dx * dx + dy * dy))
    if kind == "CEIL_2D":
        return np.ceil(np.sqrt(dx * dx + dy * dy))
    if kind == "ATT":
        r = np.sqrt((dx * dx + dy * dy) / 10.0)
        t = _nint(r)
        return np.where(t < r, t + 1.0, t)
    if kind == "GEO":
        lat_i, lon_i = _geo_radians(xi), _geo_radians(yi)
        lat_j, lon_j = _geo_radians(xj), _geo_radians(yj)
        q1 = np.cos(lon_i - lon_j)
        q2 = np.cos(lat_i - lat_j)
        q3 = np.cos(lat_i + lat_j)
        arg = np.clip(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3), -1.0, 1.0)
        return np.trunc(6378.388 * np.arccos(arg) + 1.0)
    raise ConfigError(f"no coordinate distance for {kind}")


def distance(inst: TspInstance, i: int, j: int) -> int:
    if inst.edge_weight_kind == "EXPLICIT":
        return int(inst.weights[i, j])
    if i == j:
        return 0
    (xi, yi), (xj, yj) = inst.coords[i], inst.coords[j]
    return int(_pair_distances(inst.edge_weight_kind, np.float64(xi), np.float64(yi), np.float64(xj), np.float64(yj)))


def build_distance_matrix(inst: TspInstance) -> DistanceMatrix:
    """Full row-major int32 matrix of TSPLIB-rounded distances."""
    if inst.edge_weight_kind == "EXPLICIT":
        d = inst.weights.astype(np.int64)
    else:
        x = inst.coords[:, 0]
        y = inst.coords[:, 1]
        d = _pair_distances(inst.edge_weight_kind, x[:, None], y[:, None], x[None, :], y[None, :])
        d = d.astype(np.int64)
        np.fill_diagonal(d, 0)
        # GEO is symmetric in exact arithmetic; cos rounding can differ in the last bit
        d = np.minimum(d, d.T)
    if d.max(initial=0) >= 2**31:
        raise ConfigError("distances exceed the 32-bit range")
    d = np.ascontiguousarray(d, dtype=np.int32)
    d.flags.writeable = False
    return DistanceMatrix(d)


def build_neighbor_lists(dm: DistanceMatrix, cl: int = 32) -> NeighborLists:
    """Row i holds the cl nearest nodes to i, by distance then smaller node id."""
    n = dm.n
    if cl < 1 or cl >= n:
        raise ConfigError(f"candidate list length must be in [1, n-1] = [1, {n - 1}], got {cl}")
    d = dm.d.astype(np.int64)
    # self goes last; a stable sort keeps ties in ascending id order
    d[np.arange(n), np.arange(n)] = np.iinfo(np.int64).max
    order = np.argsort(d, axis=1, kind="stable")[:, :cl]
    nbr = np.ascontiguousarray(order, dtype=np.int32)
    nbr.flags.writeable = False
    return NeighborLists(nbr)


# -- tours -------------------------------------------------------------------


def validate_route(route, n: int) -> np.ndarray:
    route = np.asarray(route)
    if route.ndim != 1 or len(route) != n:
        raise TourError(f"route must visit all {n} nodes, got length {len(route)}")
    if route.min(initial=0) < 0 or route.max(initial=0) >= n:
        raise TourError("route contains a node id outside 0..n-1")
    counts = np.bincount(route, minlength=n)
    if np.any(counts != 1):
        dup = np.flatnonzero(counts > 1)
        missing = np.flatnonzero(counts == 0)
        raise TourError(f"route is not a permutation (duplicates {dup[:5].tolist()}, missing {missing[:5].tolist()})")
    return route


def tour_cost(dm: DistanceMatrix, route) -> int:
    route = validate_route(route, dm.n)
    return int(dm.d[route, np.roll(route, -1)].astype(np.int64).sum())


def nearest_neighbor_tour(dm: DistanceMatrix, start: int = 0) -> Tour:
    n = dm.n
    if not 0 <= start < n:
        raise ConfigError(f"start node {start} outside 0..{n - 1}")
    visited = np.zeros(n, dtype=bool)
    route = np.empty(n, dtype=np.int32)
    big = np.iinfo(np.int64).max
    cur = start
    route[0] = cur
    visited[cur] = True
    for k in range(1, n):
        row = np.where(visited, big, dm.d[cur].astype(np.int64))
        cur = int(np.argmin(row))
        route[k] = cur
        visited[cur] = True
    return Tour(route, tour_cost(dm, route))
