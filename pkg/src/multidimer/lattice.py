"""Periodic bipartite lattices, finite regions, and Newton polytopes.

Coordinates are exact integers in lattice-index space; geometric positions are
rationals derived from the per-type edge vectors, so adjacency never touches
floating point.  A region is a finite list of white and black vertices with an
explicit edge list (a multigraph: tori of size 1 have parallel edges).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import gcd

import numpy as np
from scipy.spatial import ConvexHull

WHITE = "white"
BLACK = "black"


class LatticeName(str, Enum):
    Z2_DIAG = "z2_diag"
    Z3 = "z3"
    BCC = "bcc"
    HONEYCOMB = "honeycomb"
    DIAMOND_CUBIC = "diamond_cubic"


def _fr(*nums) -> tuple:
    return tuple(Fraction(n) for n in nums)


@dataclass(frozen=True)
class LatticeSpec:
    """A periodic bipartite lattice given by its white-to-black edge vectors.

    ``neighbor_offsets[t]`` is the integer-coordinate displacement from a white
    vertex to its type-``t+1`` black neighbor.  ``black_offset`` is the position
    of a black vertex relative to the white vertex with the same coordinate
    (rendering only; for Z3 it is nominal, see the module docstring of the
    region builders).
    """

    name: LatticeName
    dim: int
    degree: int
    edge_vectors: tuple          # D rational vectors, white -> black
    black_offset: tuple          # rational vector
    neighbor_offsets: tuple      # D integer vectors

    @cached_property
    def edge_vectors_float(self) -> np.ndarray:
        return np.array([[float(c) for c in e] for e in self.edge_vectors])

    def white_position(self, coord) -> tuple:
        return tuple(Fraction(c) - o for c, o in zip(coord, self.black_offset))

    def black_position(self, coord) -> tuple:
        return tuple(Fraction(c) for c in coord)


_LATTICES = {}


def _register(name, edge_vectors, black_offset, neighbor_offsets):
    evs = tuple(tuple(Fraction(x) for x in e) for e in edge_vectors)
    d = len(evs[0])
    assert all(sum(e[i] for e in evs) == 0 for i in range(d)), "not harmonic"
    _LATTICES[name] = LatticeSpec(
        name=name,
        dim=d,
        degree=len(evs),
        edge_vectors=evs,
        black_offset=tuple(Fraction(x) for x in black_offset),
        neighbor_offsets=tuple(tuple(int(x) for x in o) for o in neighbor_offsets),
    )


# Z2 rotated 45 degrees: B = Z^2, W = B + (1/2,-1/2); types NE, NW, SE, SW.
_register(
    LatticeName.Z2_DIAG,
    [_fr("1/2", "1/2"), _fr("-1/2", "1/2"), _fr("1/2", "-1/2"), _fr("-1/2", "-1/2")],
    _fr("-1/2", "1/2"),
    [(1, 0), (0, 0), (1, -1), (0, -1)],
)

# Cubic lattice colored by parity.  No single black-coset offset exists, so the
# integer displacement table realizes the even-translation Z^3 action (basis
# (1,1,0),(1,-1,0),(1,0,1), blacks at +eta_1); black_offset is nominal.
_register(
    LatticeName.Z3,
    [_fr("1/2", 0, 0), _fr("-1/2", 0, 0), _fr(0, "1/2", 0),
     _fr(0, "-1/2", 0), _fr(0, 0, "1/2"), _fr(0, 0, "-1/2")],
    _fr("1/2", 0, 0),
    [(0, 0, 0), (-1, -1, 0), (0, -1, 0), (-1, 0, 0), (-1, -1, 1), (0, 0, -1)],
)

# Body-centered cubic: B = Z^3, W = B + (1/2,1/2,1/2); type order matches the
# (-1,-1,-1) ... (1,1,1) direction table used by the Aztec cuboid.
_register(
    LatticeName.BCC,
    [_fr("-1/2", "-1/2", "-1/2"), _fr("-1/2", "-1/2", "1/2"),
     _fr("-1/2", "1/2", "-1/2"), _fr("1/2", "-1/2", "-1/2"),
     _fr("-1/2", "1/2", "1/2"), _fr("1/2", "-1/2", "1/2"),
     _fr("1/2", "1/2", "-1/2"), _fr("1/2", "1/2", "1/2")],
    _fr("-1/2", "-1/2", "-1/2"),
    [(0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0),
     (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)],
)

# Honeycomb as a linear image: B = Z^2, W = B + (1/3,1/3).
_register(
    LatticeName.HONEYCOMB,
    [_fr("-1/3", "-1/3"), _fr("2/3", "-1/3"), _fr("-1/3", "2/3")],
    _fr("-1/3", "-1/3"),
    [(0, 0), (1, 0), (0, 1)],
)

# Diamond cubic D_3: B = Z^3, W = B + (1/4,1/4,1/4).
_register(
    LatticeName.DIAMOND_CUBIC,
    [_fr("-1/4", "-1/4", "-1/4"), _fr("3/4", "-1/4", "-1/4"),
     _fr("-1/4", "3/4", "-1/4"), _fr("-1/4", "-1/4", "3/4")],
    _fr("-1/4", "-1/4", "-1/4"),
    [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)],
)


def build_lattice(name) -> LatticeSpec:
    """Return the lattice spec for a supported lattice name."""
    try:
        key = name if isinstance(name, LatticeName) else LatticeName(str(name).lower())
    except ValueError:
        raise ValueError(f"unknown lattice {name!r}; supported: "
                         f"{[m.value for m in LatticeName]}") from None
    return _LATTICES[key]


@dataclass(frozen=True)
class NewtonPolytope:
    """Convex hull of the edge vectors with a tolerance membership oracle."""

    vertices: np.ndarray        # (D, d) rows; may contain duplicates of hull vertices
    equations: np.ndarray       # (m, d+1) facet rows A|b with A.x + b <= 0 inside
    tol: float = 1e-9

    def contains(self, s, tol=None) -> bool:
        tol = self.tol if tol is None else tol
        s = np.asarray(s, dtype=float)
        return bool(np.all(self.equations[:, :-1] @ s + self.equations[:, -1] <= tol))

    def in_interior(self, s, tol=None) -> bool:
        tol = self.tol if tol is None else tol
        s = np.asarray(s, dtype=float)
        return bool(np.all(self.equations[:, :-1] @ s + self.equations[:, -1] < -tol))

    def distance_to_boundary(self, s) -> float:
        """Signed distance to the boundary (positive inside)."""
        s = np.asarray(s, dtype=float)
        slack = -(self.equations[:, :-1] @ s + self.equations[:, -1])
        norms = np.linalg.norm(self.equations[:, :-1], axis=1)
        return float(np.min(slack / norms))


def newton_polytope(lattice: LatticeSpec, tol: float = 1e-9) -> NewtonPolytope:
    pts = lattice.edge_vectors_float
    hull = ConvexHull(pts)
    return NewtonPolytope(vertices=pts, equations=hull.equations.copy(), tol=tol)


@dataclass(frozen=True)
class RegionGraph:
    """A finite subregion of a lattice with colors, boundary flags, and multiplicities.

    Edges are ``(white_index, black_index, type)`` with 1-based type matching
    ``lattice.edge_vectors[type - 1]``.  Immutable after construction.
    """

    lattice: LatticeSpec
    white_coords: tuple
    black_coords: tuple
    edges: tuple
    white_boundary: tuple
    black_boundary: tuple
    white_N: tuple
    black_N: tuple
    interior_N: int = 1
    scale: int = 1
    torus_n: int | None = None
    white_positions: tuple | None = None
    black_positions: tuple | None = None

    def __post_init__(self):
        nw, nb = len(self.white_coords), len(self.black_coords)
        for wi, bi, t in self.edges:
            if not (0 <= wi < nw and 0 <= bi < nb and 1 <= t <= self.lattice.degree):
                raise ValueError(f"bad edge ({wi},{bi},{t})")
        # Uniform regions have N_v = interior_N off the boundary; regions with
        # prescribed marginals (Aztec cuboid) may not, so only the range is
        # enforced here and the uniform builders assert the rest.
        for N, side in ((self.white_N, "white"), (self.black_N, "black")):
            for v, n in enumerate(N):
                if not 1 <= n <= self.interior_N:
                    raise ValueError(f"{side} vertex {v}: N_v={n} outside [1, {self.interior_N}]")
        if sum(self.white_N) != sum(self.black_N):
            raise ValueError("white and black multiplicity totals differ; no cover can exist")

    # -- sizes ----------------------------------------------------------
    @property
    def n_white(self) -> int:
        return len(self.white_coords)

    @property
    def n_black(self) -> int:
        return len(self.black_coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_torus(self) -> bool:
        return self.torus_n is not None

    # -- cached arrays ---------------------------------------------------
    @cached_property
    def edge_white(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_black(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_type(self) -> np.ndarray:
        return np.array([e[2] for e in self.edges], dtype=np.int64)

    @cached_property
    def beta_white(self) -> np.ndarray:
        return np.array(self.white_N, dtype=float) / self.interior_N

    @cached_property
    def beta_black(self) -> np.ndarray:
        return np.array(self.black_N, dtype=float) / self.interior_N

    @cached_property
    def white_adjacency(self) -> tuple:
        adj = [[] for _ in range(self.n_white)]
        for ei, (wi, _bi, _t) in enumerate(self.edges):
            adj[wi].append(ei)
        return tuple(tuple(a) for a in adj)

    @cached_property
    def black_adjacency(self) -> tuple:
        adj = [[] for _ in range(self.n_black)]
        for ei, (_wi, bi, _t) in enumerate(self.edges):
            adj[bi].append(ei)
        return tuple(tuple(a) for a in adj)

    # -- geometry ---------------------------------------------------------
    def white_position(self, i) -> tuple:
        if self.white_positions is not None:
            return self.white_positions[i]
        return self.lattice.white_position(self.white_coords[i])

    def black_position(self, i) -> tuple:
        if self.black_positions is not None:
            return self.black_positions[i]
        return self.lattice.black_position(self.black_coords[i])

    def vertices(self):
        """Unified (coord, color, boundary, N) view, whites first."""
        for c, b, n in zip(self.white_coords, self.white_boundary, self.white_N):
            yield c, WHITE, b, n
        for c, b, n in zip(self.black_coords, self.black_boundary, self.black_N):
            yield c, BLACK, b, n

    def with_multiplicity(self, N: int) -> "RegionGraph":
        """Scale all multiplicities so the interior multiplicity becomes N."""
        if N % self.interior_N:
            raise ValueError(f"N={N} not a multiple of interior_N={self.interior_N}")
        k = N // self.interior_N
        return replace(self,
                       white_N=tuple(n * k for n in self.white_N),
                       black_N=tuple(n * k for n in self.black_N),
                       interior_N=N)


def region_to_json(region: RegionGraph) -> str:
    data = {
        "lattice": region.lattice.name.value,
        "interior_N": region.interior_N,
        "scale": region.scale,
        "torus_n": region.torus_n,
        "vertices": [
            {"coord": list(c), "color": col, "boundary": bool(b), "N": n}
            for c, col, b, n in region.vertices()
        ],
        "edges": [{"w": wi, "b": bi, "type": t} for wi, bi, t in region.edges],
    }
    return json.dumps(data, indent=1, sort_keys=True)


def region_from_json(text: str) -> RegionGraph:
    data = json.loads(text)
    lattice = build_lattice(data["lattice"])
    whites = [v for v in data["vertices"] if v["color"] == WHITE]
    blacks = [v for v in data["vertices"] if v["color"] == BLACK]
    return RegionGraph(
        lattice=lattice,
        white_coords=tuple(tuple(v["coord"]) for v in whites),
        black_coords=tuple(tuple(v["coord"]) for v in blacks),
        edges=tuple((e["w"], e["b"], e["type"]) for e in data["edges"]),
        white_boundary=tuple(bool(v["boundary"]) for v in whites),
        black_boundary=tuple(bool(v["boundary"]) for v in blacks),
        white_N=tuple(int(v["N"]) for v in whites),
        black_N=tuple(int(v["N"]) for v in blacks),
        interior_N=int(data["interior_N"]),
        scale=int(data.get("scale", 1)),
        torus_n=data.get("torus_n"),
    )


# ---------------------------------------------------------------------------
# Region builders
# ---------------------------------------------------------------------------

def _make_region(lattice, whites, blacks, interior_N=1, white_N=None, black_N=None,
                 scale=1, torus_n=None, white_positions=None, black_positions=None,
                 neighbor_offsets=None):
    """Assemble a RegionGraph from white/black coordinate sets.

    Edges and boundary flags follow the lattice adjacency (white + offset = black);
    a vertex is boundary when one of its lattice neighbors is missing.
    """
    offsets = lattice.neighbor_offsets if neighbor_offsets is None else neighbor_offsets
    whites = list(whites)
    blacks = list(blacks)
    windex = {c: i for i, c in enumerate(whites)}
    bindex = {c: i for i, c in enumerate(blacks)}
    edges = []
    wb = [False] * len(whites)
    bb = [False] * len(blacks)
    bdeg = [0] * len(blacks)
    for wi, w in enumerate(whites):
        for t, off in enumerate(offsets, start=1):
            b = tuple(a + o for a, o in zip(w, off))
            bi = bindex.get(b)
            if bi is None:
                wb[wi] = True
            else:
                edges.append((wi, bi, t))
                bdeg[bi] += 1
    for bi, d in enumerate(bdeg):
        if d < lattice.degree:
            bb[bi] = True
    white_N = tuple(white_N) if white_N is not None else (interior_N,) * len(whites)
    black_N = tuple(black_N) if black_N is not None else (interior_N,) * len(blacks)
    return RegionGraph(
        lattice=lattice,
        white_coords=tuple(whites), black_coords=tuple(blacks),
        edges=tuple(edges),
        white_boundary=tuple(wb), black_boundary=tuple(bb),
        white_N=white_N, black_N=black_N,
        interior_N=interior_N, scale=scale, torus_n=torus_n,
        white_positions=white_positions, black_positions=black_positions,
    )


def _box(n, d):
    if d == 2:
        return [(i, j) for i in range(n) for j in range(n)]
    return [(i, j, k) for i in range(n) for j in range(n) for k in range(n)]


def build_torus(lattice: LatticeSpec, n: int, interior_N: int = 1) -> RegionGraph:
    """Cubic torus with n^d white and n^d black vertices; edges wrap mod n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    coords = _box(n, lattice.dim)
    index = {c: i for i, c in enumerate(coords)}
    edges = []
    for wi, w in enumerate(coords):
        for t, off in enumerate(lattice.neighbor_offsets, start=1):
            b = tuple((a + o) % n for a, o in zip(w, off))
            edges.append((wi, index[b], t))
    m = len(coords)
    return RegionGraph(
        lattice=lattice,
        white_coords=tuple(coords), black_coords=tuple(coords),
        edges=tuple(edges),
        white_boundary=(False,) * m, black_boundary=(False,) * m,
        white_N=(interior_N,) * m, black_N=(interior_N,) * m,
        interior_N=interior_N, torus_n=n,
    )


def build_aztec_diamond(n: int, interior_N: int = 1) -> RegionGraph:
    """Size-n Aztec diamond: blacks {0..n}x{0..n-1}, whites {0..n-1}x{0..n}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    whites = [(i, j) for i in range(n) for j in range(n + 1)]
    blacks = [(i, j) for i in range(n + 1) for j in range(n)]
    return _make_region(build_lattice(LatticeName.Z2_DIAG), whites, blacks,
                        interior_N=interior_N, scale=n)


def aztec_cuboid_constraint(a: int, b: int, c: int) -> tuple:
    """Both sides of the cuboid balance identity (a+1)(b+1)(c+1) = a(b+2)(c+2)."""
    return (a + 1) * (b + 1) * (c + 1), a * (b + 2) * (c + 2)


def build_aztec_cuboid(a: int, b: int, c: int, interior_N: int | None = None) -> RegionGraph:
    """Aztec cuboid AC(a,b,c) in the BCC lattice (positive-gauge core).

    Blacks fill {0..a}x{0..b}x{0..c} and whites {0..a-1}x{0..b-1}x{0..c-1};
    black multiplicities carry the non-uniform marginals forced by the
    closed-form critical gauge.  interior_N defaults to (a+1)(b+1)(c+1) so all
    N_v are integral.
    """
    lhs, rhs = aztec_cuboid_constraint(a, b, c)
    if lhs != rhs:
        raise ValueError(
            f"cuboid constraint violated: (a+1)(b+1)(c+1)={lhs} != a(b+2)(c+2)={rhs}")
    denom = (a + 1) * (b + 1) * (c + 1)
    if interior_N is None:
        interior_N = denom
    if (interior_N * b * c) % denom:
        raise ValueError(f"interior_N={interior_N} must make N_v*bc/{denom} integral")
    whites = [(i, j, k) for i in range(a) for j in range(b) for k in range(c)]
    blacks = [(i, j, k) for i in range(a + 1) for j in range(b + 1) for k in range(c + 1)]
    unit = interior_N * b * c // denom
    black_N = tuple(unit * ((a + 2) if 1 <= i <= a - 1 else 1) for (i, j, k) in blacks)
    return _make_region(build_lattice(LatticeName.BCC), whites, blacks,
                        interior_N=interior_N,
                        black_N=black_N, scale=max(a, 1))


def _reduced(num: int, den: int) -> tuple:
    g = gcd(num, den)
    return num // g, den // g


def build_truncated_quadrant(K: int, depth: int, interior_N: int | None = None) -> RegionGraph:
    """Finite truncation of the honeycomb truncated quadrant G_K.

    Blacks on diagonals K <= i+j <= K+depth, whites on K-1 <= i+j <= K+depth-1.
    The outermost black diagonal has marginal K/(K+depth+1), forced by the
    closed-form gauge; interior_N defaults to the reduced denominator.
    """
    if K < 1 or depth < 1:
        raise ValueError("K and depth must be >= 1")
    L = K + depth
    num, den = _reduced(K, L + 1)
    if interior_N is None:
        interior_N = den
    if (interior_N * num) % den:
        raise ValueError(f"interior_N={interior_N} must be a multiple of {den}")
    blacks = [(i, j) for i in range(L + 1) for j in range(L + 1) if K <= i + j <= L]
    whites = [(i, j) for i in range(L) for j in range(L) if K - 1 <= i + j <= L - 1]
    outer = interior_N * num // den
    black_N = tuple(outer if i + j == L else interior_N for (i, j) in blacks)
    return _make_region(build_lattice(LatticeName.HONEYCOMB), whites, blacks,
                        interior_N=interior_N, black_N=black_N, scale=max(K, 1))


def build_truncated_orthant3(K: int, depth: int, interior_N: int | None = None) -> RegionGraph:
    """Finite truncation of the diamond-cubic truncated orthant.

    Blacks on planes K <= i+j+k <= K+depth, whites on K-1 <= i+j+k <= K+depth-1;
    outermost black plane carries marginal K(K+1)/((L+1)(L+2)), L = K+depth.
    """
    if K < 1 or depth < 1:
        raise ValueError("K and depth must be >= 1")
    L = K + depth
    num, den = _reduced(K * (K + 1), (L + 1) * (L + 2))
    if interior_N is None:
        interior_N = den
    if (interior_N * num) % den:
        raise ValueError(f"interior_N={interior_N} must be a multiple of {den}")
    rng = range(L + 1)
    blacks = [(i, j, k) for i in rng for j in rng for k in rng if K <= i + j + k <= L]
    whites = [(i, j, k) for i in rng for j in rng for k in rng if K - 1 <= i + j + k <= L - 1]
    outer = interior_N * num // den
    black_N = tuple(outer if i + j + k == L else interior_N for (i, j, k) in blacks)
    return _make_region(build_lattice(LatticeName.DIAMOND_CUBIC), whites, blacks,
                        interior_N=interior_N, black_N=black_N, scale=max(K, 1))


def build_hexagon(n: int, interior_N: int = 1) -> RegionGraph:
    """Side-n hexagon in the honeycomb lattice (3n^2 vertices of each color)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    whites = [(i, j) for i in range(2 * n) for j in range(2 * n)
              if n - 1 <= i + j <= 3 * n - 2]
    blacks = [(i, j) for i in range(2 * n) for j in range(2 * n)
              if n <= i + j <= 3 * n - 1]
    return _make_region(build_lattice(LatticeName.HONEYCOMB), whites, blacks,
                        interior_N=interior_N, scale=n)


def build_octahedron_z3(n: int, interior_N: int = 1) -> RegionGraph:
    """Aztec-octahedron-style region in Z^3: integer points p with
    |p1-1/2|+|p2-1/2|+|p3-1/2| <= n+1/2, colored by coordinate-sum parity.

    The balance involution p -> (1,1,1)-p swaps colors, so the region is
    balanced for any n.  Positions are p/2 so edge displacements match the Z3
    edge vectors exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = []
    r = n + 2
    for x in range(-r, r + 1):
        for y in range(-r, r + 1):
            for z in range(-r, r + 1):
                if abs(2 * x - 1) + abs(2 * y - 1) + abs(2 * z - 1) <= 2 * n + 1:
                    pts.append((x, y, z))
    whites = [p for p in pts if sum(p) % 2 == 0]
    blacks = [p for p in pts if sum(p) % 2 == 1]
    bindex = {c: i for i, c in enumerate(blacks)}
    lattice = build_lattice(LatticeName.Z3)
    # type order matches the Z3 edge vectors: +x,-x,+y,-y,+z,-z
    units = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    edges = []
    wb = [False] * len(whites)
    bb = [False] * len(blacks)
    bdeg = [0] * len(blacks)
    for wi, w in enumerate(whites):
        for t, u in enumerate(units, start=1):
            q = (w[0] + u[0], w[1] + u[1], w[2] + u[2])
            bi = bindex.get(q)
            if bi is None:
                wb[wi] = True
            else:
                edges.append((wi, bi, t))
                bdeg[bi] += 1
    for bi, d in enumerate(bdeg):
        if d < 6:
            bb[bi] = True
    half = Fraction(1, 2)
    return RegionGraph(
        lattice=lattice,
        white_coords=tuple(whites), black_coords=tuple(blacks),
        edges=tuple(edges),
        white_boundary=tuple(wb), black_boundary=tuple(bb),
        white_N=(interior_N,) * len(whites), black_N=(interior_N,) * len(blacks),
        interior_N=interior_N, scale=n,
        white_positions=tuple(tuple(half * c for c in p) for p in whites),
        black_positions=tuple(tuple(half * c for c in p) for p in blacks),
    )
