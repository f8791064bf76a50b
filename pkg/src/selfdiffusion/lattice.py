"""Periodic lattice geometry and environment-configuration transformations.

The tagged particle sits at the origin of the centered box {-M..M}^d; the
remaining N = (2M+1)^d - 1 sites carry the environment occupancies.  A
configuration is stored as an integer whose bit i is the occupancy of site i
in a fixed row-major site order.  Outside the box the environment is read
through its periodic extension, with one convention: every periodic copy of
the origin is treated as permanently occupied, so the tagged particle is
visible to the environment across the boundary.

Two elementary moves act on configurations.  An environment swap exchanges
the occupancies of a site y and the wrapped target of y + v for a jump
vector v.  A tagged jump moves the tagged particle by v and relabels the
whole environment into the frame centered at the new tagged position: site s
afterwards holds what wrap(s + v) held before, the vacated relative position
-v becomes empty, and reads that land on an origin copy come back occupied.
Both moves are also available as explicit relabeling tables (source site per
output site plus constant slots), which is the form the fast kernels consume.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

#: Sentinel site index for "a periodic copy of the origin" (always occupied).
ORIGIN_COPY = -1


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of the environment lattice and the jump law of the walk.

    Attributes:
        M: box radius, sites live in {-M..M}^d minus the origin.
        d: spatial dimension.
        jump_vectors: (K, d) int array of admissible jump vectors, nonzero.
        jump_probs: (K,) probabilities/rates attached to the jumps.
        sites: (N, d) int array listing the environment sites row-major.
    """

    M: int
    d: int
    jump_vectors: np.ndarray
    jump_probs: np.ndarray
    sites: np.ndarray
    _site_index: dict = field(repr=False, hash=False, compare=False)

    @property
    def num_sites(self) -> int:
        return self.sites.shape[0]

    @property
    def num_jumps(self) -> int:
        return self.jump_vectors.shape[0]

    @property
    def num_configs(self) -> int:
        return 1 << self.num_sites

    def site_id(self, point) -> int:
        """Index of a lattice point inside the box, or raise KeyError."""
        return self._site_index[tuple(int(c) for c in point)]


def build_lattice(M: int, d: int, jumps) -> LatticeSpec:
    """Construct a LatticeSpec from box radius, dimension and jump law.

    ``jumps`` is an iterable of (vector, probability) pairs.  Vectors must be
    nonzero integer d-tuples, probabilities must lie in (0, 1].  Jumps longer
    than the box radius are allowed but touch periodic origin copies; that
    regime is flagged with a warning because it is never exercised by the
    reference setup.
    """
    if int(M) < 1:
        raise ValueError(f"box radius M must be >= 1, got {M}")
    if int(d) < 1:
        raise ValueError(f"dimension d must be >= 1, got {d}")
    M, d = int(M), int(d)

    jumps = list(jumps)
    if not jumps:
        raise ValueError("at least one jump vector is required")
    vecs = np.array([v for v, _ in jumps], dtype=np.int64)
    probs = np.array([p for _, p in jumps], dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[1] != d:
        raise ValueError(f"jump vectors must have length d={d}")
    if np.any(np.all(vecs == 0, axis=1)):
        raise ValueError("jump vectors must be nonzero")
    if np.any(probs <= 0.0) or np.any(probs > 1.0):
        raise ValueError("jump probabilities must lie in (0, 1]")
    if np.max(np.abs(vecs)) > M:
        warnings.warn(
            "jump vectors reach past the box radius; moves will read periodic "
            "origin copies, a regime kept for generality but not validated "
            "against reference data",
            stacklevel=2,
        )

    # Row-major enumeration of {-M..M}^d with the origin removed.
    axis = range(-M, M + 1)
    pts = [p for p in itertools.product(axis, repeat=d) if any(c != 0 for c in p)]
    sites = np.array(pts, dtype=np.int64)
    index = {p: i for i, p in enumerate(pts)}

    vecs.setflags(write=False)
    probs.setflags(write=False)
    sites.setflags(write=False)
    return LatticeSpec(M=M, d=d, jump_vectors=vecs, jump_probs=probs,
                       sites=sites, _site_index=index)


def reference_lattice_2d() -> LatticeSpec:
    """The reference setup: M=1, d=2, four unit jumps with probability 1/4."""
    units = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    return build_lattice(1, 2, [(v, 0.25) for v in units])


def wrap_site(spec: LatticeSpec, point) -> int:
    """Wrap an integer point into the box, returning a site index.

    Components are reduced modulo 2M+1 into {-M..M}.  Points congruent to the
    origin wrap onto a periodic origin copy and return ORIGIN_COPY, whose
    occupancy is 1 by convention.
    """
    span = 2 * spec.M + 1
    wrapped = tuple((int(c) + spec.M) % span - spec.M for c in point)
    if all(c == 0 for c in wrapped):
        return ORIGIN_COPY
    return spec._site_index[wrapped]


def config_level(cfg: int) -> int:
    """Number of occupied environment sites."""
    return int(cfg).bit_count()


def _check_config(spec: LatticeSpec, cfg: int) -> None:
    if not 0 <= cfg < spec.num_configs:
        raise ValueError(f"configuration {cfg} outside [0, 2^{spec.num_sites})")


def _check_jump(spec: LatticeSpec, k: int) -> None:
    if not 0 <= k < spec.num_jumps:
        raise ValueError(f"jump index {k} outside [0, {spec.num_jumps})")


def apply_swap(spec: LatticeSpec, cfg: int, y: int, k: int) -> int:
    """Exchange the occupancies of site y and the wrapped target of y + v_k.

    The particle-particle move of the exclusion dynamics.  Rejected when
    y + v_k is the tagged origin (that exchange is the tagged jump's job) and
    when the wrapped target is an origin copy, whose occupancy is constant.
    Leaves the particle number unchanged.
    """
    _check_config(spec, cfg)
    _check_jump(spec, k)
    target = spec.sites[y] + spec.jump_vectors[k]
    if not target.any():
        raise ValueError("swap target is the tagged origin; use the tagged jump")
    w = wrap_site(spec, target)
    if w == ORIGIN_COPY:
        raise ValueError("swap target wraps onto an occupied origin copy")
    if w == y:
        return cfg
    by = (cfg >> y) & 1
    bw = (cfg >> int(w)) & 1
    if by == bw:
        return cfg
    return cfg ^ ((1 << y) | (1 << int(w)))


def apply_tagged_jump(spec: LatticeSpec, cfg: int, k: int) -> int:
    """Relabel the environment after the tagged particle jumps by v_k.

    The new occupancy at site s is: 0 if s = -v_k (the vacated position),
    1 if wrap(s + v_k) is an origin copy, and otherwise the old occupancy at
    wrap(s + v_k).  The map is total; whether the jump is physically allowed
    (target site empty) is the quadratic functional's concern, not this one's.
    """
    _check_config(spec, cfg)
    _check_jump(spec, k)
    rel = tagged_relabeling(spec, k)
    return apply_relabeling(rel, cfg)


@dataclass(frozen=True)
class Relabeling:
    """A configuration transformation as a per-site reading table.

    ``site_map[s]`` is the source site whose old occupancy lands at site s,
    with ORIGIN_COPY marking a constant-1 source.  ``constant_zero_site``, if
    not None, is forced to 0 regardless of its source entry.  Swap tables are
    permutations (transpositions) with no constant slots.
    """

    kind: str  # 'swap' or 'tagged'
    site_map: np.ndarray
    constant_zero_site: int | None = None

    def __post_init__(self):
        if self.kind not in ("swap", "tagged"):
            raise ValueError(f"unknown relabeling kind {self.kind!r}")
        self.site_map.setflags(write=False)


def apply_relabeling(rel: Relabeling, cfg: int) -> int:
    """Read a configuration through a relabeling table."""
    out = 0
    for s, src in enumerate(rel.site_map):
        if s == rel.constant_zero_site:
            continue
        if src == ORIGIN_COPY:
            out |= 1 << s
        else:
            out |= ((cfg >> int(src)) & 1) << s
    return out


def swap_relabeling(spec: LatticeSpec, y: int, k: int) -> Relabeling:
    """Relabeling table of the environment swap at site y along jump k."""
    _check_jump(spec, k)
    target = spec.sites[y] + spec.jump_vectors[k]
    if not target.any():
        raise ValueError("swap target is the tagged origin; use the tagged jump")
    w = wrap_site(spec, target)
    if w == ORIGIN_COPY:
        raise ValueError("swap target wraps onto an occupied origin copy")
    site_map = np.arange(spec.num_sites, dtype=np.int64)
    site_map[y], site_map[w] = site_map[w], site_map[y]
    return Relabeling(kind="swap", site_map=site_map)


def tagged_relabeling(spec: LatticeSpec, k: int) -> Relabeling:
    """Relabeling table of the tagged jump along v_k."""
    _check_jump(spec, k)
    v = spec.jump_vectors[k]
    site_map = np.empty(spec.num_sites, dtype=np.int64)
    for s in range(spec.num_sites):
        site_map[s] = wrap_site(spec, spec.sites[s] + v)
    czs = None
    back = tuple(int(-c) for c in v)
    if back in spec._site_index:
        czs = spec._site_index[back]
    return Relabeling(kind="tagged", site_map=site_map, constant_zero_site=czs)


# Kind codes used by the packed move tables.
OUT_READ, OUT_ONE, OUT_ZERO = 0, 1, 2


@dataclass(frozen=True)
class MoveTables:
    """All moves of a lattice packed into flat arrays for the kernels.

    Tagged jump k: ``gate_sites[k]`` is the wrapped landing site whose
    emptiness gates the move (-1 when the landing site is an origin copy, in
    which case the move is permanently blocked), ``tag_src[k, s]`` the source
    read by output s (ORIGIN_COPY for constant-1 slots), ``tag_czs[k]`` the
    vacated output forced to 0 (-1 when none), ``out_kind[k, s]`` the slot
    kind and ``sigma[k, t]`` the output that reads source t (-1 when t is
    unread, which only happens at the gate site).

    Swaps are a flat list over (k, y) of transposed site pairs with the jump
    index alongside; pairs that would touch the origin or an origin copy are
    excluded.
    """

    gate_sites: np.ndarray   # (K,)
    tag_src: np.ndarray      # (K, N)
    tag_czs: np.ndarray      # (K,)
    sigma: np.ndarray        # (K, N)
    out_kind: np.ndarray     # (K, N) uint8
    swap_jump: np.ndarray    # (S,)
    swap_y: np.ndarray       # (S,)
    swap_w: np.ndarray       # (S,)
    probs: np.ndarray        # (K,)


def move_tables(spec: LatticeSpec) -> MoveTables:
    """Build the packed move tables for a lattice."""
    N, K = spec.num_sites, spec.num_jumps
    gate = np.empty(K, dtype=np.int64)
    src = np.empty((K, N), dtype=np.int64)
    czs = np.empty(K, dtype=np.int64)
    sigma = np.full((K, N), -1, dtype=np.int64)
    kind = np.empty((K, N), dtype=np.uint8)
    sj, sy, sw = [], [], []
    for k in range(K):
        rel = tagged_relabeling(spec, k)
        src[k] = rel.site_map
        czs[k] = -1 if rel.constant_zero_site is None else rel.constant_zero_site
        gate[k] = wrap_site(spec, spec.jump_vectors[k])
        for s in range(N):
            if s == czs[k]:
                kind[k, s] = OUT_ZERO
            elif rel.site_map[s] == ORIGIN_COPY:
                kind[k, s] = OUT_ONE
            else:
                kind[k, s] = OUT_READ
                sigma[k, rel.site_map[s]] = s
        for y in range(N):
            target = spec.sites[y] + spec.jump_vectors[k]
            if not target.any():
                continue
            w = wrap_site(spec, target)
            if w == ORIGIN_COPY or w == y:
                continue
            sj.append(k)
            sy.append(y)
            sw.append(w)
    return MoveTables(
        gate_sites=gate,
        tag_src=src,
        tag_czs=czs,
        sigma=sigma,
        out_kind=kind,
        swap_jump=np.array(sj, dtype=np.int64),
        swap_y=np.array(sy, dtype=np.int64),
        swap_w=np.array(sw, dtype=np.int64),
        probs=np.asarray(spec.jump_probs, dtype=np.float64),
    )


def jump_dots(spec: LatticeSpec, u) -> np.ndarray:
    """Inner products u . v_k for all jumps, as a float array."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.d,):
        raise ValueError(f"direction must have shape ({spec.d},), got {u.shape}")
    return spec.jump_vectors @ u
