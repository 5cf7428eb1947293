"""Symbolic direction-cone calculus on the cotangent circle.

Directions in 1+1D are points of the unit circle, stored as exact fractions
of a full turn so closed/open membership at sector endpoints is never a
floating-point judgement call.  A :class:`DirectionCone` is a finite union of
closed angular sectors; a :class:`ProductCone` is a finite union of n-fold
slot patterns where each slot is either a cone or the zero covector, with the
all-zero pattern excluded.

Cones are spacetime-constant: one direction cone models the singular
directions at every base point, which is all the sampled verifications here
need.  The verification routines draw directions on an exact integer subgrid
of the circle, so every membership decision in the sampled checks is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .quantize import sigma_permutation

HALF = Fraction(1, 2)
FULL = Fraction(1)


def _norm_turn(a: Fraction) -> Fraction:
    return a - (a // 1)


@dataclass(frozen=True)
class DirectionCone:
    """Finite union of angular sectors [lo, hi] in turns, normalised and disjoint."""

    sectors: tuple[tuple[Fraction, Fraction], ...]
    open_flag: bool = False

    # -- constructors -----------------------------------------------------------
    @staticmethod
    def from_sectors(raw: Iterable[tuple], open_flag: bool = False) -> "DirectionCone":
        pieces: list[tuple[Fraction, Fraction]] = []
        for lo, hi in raw:
            lo, hi = Fraction(lo), Fraction(hi)
            if hi < lo:
                hi += 1
            if hi - lo >= 1:
                return DirectionCone(sectors=((Fraction(0), FULL),), open_flag=open_flag)
            lo_n = _norm_turn(lo)
            hi_n = lo_n + (hi - lo)
            if hi_n <= 1:
                pieces.append((lo_n, hi_n))
            else:
                pieces.append((lo_n, FULL))
                pieces.append((Fraction(0), hi_n - 1))
        pieces.sort()
        merged: list[list[Fraction]] = []
        for lo, hi in pieces:
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        if len(merged) == 1 and merged[0] == [Fraction(0), FULL]:
            return DirectionCone.full_circle()
        # canonical form keeps wrap-through-zero sets split at angle 0
        return DirectionCone(sectors=tuple((lo, hi) for lo, hi in merged), open_flag=open_flag)

    @staticmethod
    def from_degrees(lo, hi, open_flag: bool = False) -> "DirectionCone":
        return DirectionCone.from_sectors([(Fraction(lo) / 360, Fraction(hi) / 360)],
                                          open_flag=open_flag)

    @staticmethod
    def empty() -> "DirectionCone":
        return DirectionCone(sectors=())

    @staticmethod
    def full_circle() -> "DirectionCone":
        return DirectionCone(sectors=((Fraction(0), FULL),))

    # -- queries ------------------------------------------------------------------
    def is_empty(self) -> bool:
        return not self.sectors

    def is_full(self) -> bool:
        return self.sectors == ((Fraction(0), FULL),)

    def opening_turns(self) -> Fraction:
        return sum((hi - lo for lo, hi in self.sectors), Fraction(0))

    def contains(self, angle) -> bool:
        a = _norm_turn(Fraction(angle))
        for lo, hi in self.sectors:
            for cand in (a, a + 1):
                if self.open_flag:
                    if lo < cand < hi:
                        return True
                elif lo <= cand <= hi:
                    return True
        return False

    def is_physical(self) -> bool:
        """Opening below a half turn and disjoint from its own negation."""
        return (not self.is_empty() and self.opening_turns() < HALF
                and intersect(self, negate(self)).is_empty())

    def sample_grid(self, denominator: int) -> list[int]:
        """All representable angles (units of 1/denominator turn) in the cone."""
        out = []
        for lo, hi in self.sectors:
            lo_i = _scale_to_int(lo, denominator)
            hi_i = _scale_to_int(hi, denominator)
            out.extend(range(lo_i, hi_i + 1))
        return [a % denominator for a in out]


def _scale_to_int(x: Fraction, denominator: int) -> int:
    scaled = x * denominator
    if scaled.denominator != 1:
        raise ValueError(f"angle {x} not representable on a 1/{denominator} grid")
    return int(scaled)


# -- cone set algebra -------------------------------------------------------------

def negate(c: DirectionCone) -> DirectionCone:
    """Rotate every sector by half a turn (the cone -c)."""
    return DirectionCone.from_sectors([(lo + HALF, hi + HALF) for lo, hi in c.sectors],
                                      open_flag=c.open_flag)


def union(c1: DirectionCone, c2: DirectionCone) -> DirectionCone:
    return DirectionCone.from_sectors(list(c1.sectors) + list(c2.sectors),
                                      open_flag=c1.open_flag and c2.open_flag)


def intersect(c1: DirectionCone, c2: DirectionCone) -> DirectionCone:
    pieces = []
    for lo1, hi1 in c1.sectors:
        for lo2, hi2 in c2.sectors:
            for shift in (-1, 0, 1):
                lo = max(lo1, lo2 + shift)
                hi = min(hi1, hi2 + shift)
                if lo <= hi:
                    pieces.append((lo, hi))
    out = DirectionCone.from_sectors(pieces, open_flag=c1.open_flag or c2.open_flag)
    return out


def complement(c: DirectionCone) -> DirectionCone:
    """Open complement of a closed cone (closed complement of an open one)."""
    if c.is_empty():
        return DirectionCone.full_circle()
    if c.is_full():
        return DirectionCone.empty()
    gaps = []
    sectors = sorted(c.sectors)
    for (lo1, hi1), (lo2, hi2) in zip(sectors, sectors[1:]):
        if hi1 < lo2:
            gaps.append((hi1, lo2))
    wrap_lo = sectors[-1][1]
    wrap_hi = sectors[0][0] + 1
    if wrap_lo < wrap_hi:
        gaps.append((wrap_lo, wrap_hi))
    return DirectionCone.from_sectors(gaps, open_flag=not c.open_flag)


def closure(c: DirectionCone) -> DirectionCone:
    return DirectionCone(sectors=c.sectors, open_flag=False)


def complement_closure(c: DirectionCone) -> DirectionCone:
    return closure(complement(c))


def cone_ops(op: str, c1: DirectionCone, c2: DirectionCone | None = None) -> DirectionCone:
    """Dispatcher over the basic sector-algebra operations."""
    if op == "negate":
        return negate(c1)
    if op == "union":
        return union(c1, c2)
    if op == "intersect":
        return intersect(c1, c2)
    if op == "complement-closure":
        return complement_closure(c1)
    raise ValueError(f"unknown cone operation {op!r}")


# ---------------------------------------------------------------------------
# Product cones
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductCone:
    """Finite union of slot patterns over {cone, zero}; never the all-zero pattern."""

    factors: int
    components: frozenset  # frozenset of tuples with entries DirectionCone | None

    def __post_init__(self):
        for comp in self.components:
            if len(comp) != self.factors:
                raise ValueError("component arity mismatch")
            if all(slot is None for slot in comp):
                raise ValueError("the all-zero pattern is never a member")

    def contains(self, dirs: Sequence) -> bool:
        """Membership of a direction tuple; entries are angles or None for zero."""
        if len(dirs) != self.factors:
            raise ValueError("direction tuple arity mismatch")
        for comp in self.components:
            ok = True
            for slot, d in zip(comp, dirs):
                if slot is None:
                    if d is not None:
                        ok = False
                        break
                else:
                    if d is None or not slot.contains(d):
                        ok = False
                        break
            if ok:
                return True
        return False

    def negate(self) -> "ProductCone":
        comps = frozenset(tuple(None if s is None else negate(s) for s in comp)
                          for comp in self.components)
        return ProductCone(factors=self.factors, components=comps)

    def union(self, other: "ProductCone") -> "ProductCone":
        if self.factors != other.factors:
            raise ValueError("cannot union product cones of different arity")
        return ProductCone(factors=self.factors,
                           components=self.components | other.components)


def product_cone_of(c: DirectionCone) -> ProductCone:
    return ProductCone(factors=1, components=frozenset({(c,)}))


def dotted_product(A: ProductCone, B: ProductCone) -> ProductCone:
    """A x. B = [A x B] u [0 x B] u [A x 0]; the all-zero tuple stays excluded."""
    zeros_a = (None,) * A.factors
    zeros_b = (None,) * B.factors
    comps = set()
    for a in A.components:
        for b in B.components:
            comps.add(a + b)
        comps.add(a + zeros_b)
    for b in B.components:
        comps.add(zeros_a + b)
    return ProductCone(factors=A.factors + B.factors, components=frozenset(comps))


def dotted_power(c: DirectionCone, n: int) -> ProductCone:
    if n < 1:
        raise ValueError("dotted power needs n >= 1")
    out = product_cone_of(c)
    for _ in range(n - 1):
        out = dotted_product(out, product_cone_of(c))
    return out


def gamma_n(V: DirectionCone, n: int, validate: bool = True) -> ProductCone:
    """The forbidden cone: dotted n-th power of V united with that of -V."""
    if V.is_empty():
        raise ValueError("degenerate cone: empty direction set")
    if validate and V.opening_turns() >= HALF:
        raise ValueError("cone opening must stay below a half turn")
    return dotted_power(V, n).union(dotted_power(negate(V), n))


# ---------------------------------------------------------------------------
# Sampled verification of the product-cone lemma
# ---------------------------------------------------------------------------

@dataclass
class ConeLemmaReport:
    lemma: str
    params: dict
    samples: int
    violations: int
    examples_of_nearest_misses: list
    coverage: dict
    seed: int
    hypothesis_ok: bool

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {
            "lemma": self.lemma,
            "params": self.params,
            "samples": self.samples,
            "violations": self.violations,
            "examples_of_nearest_misses": self.examples_of_nearest_misses,
            "coverage": self.coverage,
            "seed": self.seed,
            "hypothesis_ok": self.hypothesis_ok,
        }


def _sector_ints(c: DirectionCone, D: int) -> list[tuple[int, int]]:
    return [(_scale_to_int(lo, D), _scale_to_int(hi, D)) for lo, hi in c.sectors]


def _grid_denominator(cones: Sequence[DirectionCone], refine: int = 720) -> int:
    denom = 1
    for c in cones:
        for lo, hi in c.sectors:
            denom = math.lcm(denom, lo.denominator, hi.denominator)
    return denom * refine


def _sample_from_sectors(rng, sectors: list[tuple[int, int]], size: int, D: int) -> np.ndarray:
    """Uniform exact-grid angles from a sector list (endpoints included)."""
    widths = np.array([hi - lo + 1 for lo, hi in sectors], dtype=np.int64)
    choice = rng.choice(len(sectors), size=size, p=widths / widths.sum())
    lo = np.array([s[0] for s in sectors], dtype=np.int64)[choice]
    w = widths[choice]
    return (lo + (rng.random(size) * w).astype(np.int64)) % D


def _in_sectors_int(arr: np.ndarray, sectors: list[tuple[int, int]], D: int) -> np.ndarray:
    out = np.zeros(arr.shape, dtype=bool)
    for lo, hi in sectors:
        out |= (arr >= lo) & (arr <= hi)
        if hi >= D:  # a sector closing at the full turn also contains angle 0
            out |= arr <= hi - D
    return out


def _block_membership(block: np.ndarray, v_sect, m_sect, D: int):
    """(in Gamma proper, all-zero) flags per sample row; -1 encodes the zero covector."""
    nz = block >= 0
    inV = np.where(nz, _in_sectors_int(block, v_sect, D), True)
    inM = np.where(nz, _in_sectors_int(block, m_sect, D), True)
    in_gamma = (inV.all(axis=1) | inM.all(axis=1)) & nz.any(axis=1)
    all_zero = ~nz.any(axis=1)
    return in_gamma, all_zero


def verify_cone_lemma(V: DirectionCone, n: int, m: int, k: int, samples: int,
                      seed: int = 0, zero_prob: float = 0.3,
                      refine: int = 720) -> ConeLemmaReport:
    """Sample the permuted product cone and test membership in the forbidden side.

    Draws direction tuples from the left-hand cone of the slot-matching lemma:
    n kernel pairs (one direction in V, the partner in -V, or the pair zero)
    and m+k slot directions from a single signed family with optional zeros;
    the slot permutation rearranges them into the two derivative blocks, and a
    violation is a sample whose blocks land in the dotted product of the
    complements.  The sampler works on an exact integer angle grid, so every
    membership decision is exact.
    """
    if V.is_empty():
        raise ValueError("degenerate cone: empty direction set")
    if n < 0 or m < 0 or k < 0 or samples < 1:
        raise ValueError("need n, m, k >= 0 and samples >= 1")
    hypothesis_ok = V.is_physical()
    if not hypothesis_ok:
        warnings.warn("direction cone violates the disjointness hypothesis; "
                      "running the sampled lemma check anyway", stacklevel=2)
    minusV = negate(V)
    D = _grid_denominator([V, minusV], refine)
    v_sect = _sector_ints(V, D)
    m_sect = _sector_ints(minusV, D)
    rng = np.random.default_rng(seed)
    width = 2 * n + m + k
    if width == 0:
        raise ValueError("nothing to sample: n = m = k = 0")

    src = np.full((samples, width), -1, dtype=np.int64)
    for i in range(n):
        pair_zero = rng.random(samples) < zero_prob
        live = ~pair_zero
        count = int(live.sum())
        xcol = np.full(samples, -1, dtype=np.int64)
        ycol = np.full(samples, -1, dtype=np.int64)
        if count:
            xcol[live] = _sample_from_sectors(rng, v_sect, count, D)
            ycol[live] = _sample_from_sectors(rng, m_sect, count, D)
        src[:, 2 * i] = xcol
        src[:, 2 * i + 1] = ycol
    family_plus = rng.random(samples) < 0.5
    for j in range(m + k):
        slot_zero = rng.random(samples) < zero_prob
        col = np.full(samples, -1, dtype=np.int64)
        for fam, sect in ((family_plus, v_sect), (~family_plus, m_sect)):
            live = fam & ~slot_zero
            count = int(live.sum())
            if count:
                col[live] = _sample_from_sectors(rng, sect, count, D)
        src[:, 2 * n + j] = col
    # the dotted structure excludes the all-zero tuple: redraw a slot there
    all_zero = (src < 0).all(axis=1)
    if all_zero.any():
        count = int(all_zero.sum())
        src[all_zero, 0 if n else 2 * n] = _sample_from_sectors(rng, v_sect, count, D)
        if n:
            src[all_zero, 1] = _sample_from_sectors(rng, m_sect, count, D)

    sigma = sigma_permutation(n, m, k)
    tgt = src[:, [inv - 1 for inv in sigma.inverse]]
    block1, block2 = tgt[:, : n + m], tgt[:, n + m:]
    g1, z1 = _block_membership(block1, v_sect, m_sect, D)
    g2, z2 = _block_membership(block2, v_sect, m_sect, D)
    c1 = ~g1 & ~z1
    c2 = ~g2 & ~z2
    member = (c1 & c2) | (z1 & c2) | (c1 & z2)
    violations = int(member.sum())

    near = c1 ^ c2
    examples = []
    for idx in np.flatnonzero(member if violations else near)[:5]:
        examples.append([None if a < 0 else round(360.0 * a / D, 3) for a in tgt[idx]])
    coverage = {
        "zero_fraction": float((src < 0).mean()),
        "family_plus_fraction": float(family_plus.mean()),
        "block1_in_forbidden": int(g1.sum()),
        "block2_in_forbidden": int(g2.sum()),
        "near_misses": int(near.sum()),
    }
    return ConeLemmaReport(
        lemma="slot-permuted kernel cone avoids the complement blocks",
        params={"n": n, "m": m, "k": k, "zero_prob": zero_prob,
                "grid_denominator": D,
                "cone_deg": [[float(lo * 360), float(hi * 360)] for lo, hi in V.sectors]},
        samples=samples, violations=violations,
        examples_of_nearest_misses=examples, coverage=coverage, seed=seed,
        hypothesis_ok=hypothesis_ok)


# ---------------------------------------------------------------------------
# Conormal disjointness
# ---------------------------------------------------------------------------

@dataclass
class ConormalReport:
    params: dict
    samples: int
    violations: int
    examples: list
    seed: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"params": self.params, "samples": self.samples,
                "violations": self.violations, "examples": self.examples,
                "seed": self.seed}


def _unit_vector(turns: Fraction) -> tuple[float, float]:
    """Unit vector for an exact angle; quadrant angles come out exactly."""
    t = _norm_turn(turns)
    table = {Fraction(0): (1.0, 0.0), Fraction(1, 4): (0.0, 1.0),
             HALF: (-1.0, 0.0), Fraction(3, 4): (0.0, -1.0)}
    if t in table:
        return table[t]
    rad = 2.0 * math.pi * float(t)
    return (math.cos(rad), math.sin(rad))


def _vectors_in_cone(xs: np.ndarray, ys: np.ndarray, c: DirectionCone) -> np.ndarray:
    """Closed membership of 2D vectors in a direction cone via wedge sign tests."""
    out = np.zeros(xs.shape, dtype=bool)
    nonzero = (xs != 0) | (ys != 0)
    for lo, hi in c.sectors:
        pieces = [(lo, hi)] if hi - lo <= HALF else [(lo, lo + (hi - lo) / 2),
                                                     (lo + (hi - lo) / 2, hi)]
        for plo, phi_ in pieces:
            clo, slo = _unit_vector(plo)
            chi, shi = _unit_vector(phi_)
            cross_lo = clo * ys - slo * xs
            cross_hi = xs * shi - ys * chi
            out |= (cross_lo >= 0) & (cross_hi >= 0) & nonzero
    return out


def conormal_check(V: DirectionCone, n: int, samples: int, seed: int = 0,
                   zero_prob: float = 0.2, refine: int = 360) -> ConormalReport:
    """Sample zero-sum covector tuples and test membership in the forbidden cone.

    Draws n-1 free covectors from one signed family (exact grid angles with
    rational magnitudes, zeros allowed), closes the tuple with minus their sum,
    and reports every closed tuple that lies in the forbidden cone.  A cone
    whose convex hull avoids the origin can never produce a hit; a half-circle
    cone produces hits through opposite boundary pairs.
    """
    if n < 2:
        raise ValueError("conormal model needs n >= 2 points")
    if V.is_empty():
        raise ValueError("degenerate cone: empty direction set")
    minusV = negate(V)
    D = _grid_denominator([V, minusV], refine)
    rng = np.random.default_rng(seed)
    fam_plus = rng.random(samples) < 0.5
    angles = np.full((samples, n - 1), -1, dtype=np.int64)
    mags = np.zeros((samples, n - 1))
    for j in range(n - 1):
        live = rng.random(samples) >= zero_prob
        for fam, cone in ((fam_plus, V), (~fam_plus, minusV)):
            pick = fam & live
            count = int(pick.sum())
            if count:
                angles[pick, j] = _sample_from_sectors(rng, _sector_ints(cone, D), count, D)
        mags[live, j] = rng.integers(1, 9, size=int(live.sum())) / 4.0
    mags[angles < 0] = 0.0

    # exact unit vectors on the grid (quadrants exact)
    uniq = np.unique(angles[angles >= 0])
    lut_c = np.zeros(D)
    lut_s = np.zeros(D)
    for a in uniq:
        cx, sx = _unit_vector(Fraction(int(a), D))
        lut_c[a], lut_s[a] = cx, sx
    safe = np.clip(angles, 0, D - 1)
    xs = mags * lut_c[safe]
    ys = mags * lut_s[safe]
    last_x = -xs.sum(axis=1)
    last_y = -ys.sum(axis=1)

    in_plus = np.ones(samples, dtype=bool)
    in_minus = np.ones(samples, dtype=bool)
    v_sect = _sector_ints(V, D)
    m_sect = _sector_ints(minusV, D)
    nz = angles >= 0
    in_plus &= np.where(nz, _in_sectors_int(angles, v_sect, D), True).all(axis=1)
    in_minus &= np.where(nz, _in_sectors_int(angles, m_sect, D), True).all(axis=1)
    last_zero = (last_x == 0) & (last_y == 0)
    in_plus &= last_zero | _vectors_in_cone(last_x, last_y, V)
    in_minus &= last_zero | _vectors_in_cone(last_x, last_y, minusV)
    any_nonzero = nz.any(axis=1) | ~last_zero
    member = (in_plus | in_minus) & any_nonzero
    violations = int(member.sum())
    examples = []
    for idx in np.flatnonzero(member)[:5]:
        free = [None if angles[idx, j] < 0 else round(360.0 * angles[idx, j] / D, 3)
                for j in range(n - 1)]
        examples.append({"free_directions_deg": free,
                         "closing_vector": [float(last_x[idx]), float(last_y[idx])]})
    return ConormalReport(
        params={"n": n, "zero_prob": zero_prob,
                "cone_deg": [[float(lo * 360), float(hi * 360)] for lo, hi in V.sectors]},
        samples=samples, violations=violations, examples=examples, seed=seed)
