"""Poisson bracket and the hbar-graded star product on polynomial functionals.

All products are computed on coefficients: the n-th order term contracts n
symmetric slots of each factor through copies of the two-point kernel, with
the combinatorial multiplicities taken from ordered removals of the monomial
multisets (no dense expansion).  For polynomial factors of degrees p and q the
series terminates at min(p, q), so there is no truncation.

Convention, fixed here and verified by direct expansion in the test suite and
the acceptance run: with the two-point kernel's antisymmetric part equal to
(i/2) times the commutator kernel, the hbar^1 coefficient of the star
commutator F * G - G * F equals  i * {F, G}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .functionals import MultiVectorField, PolyFunctional, diff_supnorm
from .lattice import PropagatorSet, to_float


# ---------------------------------------------------------------------------
# Slot permutation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotPermutation:
    """Rearranges (kernel-pair interleave, then free slots) into derivative blocks.

    Size 2n+m+k; 1-based mapping and inverse, matching the piecewise
    definition used by the star-product derivative terms: positions
    1..n+m collect the first factor's variables, the rest the second's.
    """

    n: int
    m: int
    k: int
    mapping: tuple[int, ...]
    inverse: tuple[int, ...]

    @property
    def size(self) -> int:
        return 2 * self.n + self.m + self.k

    def permute(self, seq: Sequence) -> tuple:
        """seq in source order (x1,y1,...,xn,yn,h1..h_{m+k}) -> block order."""
        if len(seq) != self.size:
            raise ValueError(f"expected {self.size} entries, got {len(seq)}")
        return tuple(seq[self.inverse[i] - 1] for i in range(self.size))


def sigma_permutation(n: int, m: int, k: int) -> SlotPermutation:
    """Block-matching permutation; inverse given piecewise, mapping derived."""
    if n < 0 or m < 0 or k < 0:
        raise ValueError("n, m, k must be nonnegative")
    size = 2 * n + m + k
    inverse = []
    for i in range(1, size + 1):
        if i <= n:
            inverse.append(2 * i - 1)
        elif i <= n + m:
            inverse.append(i + n)
        elif i <= 2 * n + m:
            inverse.append(2 * (i - n - m))
        else:
            inverse.append(i)
    if sorted(inverse) != list(range(1, size + 1)):
        raise AssertionError("inverse is not a bijection")
    mapping = [0] * size
    for tgt, src in enumerate(inverse, start=1):
        mapping[src - 1] = tgt
    return SlotPermutation(n=n, m=m, k=k, mapping=tuple(mapping), inverse=tuple(inverse))


# ---------------------------------------------------------------------------
# hbar series
# ---------------------------------------------------------------------------

@dataclass
class HbarSeries:
    """Terminating power series in hbar with multivector-field coefficients."""

    coefficients: list

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def coefficient(self, power: int) -> MultiVectorField:
        if power < len(self.coefficients):
            return self.coefficients[power]
        template = self.coefficients[0]
        return MultiVectorField(template.k, template.nsites)

    def __add__(self, other: "HbarSeries") -> "HbarSeries":
        top = max(self.order, other.order)
        return HbarSeries([self.coefficient(p) + other.coefficient(p) for p in range(top + 1)])

    def __sub__(self, other: "HbarSeries") -> "HbarSeries":
        top = max(self.order, other.order)
        return HbarSeries([self.coefficient(p) - other.coefficient(p) for p in range(top + 1)])

    def trimmed(self) -> "HbarSeries":
        coeffs = list(self.coefficients)
        while len(coeffs) > 1 and coeffs[-1].is_zero():
            coeffs.pop()
        return HbarSeries(coeffs)

    def supnorm_diff(self, other: "HbarSeries") -> float:
        top = max(self.order, other.order)
        return max(diff_supnorm(self.coefficient(p), other.coefficient(p))
                   for p in range(top + 1))


# ---------------------------------------------------------------------------
# Contraction combinatorics
# ---------------------------------------------------------------------------

def _ordered_removals(w: tuple[int, ...], n: int):
    """Ordered length-n site selections from the multiset ``w`` with position counts.

    Yields (selected_values, remaining, weight): summing weight * f(values)
    over the output equals the sum of f over ordered selections of distinct
    positions, which is exactly the derivative normalisation d!/(d-n)!.
    """
    results = []

    def rec(vals: list, rem: tuple[int, ...], weight: int):
        if len(vals) == n:
            results.append((tuple(vals), rem, weight))
            return
        seen = set()
        for i, u in enumerate(rem):
            if u in seen:
                continue
            seen.add(u)
            rec(vals + [u], rem[:i] + rem[i + 1:], weight * rem.count(u))

    rec([], tuple(w), 1)
    return results


def _contract_terms(wF, cF, wG, cG, n: int, kernel: np.ndarray):
    """n-fold kernel contraction of two monomials; yields (merged_w, coeff)."""
    inv_nfact = 1.0 / math.factorial(n) if n else 1
    out = []
    for uvals, urem, uweight in _ordered_removals(wF, n):
        for vvals, vrem, vweight in _ordered_removals(wG, n):
            kprod = 1
            for ur, vr in zip(uvals, vvals):
                kv = kernel[ur, vr]
                if kv == 0:
                    kprod = 0
                    break
                kprod = kprod * kv
            if kprod == 0 and n:
                continue
            coeff = cF * cG * uweight * vweight * kprod * inv_nfact
            out.append((tuple(sorted(urem + vrem)), coeff))
    return out


# ---------------------------------------------------------------------------
# Bracket and star products
# ---------------------------------------------------------------------------

def poisson_bracket(F: MultiVectorField, G: MultiVectorField,
                    commutator: np.ndarray) -> PolyFunctional:
    """{F, G}(phi) = <F'(phi), commutator G'(phi)>; closed form on coefficients."""
    if F.k != 0 or G.k != 0:
        raise ValueError("the bracket is defined on degree-0 functionals")
    if F.nsites != G.nsites:
        raise ValueError("functionals live on different lattices")
    kernel = np.asarray(commutator)
    if kernel.shape != (F.nsites, F.nsites):
        raise ValueError("commutator kernel has wrong shape")
    out = PolyFunctional(F.nsites)
    for dF, bucketF in F.terms.items():
        if dF == 0:
            continue
        for (wF, _), cF in bucketF.items():
            for dG, bucketG in G.terms.items():
                if dG == 0:
                    continue
                for (wG, _), cG in bucketG.items():
                    for merged, coeff in _contract_terms(wF, cF, wG, cG, 1, kernel):
                        if coeff != 0:
                            out.add_monomial(merged, (), coeff)
    return out


def star_multivector(X: MultiVectorField, Y: MultiVectorField,
                     twopoint: np.ndarray) -> HbarSeries:
    """Star product of multivector fields: kernel contractions wedge the slots.

    The result has vector degree p+q; the hbar^n coefficient contracts n
    symmetric slots of each factor through the two-point kernel and merges the
    antisymmetric blocks with the canonical shuffle sign (blocks sharing a
    site drop out).  Reduces to the functional star product at p = q = 0.
    """
    if X.nsites != Y.nsites:
        raise ValueError("fields live on different lattices")
    kernel = np.asarray(twopoint)
    n_top = min(X.max_degree, Y.max_degree)
    n_sites = X.nsites
    k_out = X.k + Y.k
    coeffs = [MultiVectorField(k_out, n_sites) for _ in range(n_top + 1)]
    for dX, bucketX in X.terms.items():
        for (wX, aX), cX in bucketX.items():
            for dY, bucketY in Y.terms.items():
                for (wY, aY), cY in bucketY.items():
                    if set(aX) & set(aY):
                        continue  # wedge of overlapping blocks vanishes
                    for n in range(min(dX, dY) + 1):
                        tgt = coeffs[n]
                        for merged, coeff in _contract_terms(wX, cX, wY, cY, n, kernel):
                            if coeff != 0:
                                tgt.add_monomial(merged, aX + aY, coeff)
    return HbarSeries(coeffs).trimmed()


def star_product(F: MultiVectorField, G: MultiVectorField,
                 twopoint: np.ndarray) -> HbarSeries:
    """Star product of functionals; hbar^0 term is the pointwise product exactly."""
    if F.k != 0 or G.k != 0:
        raise ValueError("star_product expects degree-0 functionals; "
                         "use star_multivector for higher degrees")
    return star_multivector(F, G, twopoint)


def star_series(A, B, twopoint: np.ndarray) -> HbarSeries:
    """Star product extended hbar-bilinearly to terminating series."""
    if isinstance(A, MultiVectorField):
        A = HbarSeries([A])
    if isinstance(B, MultiVectorField):
        B = HbarSeries([B])
    pieces: dict[int, MultiVectorField] = {}
    for a, Fa in enumerate(A.coefficients):
        for b, Gb in enumerate(B.coefficients):
            sub = star_multivector(Fa, Gb, twopoint)
            for c, term in enumerate(sub.coefficients):
                key = a + b + c
                pieces[key] = pieces.get(key, term.scaled(0)) + term
    top = max(pieces, default=0)
    template = A.coefficients[0]
    coeffs = [pieces.get(p, MultiVectorField(template.k + B.coefficients[0].k,
                                             template.nsites)) for p in range(top + 1)]
    return HbarSeries(coeffs).trimmed()


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------

def check_first_order_commutator(F: MultiVectorField, G: MultiVectorField,
                                 props: PropagatorSet) -> float:
    """Sup-norm of (hbar^1 coefficient of [F, G]_star) minus i {F, G}."""
    twopoint = props.twopoint
    comm = star_product(F, G, twopoint) - star_product(G, F, twopoint)
    bracket = poisson_bracket(F, G, to_float(props.commutator))
    return diff_supnorm(comm.coefficient(1), bracket.scaled(1j))


def check_associativity(F: MultiVectorField, G: MultiVectorField,
                        H: MultiVectorField, twopoint: np.ndarray) -> float:
    """Sup-norm coefficient residual of (F*G)*H - F*(G*H) across all hbar powers."""
    left = star_series(star_product(F, G, twopoint), H, twopoint)
    right = star_series(F, star_product(G, H, twopoint), twopoint)
    return left.supnorm_diff(right)


def pointwise_product(F: MultiVectorField, G: MultiVectorField) -> PolyFunctional:
    """Plain product F * G of degree-0 functionals (the hbar^0 star term)."""
    if F.k != 0 or G.k != 0:
        raise ValueError("pointwise product of degree-0 functionals only")
    out = PolyFunctional(F.nsites)
    for dF, bucketF in F.terms.items():
        for (wF, _), cF in bucketF.items():
            for dG, bucketG in G.terms.items():
                for (wG, _), cG in bucketG.items():
                    out.add_monomial(tuple(sorted(wF + wG)), (), cF * cG)
    return out
