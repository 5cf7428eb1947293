"""Polynomial functionals and multivector fields on lattice configurations.

A degree-k multivector field with polynomial dependence on the configuration
is stored sparsely, one term per (monomial, antisymmetric slot block):

    X(phi){h_1, ..., h_k} = sum_terms  c * prod_r phi[w_r] * det(h_j[a_i])

where ``w`` is a sorted tuple of sites (the monomial in phi), ``a`` a strictly
increasing tuple of sites (the canonical antisymmetric block), and the k x k
determinant realises the signed sum over slot assignments.  The coefficient
``c`` is the *monomial* coefficient; the canonical symmetric-tensor entry at
``w`` is ``c / mult(w)`` with ``mult`` the number of distinct orderings of
``w``.  Serialization and derivative kernels use the tensor convention, with
the derivative normalisation d!/(d-n)! explicit (no 1/n! anywhere).

Coefficients may be float, complex, or exact ``fractions.Fraction``; all
operations are arithmetic-generic, so exact rational runs use the same code
path as float runs.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

_DENSE_LIMIT = 1 << 24  # refuse to materialise dense tensors above ~16M entries


def mult(w: Sequence[int]) -> int:
    """Number of distinct orderings of the sorted multi-index ``w``."""
    out = math.factorial(len(w))
    for _, group in itertools.groupby(w):
        out //= math.factorial(sum(1 for _ in group))
    return out


def canonical_antisym(a: Sequence[int]) -> tuple[tuple[int, ...], int] | None:
    """Sorted antisymmetric block and permutation sign; None when an index repeats."""
    a = tuple(a)
    if len(set(a)) != len(a):
        return None
    inv = sum(1 for i in range(len(a)) for j in range(i + 1, len(a)) if a[i] > a[j])
    return tuple(sorted(a)), (-1 if inv % 2 else 1)


def _det(rows: list[list]) -> object:
    """Permutation-sum determinant; works for Fraction/complex entries."""
    k = len(rows)
    if k == 0:
        return 1
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0
    for perm in itertools.permutations(range(k)):
        inv = sum(1 for i in range(k) for j in range(i + 1, k) if perm[i] > perm[j])
        prod = rows[0][perm[0]]
        for i in range(1, k):
            prod = prod * rows[i][perm[i]]
        total = total + (-prod if inv % 2 else prod)
    return total


class MultiVectorField:
    """Sparse polynomial k-vector field over ``nsites`` lattice sites."""

    def __init__(self, k: int, nsites: int):
        if k < 0:
            raise ValueError("vector degree k must be nonnegative")
        self.k = k
        self.nsites = nsites
        # degree -> {(w, a): monomial coefficient}
        self.terms: dict[int, dict[tuple[tuple[int, ...], tuple[int, ...]], object]] = {}

    # -- construction ---------------------------------------------------------
    def add_monomial(self, w: Sequence[int], a: Sequence[int], coeff) -> "MultiVectorField":
        """Accumulate ``coeff * prod phi[w] * det(h[a])``; ``a`` in any order."""
        if len(a) != self.k:
            raise ValueError(f"expected {self.k} antisymmetric indices, got {len(a)}")
        canon = canonical_antisym(a)
        if canon is None:
            return self  # repeated antisymmetric index: identically zero
        a_sorted, sign = canon
        w_sorted = tuple(sorted(w))
        for idx in (*w_sorted, *a_sorted):
            if not (0 <= idx < self.nsites):
                raise ValueError(f"site index {idx} out of range")
        bucket = self.terms.setdefault(len(w_sorted), {})
        key = (w_sorted, a_sorted)
        val = bucket.get(key, 0) + sign * coeff
        if val == 0:
            bucket.pop(key, None)
            if not bucket:
                self.terms.pop(len(w_sorted), None)
        else:
            bucket[key] = val
        return self

    def add_tensor_entry(self, w: Sequence[int], a: Sequence[int], value) -> "MultiVectorField":
        """Accumulate a canonical symmetric-tensor entry (value at sorted ``w``)."""
        return self.add_monomial(w, a, value * mult(tuple(sorted(w))))

    @classmethod
    def from_entries(cls, k: int, nsites: int, entries) -> "MultiVectorField":
        """Build from ``[(w, a, tensor_value), ...]`` canonical entries."""
        out = cls(k, nsites)
        for w, a, value in entries:
            out.add_tensor_entry(tuple(w), tuple(a), value)
        return out

    def copy(self) -> "MultiVectorField":
        out = MultiVectorField(self.k, self.nsites)
        out.terms = {d: dict(bucket) for d, bucket in self.terms.items()}
        return out

    # -- ring structure --------------------------------------------------------
    def scaled(self, factor) -> "MultiVectorField":
        out = MultiVectorField(self.k, self.nsites)
        if factor == 0:
            return out
        out.terms = {d: {key: factor * c for key, c in bucket.items()}
                     for d, bucket in self.terms.items()}
        return out

    def __add__(self, other: "MultiVectorField") -> "MultiVectorField":
        if self.k != other.k or self.nsites != other.nsites:
            raise ValueError("cannot add fields of different shape")
        out = self.copy()
        for d, bucket in other.terms.items():
            tgt = out.terms.setdefault(d, {})
            for key, c in bucket.items():
                val = tgt.get(key, 0) + c
                if val == 0:
                    tgt.pop(key, None)
                else:
                    tgt[key] = val
            if not tgt:
                out.terms.pop(d, None)
        return out

    def __sub__(self, other: "MultiVectorField") -> "MultiVectorField":
        return self + other.scaled(-1)

    def is_zero(self) -> bool:
        return not any(self.terms.values())

    @property
    def max_degree(self) -> int:
        return max(self.terms.keys(), default=0)

    def n_entries(self) -> int:
        return sum(len(b) for b in self.terms.values())

    def prune(self, tol: float = 0.0) -> "MultiVectorField":
        """Drop entries with |c| <= tol (tol 0 keeps exact-zero pruning only)."""
        out = MultiVectorField(self.k, self.nsites)
        for d, bucket in self.terms.items():
            kept = {key: c for key, c in bucket.items() if abs(c) > tol}
            if kept:
                out.terms[d] = kept
        return out

    def coefficient_entries(self):
        """Canonical tensor entries ``(w, a, value)`` with value = c / mult(w)."""
        for d in sorted(self.terms):
            for (w, a), c in sorted(self.terms[d].items()):
                m = mult(w)
                yield w, a, (c / m if m > 1 else c)

    # -- evaluation -------------------------------------------------------------
    def evaluate(self, phi: Sequence, *hs: Sequence):
        """X(phi){h_1..h_k}; multilinear and antisymmetric in the h's."""
        if len(hs) != self.k:
            raise ValueError(f"expected {self.k} slot arguments, got {len(hs)}")
        total = 0
        for d, bucket in self.terms.items():
            for (w, a), c in bucket.items():
                prod = c
                for site in w:
                    prod = prod * phi[site]
                if self.k:
                    rows = [[h[site] for h in hs] for site in a]
                    prod = prod * _det(rows)
                total = total + prod
        return total

    def directional_derivative(self, phi: Sequence, direction: Sequence, *hs: Sequence):
        """X^(1)(phi){direction; h_1..h_k} evaluated pointwise."""
        if len(hs) != self.k:
            raise ValueError(f"expected {self.k} slot arguments, got {len(hs)}")
        total = 0
        for d, bucket in self.terms.items():
            if d == 0:
                continue
            for (w, a), c in bucket.items():
                pairing = 1
                if self.k:
                    rows = [[h[site] for h in hs] for site in a]
                    pairing = _det(rows)
                pos = 0
                while pos < d:
                    site = w[pos]
                    count = 1
                    while pos + count < d and w[pos + count] == site:
                        count += 1
                    # remove one copy of `site` from the monomial
                    prod = c * count * direction[site]
                    for q in range(d):
                        if q == pos:
                            continue
                        prod = prod * phi[w[q]]
                    total = total + prod * pairing
                    pos += count
        return total

    def eval_derivative(self, phi: Sequence, n: int) -> np.ndarray:
        """Dense rank-(n+k) derivative kernel at phi, d!/(d-n)! normalisation.

        Symmetric in the first n slots, antisymmetric in the last k.  Intended
        for oracle checks and probe pairings; refuses absurdly large tensors.
        """
        if n < 0:
            raise ValueError("derivative order must be nonnegative")
        rank = n + self.k
        size = self.nsites ** rank if rank else 1
        if size > _DENSE_LIMIT:
            raise ValueError("dense derivative kernel would be too large")
        sample = self._sample_scalar(phi)
        dtype = object if isinstance(sample, Fraction) else complex
        out = np.zeros((self.nsites,) * rank, dtype=dtype) if rank else None
        if rank and dtype == object:
            out[...] = Fraction(0)
        total0 = 0
        for d, bucket in self.terms.items():
            if d < n:
                continue
            for (w, a), c in bucket.items():
                for positions in itertools.permutations(range(d), n):
                    sel = tuple(w[p] for p in positions)
                    rest = [w[q] for q in range(d) if q not in positions]
                    prod = c
                    for site in rest:
                        prod = prod * phi[site]
                    if rank == 0:
                        total0 = total0 + prod
                        continue
                    if self.k == 0:
                        out[sel] = out[sel] + prod
                    else:
                        for aperm in itertools.permutations(a):
                            canon = canonical_antisym(aperm)
                            _, sign = canon
                            out[sel + tuple(aperm)] = out[sel + tuple(aperm)] + sign * prod
        if rank == 0:
            return total0
        return out

    def _sample_scalar(self, phi: Sequence):
        for bucket in self.terms.values():
            for c in bucket.values():
                return c
        return phi[0] if len(phi) else 0.0

    # -- support ------------------------------------------------------------------
    def spacetime_support(self) -> frozenset[int]:
        sites: set[int] = set()
        for bucket in self.terms.values():
            for (w, a), c in bucket.items():
                if c != 0:
                    sites.update(w)
                    sites.update(a)
        return frozenset(sites)

    # -- dense oracles ---------------------------------------------------------
    def to_dense(self, degree: int) -> np.ndarray:
        """Full (symmetric x antisymmetric) coefficient tensor for one degree."""
        rank = degree + self.k
        if self.nsites ** max(rank, 1) > _DENSE_LIMIT:
            raise ValueError("dense tensor would be too large")
        bucket = self.terms.get(degree, {})
        sample = next(iter(bucket.values()), 0.0)
        dtype = object if isinstance(sample, Fraction) else complex
        out = np.zeros((self.nsites,) * rank, dtype=dtype)
        if dtype == object:
            out[...] = Fraction(0)
        for (w, a), c in bucket.items():
            value = c / mult(w) if mult(w) > 1 else c
            for wperm in set(itertools.permutations(w)):
                if self.k == 0:
                    out[wperm] = value
                else:
                    for aperm in itertools.permutations(a):
                        _, sign = canonical_antisym(aperm)
                        out[wperm + tuple(aperm)] = sign * value
        return out

    def __repr__(self) -> str:
        return (f"MultiVectorField(k={self.k}, nsites={self.nsites}, "
                f"degrees={sorted(self.terms)}, entries={self.n_entries()})")


class PolyFunctional(MultiVectorField):
    """Degree-0 multivector field: a polynomial functional of the configuration."""

    def __init__(self, nsites: int):
        super().__init__(0, nsites)

    @classmethod
    def constant(cls, nsites: int, value) -> "PolyFunctional":
        out = cls(nsites)
        out.add_monomial((), (), value)
        return out

    @classmethod
    def linear(cls, u: Sequence) -> "PolyFunctional":
        out = cls(len(u))
        for i, v in enumerate(u):
            if v != 0:
                out.add_monomial((i,), (), v)
        return out

    @classmethod
    def site_monomial(cls, nsites: int, sites: Sequence[int], coeff=1) -> "PolyFunctional":
        out = cls(nsites)
        out.add_monomial(tuple(sites), (), coeff)
        return out


def _as_poly_functional(field: MultiVectorField) -> MultiVectorField:
    if field.k != 0:
        raise ValueError("expected a degree-0 field")
    out = PolyFunctional(field.nsites)
    out.terms = {d: dict(b) for d, b in field.terms.items()}
    return out


# ---------------------------------------------------------------------------
# Spec operations (module-level forms)
# ---------------------------------------------------------------------------

def evaluate(X: MultiVectorField, phi, *hs):
    return X.evaluate(phi, *hs)


def eval_derivative(X: MultiVectorField, phi, n: int):
    return X.eval_derivative(phi, n)


def spacetime_support(X: MultiVectorField) -> frozenset[int]:
    return X.spacetime_support()


def wick_polynomial(kernels: Sequence, nsites: int | None = None) -> PolyFunctional:
    """Polynomial functional sum_n <u_n, phi^(x) n> from symmetric kernels.

    ``kernels[n]`` is the rank-n coefficient tensor (dense ndarray, or a dict
    ``{sorted_index_tuple: value}`` of canonical entries; rank 0 is a scalar).
    Non-symmetric dense input is symmetrised with a warning.
    """
    if nsites is None:
        for u in kernels:
            if isinstance(u, np.ndarray) and u.ndim > 0:
                nsites = u.shape[0]
                break
            if isinstance(u, dict) and u:
                nsites = max(max(key, default=0) for key in u) + 1
                break
    if nsites is None:
        raise ValueError("cannot infer lattice size: pass nsites or an array kernel")
    out = PolyFunctional(nsites)
    for n, u in enumerate(kernels):
        if u is None:
            continue
        if n == 0:
            value = u.item() if isinstance(u, np.ndarray) else u
            if value != 0:
                out.add_monomial((), (), value)
            continue
        if isinstance(u, dict):
            for idx, value in u.items():
                if value != 0:
                    out.add_tensor_entry(tuple(sorted(idx)), (), value)
            continue
        u = np.asarray(u)
        if u.shape != (nsites,) * n:
            raise ValueError(f"kernel of rank {n} has wrong shape {u.shape}")
        sym = u
        if n > 1:
            sym = sum(np.transpose(u, perm) for perm in itertools.permutations(range(n)))
            sym = sym / math.factorial(n)
            if not np.allclose(np.asarray(sym, dtype=complex), np.asarray(u, dtype=complex)):
                warnings.warn("non-symmetric kernel symmetrised", stacklevel=2)
        for idx in itertools.combinations_with_replacement(range(nsites), n):
            value = sym[idx]
            if value != 0:
                out.add_tensor_entry(idx, (), value)
    return out


def pullback_linear(X: MultiVectorField, L, symbolic_lambda: bool = False):
    """Pull a field back through a linear configuration map.

    Plain form: ``L`` is an (N, N) matrix; returns the field ``X(L phi)``, i.e.
    each symmetric slot contracted with ``L`` on its first index.  Symbolic
    form: ``L = (A, B)`` represents the affine family ``A + lam * B`` and the
    result is a :class:`LambdaPoly` whose power-p coefficient field collects
    all terms with p factors of ``B``.
    """
    if symbolic_lambda:
        A, B = L
        return _pullback_affine(X, A, B)
    n = X.nsites
    L = np.asarray(L)
    if L.shape != (n, n):
        raise ValueError("linear map has wrong shape")
    out = MultiVectorField(X.k, n)
    for d, bucket in X.terms.items():
        for (w, a), c in bucket.items():
            if d == 0:
                out.add_monomial((), a, c)
                continue
            rows = [L[site] for site in w]
            for js in itertools.product(*(_nonzero_indices(r) for r in rows)):
                coeff = c
                for r, j in zip(rows, js):
                    coeff = coeff * r[j]
                out.add_monomial(tuple(js), a, coeff)
    if X.k == 0:
        return _as_poly_functional(out)
    return out


def _nonzero_indices(row: np.ndarray) -> list[int]:
    return [j for j, v in enumerate(row) if v != 0]


def _pullback_affine(X: MultiVectorField, A: np.ndarray, B: np.ndarray) -> "LambdaPoly":
    n = X.nsites
    coeffs: dict[int, MultiVectorField] = {}
    for d, bucket in X.terms.items():
        for (w, a), c in bucket.items():
            if d == 0:
                coeffs.setdefault(0, MultiVectorField(X.k, n)).add_monomial((), a, c)
                continue
            for pattern in itertools.product((0, 1), repeat=d):
                power = sum(pattern)
                rows = [(B if pick else A)[site] for pick, site in zip(pattern, w)]
                tgt = coeffs.setdefault(power, MultiVectorField(X.k, n))
                for js in itertools.product(*(_nonzero_indices(r) for r in rows)):
                    coeff = c
                    for r, j in zip(rows, js):
                        coeff = coeff * r[j]
                    tgt.add_monomial(tuple(js), a, coeff)
    top = max(coeffs, default=0)
    fields = [coeffs.get(p, MultiVectorField(X.k, n)) for p in range(top + 1)]
    return LambdaPoly(fields)


@dataclass
class LambdaPoly:
    """Polynomial in the retraction parameter with multivector-field coefficients."""

    coefficients: list

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def at(self, lam) -> MultiVectorField:
        """Evaluate at a parameter value; exact when everything is rational."""
        if not self.coefficients:
            raise ValueError("empty polynomial")
        total = self.coefficients[0]
        power = 1
        for coeff in self.coefficients[1:]:
            power = power * lam
            total = total + coeff.scaled(power)
        return total

    def integrate01(self, extra_power: int = 0) -> MultiVectorField:
        """integral_0^1 lam^extra_power * poly(lam) d lam, coefficientwise exact."""
        if not self.coefficients:
            raise ValueError("empty polynomial")
        first = self.coefficients[0]
        total = MultiVectorField(first.k, first.nsites)
        for p, coeff in enumerate(self.coefficients):
            denom = p + extra_power + 1
            if _is_exact(coeff):
                total = total + coeff.scaled(Fraction(1, denom))
            else:
                total = total + coeff.scaled(1.0 / denom)
        return total


def _is_exact(field: MultiVectorField) -> bool:
    for bucket in field.terms.values():
        for c in bucket.values():
            return isinstance(c, (Fraction, int))
    return True


# ---------------------------------------------------------------------------
# Scalar polynomials in the retraction parameter (pointwise-exact evaluation)
# ---------------------------------------------------------------------------

class LambdaScalar:
    """Scalar polynomial in the retraction parameter lambda.

    Configuration vectors whose entries are ``LambdaScalar`` values can be fed
    through :meth:`MultiVectorField.evaluate`; the ring operations below make
    monomials expand into exact lambda-polynomials, so the line integral in the
    homotopy operator reduces to exact coefficientwise division.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = list(coeffs)
        while len(self.coeffs) > 1 and self.coeffs[-1] == 0:
            self.coeffs.pop()

    @classmethod
    def affine(cls, a, b) -> "LambdaScalar":
        """a + b * lambda."""
        return cls([a, b])

    @classmethod
    def constant(cls, a) -> "LambdaScalar":
        return cls([a])

    def _lift(self, other) -> "LambdaScalar":
        if isinstance(other, LambdaScalar):
            return other
        return LambdaScalar([other])

    def __add__(self, other):
        o = self._lift(other)
        n = max(len(self.coeffs), len(o.coeffs))
        out = []
        for i in range(n):
            a = self.coeffs[i] if i < len(self.coeffs) else 0
            b = o.coeffs[i] if i < len(o.coeffs) else 0
            out.append(a + b)
        return LambdaScalar(out)

    __radd__ = __add__

    def __neg__(self):
        return LambdaScalar([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        o = self._lift(other)
        out = [0] * (len(self.coeffs) + len(o.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(o.coeffs):
                if b == 0:
                    continue
                out[i + j] = out[i + j] + a * b
        return LambdaScalar(out)

    __rmul__ = __mul__

    def __eq__(self, other):
        o = self._lift(other)
        return self.coeffs == o.coeffs

    def shift(self, power: int) -> "LambdaScalar":
        """Multiply by lambda^power."""
        return LambdaScalar([0] * power + self.coeffs)

    def integrate01(self):
        """integral_0^1 of the polynomial; exact when coefficients are exact."""
        total = 0
        for p, c in enumerate(self.coeffs):
            if c == 0:
                continue
            if isinstance(c, (Fraction, int)):
                total = total + Fraction(c) / (p + 1)
            else:
                total = total + c / (p + 1)
        return total

    def at(self, lam):
        total = 0
        for c in reversed(self.coeffs):
            total = total * lam + c
        return total

    def __repr__(self):
        return f"LambdaScalar({self.coeffs})"


def lambda_vector(a_vec: Sequence, b_vec: Sequence) -> np.ndarray:
    """Vector of affine LambdaScalars a + lambda * b, entrywise."""
    out = np.empty(len(a_vec), dtype=object)
    for i in range(len(a_vec)):
        out[i] = LambdaScalar.affine(a_vec[i], b_vec[i])
    return out


# ---------------------------------------------------------------------------
# Comparison helpers and random instances
# ---------------------------------------------------------------------------

def diff_supnorm(X: MultiVectorField, Y: MultiVectorField) -> float:
    """Sup over monomial entries of |X - Y|; exact zero iff identical terms."""
    if X.k != Y.k or X.nsites != Y.nsites:
        raise ValueError("fields of different shape")
    worst = 0.0
    degrees = set(X.terms) | set(Y.terms)
    for d in degrees:
        keys = set(X.terms.get(d, {})) | set(Y.terms.get(d, {}))
        for key in keys:
            delta = X.terms.get(d, {}).get(key, 0) - Y.terms.get(d, {}).get(key, 0)
            worst = max(worst, float(abs(delta)))
    return worst


def supnorm(X: MultiVectorField) -> float:
    worst = 0.0
    for bucket in X.terms.values():
        for c in bucket.values():
            worst = max(worst, float(abs(c)))
    return worst


def random_multivector(rng, nsites: int, k: int, max_degree: int,
                       entries_per_degree: int = 3, mode: str = "float",
                       sites: Sequence[int] | None = None) -> MultiVectorField:
    """Random sparse field for property tests and scenario sweeps."""
    pool = list(sites) if sites is not None else list(range(nsites))
    if k > len(pool):
        raise ValueError("not enough sites for the antisymmetric block")
    out = MultiVectorField(k, nsites) if k else PolyFunctional(nsites)
    for d in range(max_degree + 1):
        for _ in range(entries_per_degree):
            w = tuple(sorted(rng.choice(pool) for _ in range(d)))
            a = tuple(rng.sample(pool, k)) if k else ()
            if mode == "rational":
                coeff = Fraction(rng.randint(-6, 6), rng.randint(1, 4))
            else:
                coeff = rng.uniform(-2.0, 2.0)
            if coeff != 0:
                out.add_monomial(w, a, coeff)
    return out


def random_config(rng, nsites: int, mode: str = "float",
                  interior_rows_of=None) -> np.ndarray:
    """Random configuration vector; optionally zero on the boundary rows."""
    if mode == "rational":
        out = np.empty(nsites, dtype=object)
        for i in range(nsites):
            out[i] = Fraction(rng.randint(-6, 6), rng.randint(1, 4))
    else:
        out = np.array([rng.uniform(-1.5, 1.5) for _ in range(nsites)])
    if interior_rows_of is not None:
        lat = interior_rows_of
        zero = Fraction(0) if mode == "rational" else 0.0
        out[: lat.nx] = zero
        out[-lat.nx:] = zero
    return out
