"""Koszul differential, homotopy operator, and the time-slice verification.

The differential consumes one antisymmetric slot against P applied to the
configuration; the homotopy operator feeds one slot through the one-sided
inverse alpha and integrates along the retraction line gamma_lambda.  Because
gamma_lambda is affine in lambda and all functionals are polynomial, the line
integral is a polynomial integral and is carried out exactly, coefficientwise,
in rational mode (and with plain float division in float mode); no quadrature
enters anywhere.

Identity checks evaluate the defect pointwise on probe tuples (phi, h_1..h_k)
with interior-supported slot vectors, which is where the one-sided inverse
property holds on the finite lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .functionals import (LambdaScalar, MultiVectorField, PolyFunctional,
                          pullback_linear, random_config, diff_supnorm, supnorm)
from .lattice import (LatticeSpacetime, Retraction, apply_wave_operator,
                      causal_hull, solve_cauchy, wave_operator_matrix, RATIONAL)


@dataclass(frozen=True)
class CauchyData:
    """Field values on the first two time rows; parametrises ker P by leapfrog."""

    phi0: np.ndarray
    phi1: np.ndarray

    def __post_init__(self):
        if np.asarray(self.phi0).shape != np.asarray(self.phi1).shape:
            raise ValueError("Cauchy rows must have equal length")


@dataclass
class HomotopyReport:
    """Sup of the homotopy-identity defect over a probe set."""

    degree: int
    poly_degree: int
    mode: str
    residual_sup: float
    probes: int
    exact_zero: bool
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual_sup <= self.tolerance

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "poly_degree": self.poly_degree,
            "mode": self.mode,
            "residual_sup": self.residual_sup,
            "probes": self.probes,
            "exact_zero": self.exact_zero,
            "pass": bool(self.passed),
        }


# ---------------------------------------------------------------------------
# The differential
# ---------------------------------------------------------------------------

def koszul_differential(X: MultiVectorField, P: np.ndarray) -> MultiVectorField:
    """delta X(phi) = X(phi){P phi, _}: degree drops by one, polynomial degree rises.

    ``P`` is the dense wave-operator matrix.  Expanding the determinant along
    the consumed slot gives, per stored term, one contribution for each
    antisymmetric index with alternating sign.
    """
    if X.k < 1:
        raise ValueError("Koszul differential needs vector degree k >= 1")
    P = np.asarray(P)
    n = X.nsites
    rows_nz = {}
    out = MultiVectorField(X.k - 1, n)
    for d, bucket in X.terms.items():
        for (w, a), c in bucket.items():
            for r, a1 in enumerate(a):
                if a1 not in rows_nz:
                    rows_nz[a1] = [(j, P[a1, j]) for j in range(n) if P[a1, j] != 0]
                sign = -1 if r % 2 else 1
                rest = a[:r] + a[r + 1:]
                for j, pval in rows_nz[a1]:
                    out.add_monomial(tuple(sorted(w + (j,))), rest, sign * c * pval)
    if out.k == 0:
        poly = PolyFunctional(n)
        poly.terms = out.terms
        return poly
    return out


# ---------------------------------------------------------------------------
# The homotopy operator (coefficient level)
# ---------------------------------------------------------------------------

def _pullback_monomial_affine(w_rest: tuple[int, ...], A: np.ndarray, B: np.ndarray):
    """Expand prod_r (A + lam B)[w_r, .] into {lam power: {sorted monomial: coeff}}."""
    acc: dict[int, dict[tuple[int, ...], object]] = {0: {(): 1}}
    n = A.shape[0]
    for site in w_rest:
        arow, brow = A[site], B[site]
        nxt: dict[int, dict[tuple[int, ...], object]] = {}
        for p, monos in acc.items():
            for wk, g in monos.items():
                for j in range(n):
                    va = arow[j]
                    if va != 0:
                        key = tuple(sorted(wk + (j,)))
                        tgt = nxt.setdefault(p, {})
                        tgt[key] = tgt.get(key, 0) + g * va
                    vb = brow[j]
                    if vb != 0:
                        key = tuple(sorted(wk + (j,)))
                        tgt = nxt.setdefault(p + 1, {})
                        tgt[key] = tgt.get(key, 0) + g * vb
        acc = nxt
    return acc


def homotopy_operator(X: MultiVectorField, ret: Retraction) -> MultiVectorField:
    """Degree-raising homotopy: one slot through alpha, the rest along gamma_lambda.

    The integrand is polynomial in lambda, so the weight lam^k line integral is
    applied exactly per lambda power (1/(p+k+1)); the new slot is merged into
    the antisymmetric block with the alternating-sign insertion.
    """
    k, n = X.k, X.nsites
    exact = ret.lattice.mode == RATIONAL
    alpha = ret.alpha_matrix()
    A = ret.gamma0_matrix()
    B = ret.alpha_p_matrix()
    out = MultiVectorField(k + 1, n)
    for d, bucket in X.terms.items():
        if d == 0:
            continue  # constant terms have no derivative
        for (w, a), c in bucket.items():
            pos = 0
            while pos < d:
                u = w[pos]
                count = 1
                while pos + count < d and w[pos + count] == u:
                    count += 1
                w_rest = w[:pos] + w[pos + 1:]
                lampolys = _pullback_monomial_affine(w_rest, A, B)
                integrated: dict[tuple[int, ...], object] = {}
                for p, monos in lampolys.items():
                    weight = Fraction(1, p + k + 1) if exact else 1.0 / (p + k + 1)
                    for wk, g in monos.items():
                        integrated[wk] = integrated.get(wk, 0) + g * weight
                arow = alpha[u]
                base = c * count
                for wk, g in integrated.items():
                    gg = base * g
                    for t in range(n):
                        av = arow[t]
                        if av != 0:
                            out.add_monomial(wk, (t,) + a, gg * av)
                pos += count
    return out


def gamma0_pullback(X: MultiVectorField, ret: Retraction) -> MultiVectorField:
    """Pullback along the solution projection; zero in vector degrees >= 1.

    Degree 0 composes the coefficients with the projection matrix; for k >= 1
    the time-slice quasi-inverse is the zero map, so that is what is returned.
    """
    if X.k == 0:
        return pullback_linear(X, ret.gamma0_matrix())
    return MultiVectorField(X.k, X.nsites)


def on_shell_restrict(F: MultiVectorField, lat: LatticeSpacetime, cauchy: CauchyData):
    """Evaluate a functional on the solution grown from Cauchy data by leapfrog."""
    if F.k != 0:
        raise ValueError("on-shell restriction applies to degree-0 functionals")
    phi_sol = solve_cauchy(lat, np.asarray(cauchy.phi0), np.asarray(cauchy.phi1))
    return F.evaluate(phi_sol)


# ---------------------------------------------------------------------------
# Pointwise identity checks
# ---------------------------------------------------------------------------

def _integrate_weighted(value, extra_power: int, exact: bool):
    """integral_0^1 lam^extra * value(lam) d lam for scalar or LambdaScalar values."""
    if isinstance(value, LambdaScalar):
        return value.shift(extra_power).integrate01()
    if exact:
        return Fraction(value) / (extra_power + 1) if not isinstance(value, Fraction) \
            else value / (extra_power + 1)
    return value / (extra_power + 1)


def eval_homotopy_pointwise(X: MultiVectorField, ret: Retraction,
                            phi: np.ndarray, slots: Sequence[np.ndarray]):
    """(H X)(phi){slots} via the exact lambda-polynomial line integral.

    ``slots`` are the k+1 arguments of the raised field; each must be
    interior-supported so the one-sided inverse applies.
    """
    k = X.k
    if len(slots) != k + 1:
        raise ValueError(f"homotopy of a degree-{k} field takes {k + 1} slot arguments")
    exact = ret.lattice.mode == RATIONAL
    pphi = apply_wave_operator(ret.lattice, phi)
    alpha_pphi = ret.alpha(pphi)
    gamma0_phi = phi - alpha_pphi
    from .functionals import lambda_vector
    lam_phi = lambda_vector(gamma0_phi, alpha_pphi)  # gamma_lambda phi, entrywise affine
    total = 0
    for i, g in enumerate(slots):
        alpha_g = ret.alpha(np.asarray(g))
        rest = tuple(slots[:i]) + tuple(slots[i + 1:])
        integrand = X.directional_derivative(lam_phi, alpha_g, *rest)
        val = _integrate_weighted(integrand, k, exact)
        total = total + (-val if i % 2 else val)
    return total


def homotopy_defect(X: MultiVectorField, ret: Retraction,
                    phi: np.ndarray, hs: Sequence[np.ndarray],
                    delta_X: MultiVectorField | None = None):
    """Pointwise defect of the chain-homotopy identity at one probe.

    Degree 0: F - gamma0^* F - delta H F.  Degree >= 1: X - delta H X - H delta X,
    using delta Y(phi){..} = Y(phi){P phi, ..} for the outer differential.
    """
    lat = ret.lattice
    pphi = apply_wave_operator(lat, phi)
    if X.k == 0:
        if hs:
            raise ValueError("degree-0 probes carry no slot vectors")
        value = X.evaluate(phi)
        pulled = X.evaluate(phi - ret.alpha(pphi))
        delta_h = eval_homotopy_pointwise(X, ret, phi, (pphi,))
        return value - pulled - delta_h
    if len(hs) != X.k:
        raise ValueError(f"probe needs {X.k} slot vectors")
    if delta_X is None:
        delta_X = koszul_differential(X, wave_operator_matrix(lat))
    value = X.evaluate(phi, *hs)
    delta_h = eval_homotopy_pointwise(X, ret, phi, (pphi,) + tuple(hs))
    h_delta = eval_homotopy_pointwise(delta_X, ret, phi, tuple(hs))
    return value - delta_h - h_delta


def verify_homotopy_identity(X: MultiVectorField, ret: Retraction,
                             probes: Sequence[tuple], tol: float = 1e-10) -> HomotopyReport:
    """Sup of the identity defect over probes; exact zero expected in rational mode."""
    lat = ret.lattice
    delta_X = None
    if X.k >= 1:
        delta_X = koszul_differential(X, wave_operator_matrix(lat))
    worst = 0.0
    exact_zero = lat.mode == RATIONAL
    for phi, hs in probes:
        defect = homotopy_defect(X, ret, np.asarray(phi), tuple(hs), delta_X=delta_X)
        if defect != 0:
            exact_zero = False
        worst = max(worst, float(abs(defect)))
    return HomotopyReport(degree=X.k, poly_degree=X.max_degree, mode=lat.mode,
                          residual_sup=worst, probes=len(probes),
                          exact_zero=exact_zero, tolerance=tol)


def random_probes(rng, lat: LatticeSpacetime, k: int, n_probes: int):
    """Probe tuples (phi, (h_1..h_k)) with interior-supported slot vectors."""
    probes = []
    for _ in range(n_probes):
        phi = random_config(rng, lat.n_sites, lat.mode)
        hs = tuple(random_config(rng, lat.n_sites, lat.mode, interior_rows_of=lat)
                   for _ in range(k))
        probes.append((phi, hs))
    return probes


# ---------------------------------------------------------------------------
# Time-slice check
# ---------------------------------------------------------------------------

@dataclass
class TimeSliceReport:
    """Outcome of the quasi-inverse check against a Cauchy neighbourhood."""

    region: tuple[int, int]
    support_rows: tuple[int, ...]
    support_ok: bool
    homology_residual: float
    onshell_residual: float
    cauchy_samples: int
    mode: str
    tolerance: float

    @property
    def passed(self) -> bool:
        return (self.support_ok and self.homology_residual <= self.tolerance
                and self.onshell_residual <= self.tolerance)

    def to_json(self) -> dict:
        return {
            "region": list(self.region),
            "support_rows": list(self.support_rows),
            "support_ok": self.support_ok,
            "homology_residual": self.homology_residual,
            "onshell_residual": self.onshell_residual,
            "cauchy_samples": self.cauchy_samples,
            "mode": self.mode,
            "pass": bool(self.passed),
        }


def time_slice_check(F: MultiVectorField, region: tuple[int, int], ret: Retraction,
                     rng, n_cauchy: int = 30, tol: float = 1e-10,
                     support_tol: float = 0.0) -> TimeSliceReport:
    """Verify support compression, the homology witness, and on-shell agreement.

    ``region`` is a closed interval of time rows that must contain the
    switching transition and stay inside the interior rows.
    """
    if F.k != 0:
        raise ValueError("time-slice check operates on degree-0 functionals")
    lat = ret.lattice
    t_lo, t_hi = region
    if t_lo > t_hi:
        raise ValueError("not a Cauchy neighborhood: region contains no full time row")
    if t_lo < 1 or t_hi > lat.nt - 2:
        raise ValueError("region must consist of interior rows")
    active = ret.switching.active_rows()
    if not all(t_lo <= t <= t_hi for t in active):
        raise ValueError("switching transition must lie inside the region")

    pulled_raw = gamma0_pullback(F, ret)
    pulled = pulled_raw.prune(support_tol)
    rows = tuple(sorted({lat.coords(s)[0] for s in pulled.spacetime_support()}))
    support_ok = all(t_lo <= t <= t_hi for t in rows)

    HF = homotopy_operator(F, ret)
    P = wave_operator_matrix(lat)
    witness = F - pulled_raw - koszul_differential(HF, P)
    homology_residual = supnorm(witness)

    worst = 0.0
    for _ in range(n_cauchy):
        c0 = random_config(rng, lat.nx, lat.mode)
        c1 = random_config(rng, lat.nx, lat.mode)
        cauchy = CauchyData(c0, c1)
        lhs = on_shell_restrict(F, lat, cauchy)
        rhs = on_shell_restrict(pulled, lat, cauchy)
        worst = max(worst, float(abs(lhs - rhs)))
    return TimeSliceReport(region=(t_lo, t_hi), support_rows=rows, support_ok=support_ok,
                           homology_residual=homology_residual, onshell_residual=worst,
                           cauchy_samples=n_cauchy, mode=lat.mode, tolerance=tol)
