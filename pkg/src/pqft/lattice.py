"""Discrete 1+1D spacetime, the leapfrog wave operator, and its Green functions.

The spacetime is a finite grid of ``nt`` time rows by ``nx`` periodic spatial
sites.  Sites are flattened as ``site = t * nx + x``.  The wave operator acts
on the interior rows ``1 <= t <= nt-2`` only; the two boundary rows play the
role of past/future data and are excluded from every operator identity.

Two arithmetic modes are supported.  In ``"float"`` mode all kernels are
float64 (the two-point kernel is complex128).  In ``"rational"`` mode the
retarded/advanced/commutator kernels, the switching function and the
retraction maps are exact ``fractions.Fraction`` arithmetic, so algebraic
identities such as ``P @ alpha == 1`` hold exactly, not just to round-off.
The two-point kernel involves the dispersion frequencies and is always
computed in complex floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

FLOAT = "float"
RATIONAL = "rational"
MODES = (FLOAT, RATIONAL)


def _as_fraction(value) -> Fraction:
    """Exact rational from user input; floats go through repr to keep 0.5 -> 1/2."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def zeros(n: int, mode: str, complex_ok: bool = False):
    """Length-n zero vector in the requested arithmetic."""
    if mode == RATIONAL:
        out = np.empty(n, dtype=object)
        out[:] = Fraction(0)
        return out
    return np.zeros(n, dtype=complex if complex_ok else float)


def zeros_matrix(n: int, m: int, mode: str):
    if mode == RATIONAL:
        out = np.empty((n, m), dtype=object)
        out[:] = Fraction(0)
        return out
    return np.zeros((n, m), dtype=float)


def to_float(arr: np.ndarray) -> np.ndarray:
    """Float64/complex view of a kernel in either mode."""
    if arr.dtype == object:
        return np.array([[float(v) for v in row] for row in arr]) if arr.ndim == 2 \
            else np.array([float(v) for v in arr])
    return arr


@dataclass(frozen=True)
class LatticeSpacetime:
    """Finite 1+1D lattice with periodic space and constant-time Cauchy rows."""

    nt: int
    nx: int
    dt: Fraction
    dx: Fraction
    mass: Fraction
    mode: str = FLOAT

    @property
    def cfl(self) -> Fraction:
        return self.dt / self.dx

    @property
    def n_sites(self) -> int:
        return self.nt * self.nx

    def site(self, t: int, x: int) -> int:
        return t * (self.nx) + (x % self.nx)

    def coords(self, site: int) -> tuple[int, int]:
        return divmod(site, self.nx)

    def interior_rows(self) -> range:
        return range(1, self.nt - 1)

    def is_interior_site(self, site: int) -> bool:
        t, _ = self.coords(site)
        return 1 <= t <= self.nt - 2

    def scalar(self, value) -> object:
        """Lift a rational number into this lattice's arithmetic."""
        frac = _as_fraction(value)
        return frac if self.mode == RATIONAL else float(frac)

    def params_dict(self) -> dict:
        return {
            "nt": self.nt,
            "nx": self.nx,
            "dt": str(self.dt),
            "dx": str(self.dx),
            "mass": str(self.mass),
            "mode": self.mode,
        }


def build_lattice(nt: int, nx: int, dt, dx, mass, mode: str = FLOAT) -> LatticeSpacetime:
    """Validated lattice constructor.

    Rejects acausal spacings (cfl > 1), lattices with no interior rows, and
    parameter sets for which the leapfrog dispersion relation has no real
    frequency for some spatial mode (the mode-sum two-point kernel would not
    exist).
    """
    if mode not in MODES:
        raise ValueError(f"unknown arithmetic mode {mode!r}")
    if nt < 4:
        raise ValueError("nt too small: need nt >= 4 so interior rows remain")
    if nx < 2:
        raise ValueError("nx too small: need nx >= 2")
    dt_f, dx_f, m_f = _as_fraction(dt), _as_fraction(dx), _as_fraction(mass)
    if dt_f <= 0 or dx_f <= 0:
        raise ValueError("lattice spacings must be positive")
    if m_f < 0:
        raise ValueError("mass must be nonnegative")
    if dt_f / dx_f > 1:
        raise ValueError("acausal lattice: cfl = dt/dx exceeds 1")
    return LatticeSpacetime(nt=nt, nx=nx, dt=dt_f, dx=dx_f, mass=m_f, mode=mode)


def dispersion_band_open(lat: LatticeSpacetime) -> bool:
    """True when every spatial mode has a real frequency strictly inside the band.

    At the band edge the two-point mode normalisation degenerates, so the
    propagator-set builder rejects such lattices.
    """
    band = (lat.dt * lat.dt / 4) * (lat.mass * lat.mass + 4 / (lat.dx * lat.dx))
    return band < 1


# ---------------------------------------------------------------------------
# Wave operator
# ---------------------------------------------------------------------------

def apply_wave_operator(lat: LatticeSpacetime, phi: np.ndarray) -> np.ndarray:
    """Apply the 5-point leapfrog stencil; boundary rows of the result are zero."""
    phi = np.asarray(phi)
    if phi.shape != (lat.n_sites,):
        raise ValueError(f"field must have {lat.n_sites} entries, got {phi.shape}")
    grid = phi.reshape(lat.nt, lat.nx)
    inv_dt2 = 1 / (lat.dt * lat.dt)
    inv_dx2 = 1 / (lat.dx * lat.dx)
    m2 = lat.mass * lat.mass
    if lat.mode == FLOAT:
        inv_dt2, inv_dx2, m2 = float(inv_dt2), float(inv_dx2), float(m2)
        out = np.zeros_like(grid, dtype=np.result_type(grid.dtype, float))
    else:
        out = np.empty_like(grid, dtype=object)
        out[:] = Fraction(0)
    tt = (grid[2:, :] - 2 * grid[1:-1, :] + grid[:-2, :]) * inv_dt2
    xx = (np.roll(grid, -1, axis=1)[1:-1, :] - 2 * grid[1:-1, :]
          + np.roll(grid, 1, axis=1)[1:-1, :]) * inv_dx2
    out[1:-1, :] = tt - xx + m2 * grid[1:-1, :]
    return out.reshape(lat.n_sites)


def wave_operator_matrix(lat: LatticeSpacetime) -> np.ndarray:
    """Dense matrix of P over flattened sites (rows for boundary times are zero)."""
    n = lat.n_sites
    P = zeros_matrix(n, n, lat.mode)
    inv_dt2 = 1 / (lat.dt * lat.dt)
    inv_dx2 = 1 / (lat.dx * lat.dx)
    m2 = lat.mass * lat.mass
    if lat.mode == FLOAT:
        inv_dt2, inv_dx2, m2 = float(inv_dt2), float(inv_dx2), float(m2)
    for t in lat.interior_rows():
        for x in range(lat.nx):
            row = lat.site(t, x)
            P[row, lat.site(t + 1, x)] += inv_dt2
            P[row, lat.site(t - 1, x)] += inv_dt2
            P[row, lat.site(t, x)] += -2 * inv_dt2 + 2 * inv_dx2 + m2
            P[row, lat.site(t, x + 1)] += -inv_dx2
            P[row, lat.site(t, x - 1)] += -inv_dx2
    return P


def solve_cauchy(lat: LatticeSpacetime, phi0: np.ndarray, phi1: np.ndarray,
                 source: np.ndarray | None = None) -> np.ndarray:
    """Leapfrog evolution of Cauchy rows (t=0,1); solves P phi = source on interior rows."""
    phi0 = np.asarray(phi0)
    phi1 = np.asarray(phi1)
    if phi0.shape != (lat.nx,) or phi1.shape != (lat.nx,):
        raise ValueError("Cauchy rows must each have nx entries")
    dt2 = lat.dt * lat.dt
    inv_dx2 = 1 / (lat.dx * lat.dx)
    m2 = lat.mass * lat.mass
    if lat.mode == FLOAT:
        dt2, inv_dx2, m2 = float(dt2), float(inv_dx2), float(m2)
        grid = np.zeros((lat.nt, lat.nx), dtype=np.result_type(phi0.dtype, phi1.dtype, float))
    else:
        grid = np.empty((lat.nt, lat.nx), dtype=object)
        grid[:] = Fraction(0)
    grid[0, :] = phi0
    grid[1, :] = phi1
    src = None if source is None else np.asarray(source).reshape(lat.nt, lat.nx)
    for t in range(1, lat.nt - 1):
        lap = (np.roll(grid[t], -1) - 2 * grid[t] + np.roll(grid[t], 1)) * inv_dx2
        drive = src[t] if src is not None else 0
        grid[t + 1] = 2 * grid[t] - grid[t - 1] + dt2 * (drive + lap - m2 * grid[t])
    return grid.reshape(lat.n_sites)


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------

@dataclass
class PropagatorSet:
    """Retarded/advanced/commutator kernels of P plus the two-point kernel.

    ``retarded``, ``advanced`` and ``commutator`` live in the lattice's
    arithmetic mode; ``twopoint`` is always complex128 (its construction uses
    the dispersion frequencies).
    """

    lattice: LatticeSpacetime
    retarded: np.ndarray
    advanced: np.ndarray
    commutator: np.ndarray
    twopoint: np.ndarray


def _retarded_profile(lat: LatticeSpacetime) -> np.ndarray:
    """g[s, xi]: response at time offset s >= 0 and spatial offset xi to a unit
    source one leapfrog row in the past.  Exact translation invariance of the
    stencil makes one forward evolution enough for every source column."""
    dt2 = lat.dt * lat.dt
    inv_dx2 = 1 / (lat.dx * lat.dx)
    m2 = lat.mass * lat.mass
    if lat.mode == FLOAT:
        dt2, inv_dx2, m2 = float(dt2), float(inv_dx2), float(m2)
        g = np.zeros((lat.nt, lat.nx))
        g[1, 0] = dt2
    else:
        g = np.empty((lat.nt, lat.nx), dtype=object)
        g[:] = Fraction(0)
        g[1, 0] = dt2
    for s in range(1, lat.nt - 1):
        lap = (np.roll(g[s], -1) - 2 * g[s] + np.roll(g[s], 1)) * inv_dx2
        g[s + 1] = 2 * g[s] - g[s - 1] + dt2 * (lap - m2 * g[s])
    return g


def _dispersion_omegas(lat: LatticeSpacetime) -> np.ndarray:
    """Leapfrog frequencies per spatial DFT mode: sin^2(w dt/2) = dt^2/4 (m^2 + 4 sin^2(k dx/2)/dx^2)."""
    if not dispersion_band_open(lat):
        raise ValueError("dispersion relation unsolvable for some spatial mode: "
                         "dt^2/4 * (m^2 + 4/dx^2) must stay below 1")
    dt, dx, m = float(lat.dt), float(lat.dx), float(lat.mass)
    kappa = np.arange(lat.nx)
    rhs = (dt * dt / 4.0) * (m * m + (4.0 / (dx * dx)) * np.sin(np.pi * kappa / lat.nx) ** 2)
    return (2.0 / dt) * np.arcsin(np.sqrt(rhs))


def _twopoint_kernel(lat: LatticeSpacetime, commutator_float: np.ndarray) -> np.ndarray:
    """Frequency-split two-point kernel.

    Per spatial mode the time profile is N_k exp(-i w_k s dt) with N_k fixed so
    the antisymmetric part of the mode sum reproduces the commutator kernel.
    The symmetric part is then recombined with (i/2) * commutator so the
    antisymmetry identity holds entrywise to machine precision by construction.
    A massless zero mode has no oscillatory profile; its linear-in-time
    bisolution (i dt^2 s / 2) carries the required antisymmetric part.
    """
    nt, nx = lat.nt, lat.nx
    dt = float(lat.dt)
    omegas = _dispersion_omegas(lat)
    s = np.arange(-(nt - 1), nt)  # all time offsets
    profiles = np.zeros((nx, len(s)), dtype=complex)
    for k, w in enumerate(omegas):
        if w == 0.0:
            profiles[k] = 1j * dt * dt * s / 2.0
        else:
            norm = -dt * dt / (2.0 * math.sin(w * dt))
            profiles[k] = norm * np.exp(-1j * w * dt * s)
    # assemble M[(t,x),(t',x')] = (1/nx) sum_k profile_k(t-t') e^{2 pi i k (x-x')/nx}
    t = np.arange(nt)
    x = np.arange(nx)
    tdiff = t[:, None] - t[None, :] + (nt - 1)  # index into s
    xdiff = x[:, None] - x[None, :]
    phase = np.exp(2j * np.pi * np.arange(nx)[:, None, None] * xdiff[None, :, :] / nx)
    M = np.zeros((nt * nx, nt * nx), dtype=complex)
    for k in range(nx):
        time_block = profiles[k][tdiff]        # (nt, nt)
        M += np.kron(time_block, phase[k]) / nx
    sym = (M + M.T) / 2.0
    return sym + 0.5j * commutator_float


def compute_propagators(lat: LatticeSpacetime) -> PropagatorSet:
    """Build the full propagator set for a lattice.

    The retarded kernel is the forward leapfrog response (strictly causal); the
    advanced kernel is its transpose; their difference is the commutator
    kernel.  The two-point kernel is a mode-sum frequency splitting whose
    antisymmetric part equals (i/2) times the commutator exactly.
    """
    n = lat.n_sites
    g = _retarded_profile(lat)
    retarded = zeros_matrix(n, n, lat.mode)
    for tb in range(lat.nt):
        for ta in range(tb, lat.nt):
            srow = g[ta - tb]
            for xb in range(lat.nx):
                a0 = ta * lat.nx
                b = tb * lat.nx + xb
                for xa in range(lat.nx):
                    retarded[a0 + xa, b] = srow[(xa - xb) % lat.nx]
    advanced = retarded.T.copy()
    commutator = retarded - advanced
    comm_float = to_float(commutator) if lat.mode == RATIONAL else commutator
    twopoint = _twopoint_kernel(lat, comm_float)
    return PropagatorSet(lattice=lat, retarded=retarded, advanced=advanced,
                         commutator=commutator, twopoint=twopoint)


# ---------------------------------------------------------------------------
# Switching function and retraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchingFunction:
    """Time-row switching profile: 0 up to t_minus, 1 from t_plus, smoothstep between."""

    lattice: LatticeSpacetime
    t_minus: int
    t_plus: int
    theta: tuple  # per time row, in the lattice arithmetic

    def dtheta_support_rows(self) -> tuple[int, ...]:
        """Rows where the backward time difference of theta is nonzero: (t_minus, t_plus]."""
        th = self.theta
        return tuple(t for t in range(1, len(th)) if th[t] != th[t - 1])

    def active_rows(self) -> tuple[int, ...]:
        """Rows where theta is not constant across forward or backward neighbours.

        This is the stencil-level support of dtheta: the wave-operator stencil
        reaches one row each way, so retraction pullbacks can populate exactly
        these rows, [t_minus, t_plus].
        """
        th = self.theta
        rows = []
        for t in range(len(th)):
            lo = max(t - 1, 0)
            hi = min(t + 1, len(th) - 1)
            if th[lo] != th[t] or th[t] != th[hi]:
                rows.append(t)
        return tuple(rows)

    def as_site_vector(self) -> np.ndarray:
        lat = self.lattice
        out = zeros(lat.n_sites, lat.mode)
        for t in range(lat.nt):
            out[t * lat.nx:(t + 1) * lat.nx] = self.theta[t]
        return out


def make_switching(lat: LatticeSpacetime, t_minus: int, t_plus: int) -> SwitchingFunction:
    """Monotone polynomial smoothstep 3 s^2 - 2 s^3 across (t_minus, t_plus)."""
    if not (1 <= t_minus < t_plus <= lat.nt - 2):
        raise ValueError("switching window must satisfy 1 <= t_minus < t_plus <= nt-2")
    width = t_plus - t_minus
    theta = []
    for t in range(lat.nt):
        if t <= t_minus:
            theta.append(lat.scalar(0))
        elif t >= t_plus:
            theta.append(lat.scalar(1))
        else:
            srel = Fraction(t - t_minus, width)
            theta.append(lat.scalar(3 * srel ** 2 - 2 * srel ** 3))
    return SwitchingFunction(lattice=lat, t_minus=t_minus, t_plus=t_plus, theta=tuple(theta))


class Retraction:
    """The one-sided inverse alpha and the affine retraction gamma_lambda.

    ``alpha`` sends an interior-supported density h to
    advanced((1-theta) h) + retarded(theta h); it satisfies P(alpha h) = h on
    interior rows.  ``gamma(lam, phi) = phi + (lam - 1) alpha(P phi)`` is
    affine in lam, the identity at lam = 1, and a projection onto ker P at
    lam = 0.
    """

    def __init__(self, props: PropagatorSet, switching: SwitchingFunction):
        if switching.lattice.n_sites != props.lattice.n_sites:
            raise ValueError("switching function and propagators disagree on the lattice")
        self.props = props
        self.switching = switching
        self.lattice = props.lattice
        self._alpha_matrix = None
        self._alpha_p = None
        self._gamma0_matrix = None

    # -- matrices (cached; used by coefficient-level pullbacks) --------------
    def alpha_matrix(self) -> np.ndarray:
        if self._alpha_matrix is None:
            lat = self.lattice
            theta = self.switching.as_site_vector()
            one = lat.scalar(1)
            # column scaling: alpha[:, j] = advanced[:, j](1-theta_j) + retarded[:, j] theta_j
            self._alpha_matrix = (self.props.advanced * (one - theta)[None, :]
                                  + self.props.retarded * theta[None, :])
        return self._alpha_matrix

    def alpha_p_matrix(self) -> np.ndarray:
        if self._alpha_p is None:
            P = wave_operator_matrix(self.lattice)
            self._alpha_p = np.dot(self.alpha_matrix(), P)
        return self._alpha_p

    def gamma0_matrix(self) -> np.ndarray:
        if self._gamma0_matrix is None:
            n = self.lattice.n_sites
            eye = zeros_matrix(n, n, self.lattice.mode)
            one = self.lattice.scalar(1)
            for i in range(n):
                eye[i, i] = one
            self._gamma0_matrix = eye - self.alpha_p_matrix()
        return self._gamma0_matrix

    # -- vector-level maps ----------------------------------------------------
    def alpha(self, h: np.ndarray) -> np.ndarray:
        h = np.asarray(h)
        lat = self.lattice
        if h.shape != (lat.n_sites,):
            raise ValueError("alpha expects a site vector")
        grid = h.reshape(lat.nt, lat.nx)
        if np.any(grid[0] != 0) or np.any(grid[-1] != 0):
            raise ValueError(
                "one-sided inverse property unavailable at boundary: "
                "h must vanish on the first and last time rows"
            )
        theta = self.switching.as_site_vector()
        one = lat.scalar(1)
        return np.dot(self.props.advanced, (one - theta) * h) + np.dot(self.props.retarded, theta * h)

    def gamma(self, lam, phi: np.ndarray) -> np.ndarray:
        lam = self.lattice.scalar(lam)
        pphi = apply_wave_operator(self.lattice, phi)
        one = self.lattice.scalar(1)
        return phi + (lam - one) * self.alpha(pphi)

    def gamma0(self, phi: np.ndarray) -> np.ndarray:
        return self.gamma(0, phi)


def alpha_apply(ret: Retraction, h: np.ndarray) -> np.ndarray:
    return ret.alpha(h)


def gamma_map(ret: Retraction, lam, phi: np.ndarray) -> np.ndarray:
    return ret.gamma(lam, phi)


# ---------------------------------------------------------------------------
# Causal hull
# ---------------------------------------------------------------------------

def periodic_distance(nx: int, x0: int, x1: int) -> int:
    d = abs((x0 - x1) % nx)
    return min(d, nx - d)


def causal_hull(lat: LatticeSpacetime, sites: Iterable[int]) -> frozenset[int]:
    """Past and future discrete cone of a site set, slope 1/cfl in index units.

    The hull bounds both the stencil reach (one site per step) and the physical
    light cone, so propagator supports always stay inside it.
    """
    sites = set(sites)
    if not sites:
        return frozenset()
    inv_cfl = lat.dx / lat.dt  # sites per time step, >= 1 for a causal lattice
    out = set()
    for s in sites:
        t0, x0 = lat.coords(s)
        for t in range(lat.nt):
            reach = abs(t - t0) * inv_cfl
            for x in range(lat.nx):
                if periodic_distance(lat.nx, x, x0) <= reach:
                    out.add(lat.site(t, x))
    return frozenset(out)
