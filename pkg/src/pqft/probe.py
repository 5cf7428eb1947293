"""Numerical microlocal probe and the discontinuous-pairing scan.

Three tools live here.  ``wavefront_probe`` estimates singular directions of a
gridded distribution by windowed FFT: multiply by a compactly supported bump,
transform, and fit the decay slope of the shell suprema per angular bin; bins
whose fitted log-log slope stays above the threshold are flagged singular.

``counterexample_scan`` drives a two-point kernel with the oscillatory test
families A(xi) = |xi|^(-K) chi e_{xi/|xi|^2} and watches the pairing
W(A(xi1) (x) B(xi2)) along paths approaching the origin: a kernel with
singular directions blows up polynomially along the matched-phase path while
staying bounded along the mismatched one, and a smooth kernel stays bounded
everywhere.

``equicontinuity_audit`` is a finite-sample boundedness audit of derivative
pairings over a family of configurations.  It is a heuristic proxy, clearly
labelled as such: finite sampling cannot certify an equicontinuity property
of an infinite-dimensional family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .functionals import LambdaScalar, MultiVectorField


# ---------------------------------------------------------------------------
# Sampled distributions on uniform grids
# ---------------------------------------------------------------------------

@dataclass
class SampledDistribution:
    """Complex samples on a uniform 1D or 2D box grid with trapezoid weight."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != len(self.lo) or len(self.lo) != len(self.hi):
            raise ValueError("grid dimensions disagree with the value array")
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box must have positive extent")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((h - l) / (n - 1)
                     for l, h, n in zip(self.lo, self.hi, self.values.shape))

    @property
    def weight(self) -> float:
        out = 1.0
        for s in self.spacing:
            out *= s
        return out

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(l, h, n)
                     for l, h, n in zip(self.lo, self.hi, self.values.shape))


def grid_1d(lo: float, hi: float, n: int, fn: Callable[[np.ndarray], np.ndarray]) -> SampledDistribution:
    x = np.linspace(lo, hi, n)
    return SampledDistribution((lo,), (hi,), fn(x))


def grid_2d(lo: float, hi: float, n: int, fn) -> SampledDistribution:
    x = np.linspace(lo, hi, n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return SampledDistribution((lo, lo), (hi, hi), fn(X, Y))


def gaussian_sample(lo: float, hi: float, n: int, center: float = 0.0,
                    width: float = 0.1, ndim: int = 2) -> SampledDistribution:
    if ndim == 1:
        return grid_1d(lo, hi, n, lambda x: np.exp(-((x - center) ** 2) / (2 * width ** 2)))
    return grid_2d(lo, hi, n,
                   lambda X, Y: np.exp(-((X - center) ** 2 + (Y - center) ** 2) / (2 * width ** 2)))


def spike_sample(lo: float, hi: float, n: int, ndim: int = 2) -> SampledDistribution:
    """Single-cell spike at the box centre, unit mass against the grid weight."""
    if ndim == 1:
        vals = np.zeros(n, dtype=complex)
        h = (hi - lo) / (n - 1)
        vals[n // 2] = 1.0 / h
        return SampledDistribution((lo,), (hi,), vals)
    vals = np.zeros((n, n), dtype=complex)
    h = (hi - lo) / (n - 1)
    vals[n // 2, n // 2] = 1.0 / (h * h)
    return SampledDistribution((lo, lo), (hi, hi), vals)


def diagonal_ridge_sample(lo: float, hi: float, n: int) -> SampledDistribution:
    """Discrete kernel of the identity pairing: a 1/h ridge along x = y."""
    vals = np.zeros((n, n), dtype=complex)
    h = (hi - lo) / (n - 1)
    np.fill_diagonal(vals, 1.0 / h)
    return SampledDistribution((lo, lo), (hi, hi), vals)


def bump_window(r2: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - r^2)) inside the unit ball of the scaled radius, 0 outside."""
    out = np.zeros_like(r2, dtype=float)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


# ---------------------------------------------------------------------------
# Windowed-FFT wavefront probe
# ---------------------------------------------------------------------------

@dataclass
class ProbeReport:
    """Per-bin decay slopes of the windowed spectrum with singular flags."""

    bin_centers_deg: list[float]
    slopes: list[float]
    flagged: list[bool]
    slope_threshold: float
    shell_edges: list[float]
    window_center: tuple[float, ...]
    window_radius: float

    @property
    def flagged_bins(self) -> list[int]:
        return [i for i, f in enumerate(self.flagged) if f]

    def to_json(self) -> dict:
        return {
            "bin_centers_deg": self.bin_centers_deg,
            "slopes": self.slopes,
            "flagged": self.flagged,
            "slope_threshold": self.slope_threshold,
            "shell_edges": self.shell_edges,
            "window_center": list(self.window_center),
            "window_radius": self.window_radius,
        }

    def csv_rows(self) -> list[tuple]:
        return [("bin_center_deg", "slope", "flagged")] + [
            (f"{c:.4f}", f"{s:.6f}", int(f))
            for c, s, f in zip(self.bin_centers_deg, self.slopes, self.flagged)]


def wavefront_probe(u: SampledDistribution, window_center: Sequence[float],
                    n_bins: int = 16, shells: int = 5,
                    window_radius: float | None = None,
                    slope_threshold: float = 3.0,
                    shell_base: float | None = None) -> ProbeReport:
    """Flag angular bins of the windowed spectrum that fail rapid decay.

    The distribution is localised with a compactly supported bump centred at
    ``window_center``, transformed, and the per-bin shell suprema are fitted
    against the shell radius on log-log axes.  A bin is flagged singular when
    its fitted slope is >= -slope_threshold.
    """
    if shells < 3:
        raise ValueError("too few shells: need at least 3 for a decay fit")
    center = tuple(float(c) for c in window_center)
    if len(center) != u.ndim:
        raise ValueError("window center dimension mismatch")
    if window_radius is None:
        window_radius = min(min(c - l, h - c) for c, l, h in zip(center, u.lo, u.hi))
    if window_radius <= 3 * max(u.spacing):
        raise ValueError("window does not fit the domain at this resolution")

    axes = u.axes()
    if u.ndim == 1:
        r2 = ((axes[0] - center[0]) / window_radius) ** 2
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        r2 = (((X - center[0]) ** 2) + ((Y - center[1]) ** 2)) / window_radius ** 2
    windowed = u.values * bump_window(r2)
    spectrum = np.abs(np.fft.fftn(windowed)) * u.weight

    freq_axes = [2 * np.pi * np.fft.fftfreq(n, d=s)
                 for n, s in zip(u.values.shape, u.spacing)]
    if u.ndim == 1:
        xi = freq_axes[0]
        radius = np.abs(xi)
        angle = np.where(xi >= 0, 0.0, np.pi)
        n_bins = 2
    else:
        XI, ETA = np.meshgrid(freq_axes[0], freq_axes[1], indexing="ij")
        radius = np.hypot(XI, ETA)
        angle = np.mod(np.arctan2(ETA, XI), 2 * np.pi)

    nyquist = min(np.pi / s for s in u.spacing)
    if shell_base is None:
        fundamental = min(2 * np.pi / (h - l) for l, h in zip(u.lo, u.hi))
        shell_base = 4 * fundamental
    edges = [shell_base * 2.0 ** s for s in range(shells + 1)]
    if edges[-1] > 0.95 * nyquist:
        raise ValueError("shell range exceeds the resolvable band; "
                         "reduce shells or refine the grid")

    bin_width = 2 * np.pi / n_bins
    bin_idx = np.minimum((angle / bin_width).astype(int), n_bins - 1)
    centers_rad = [math.log(math.sqrt(edges[s] * edges[s + 1])) for s in range(shells)]
    slopes, flagged = [], []
    floor = 1e-300
    for b in range(n_bins):
        sups = []
        for s in range(shells):
            mask = (bin_idx == b) & (radius >= edges[s]) & (radius < edges[s + 1])
            sups.append(math.log(max(spectrum[mask].max() if mask.any() else floor, floor)))
        coeffs = np.polyfit(centers_rad, sups, 1)
        slopes.append(float(coeffs[0]))
        flagged.append(bool(coeffs[0] >= -slope_threshold))
    bin_centers = [math.degrees((b + 0.5) * bin_width) for b in range(n_bins)]
    return ProbeReport(bin_centers_deg=bin_centers, slopes=slopes, flagged=flagged,
                       slope_threshold=slope_threshold, shell_edges=edges,
                       window_center=center, window_radius=window_radius)


# ---------------------------------------------------------------------------
# Oscillatory families and the pairing scan
# ---------------------------------------------------------------------------

@dataclass
class OscillatoryFamily:
    """A(xi) = |xi|^(-K) chi e_{xi/|xi|^2} on the bump's grid; A(0) = 0."""

    chi: SampledDistribution
    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("power must be a positive integer")
        if self.chi.ndim != 1:
            raise ValueError("the bump must live on a 1D grid")

    def values(self, xi: float) -> np.ndarray:
        if xi == 0:
            return np.zeros_like(self.chi.values)
        x = self.chi.axes()[0]
        freq = xi / (xi * xi)  # xi / |xi|^2 for real xi is 1/xi, sign kept
        return abs(xi) ** (-self.exponent) * self.chi.values * np.exp(-1j * freq * x)

    def pair(self, xi: float, f_values: np.ndarray) -> complex:
        """Quadrature of A(xi) against a sampled test function on the same grid."""
        return complex(np.sum(self.values(xi) * np.asarray(f_values)) * self.chi.weight)


def oscillatory_family(chi: SampledDistribution, K: int) -> OscillatoryFamily:
    return OscillatoryFamily(chi=chi, exponent=K)


def standard_bump(lo: float = -1.0, hi: float = 1.0, n: int = 4096,
                  support: float = 0.5) -> SampledDistribution:
    def fn(x):
        r2 = (x / support) ** 2
        return bump_window(r2).astype(complex)
    return grid_1d(lo, hi, n, fn)


class PairingKernel:
    """Two-point kernel as an operator pairing two sampled test functions.

    Three kinds are shipped.  ``identity`` pairs along the diagonal (the
    singular-support prototype), ``gaussian`` is a smooth separable kernel
    (empty wavefront prototype), and ``sampled`` wraps an explicit 2D grid of
    kernel values.  Structured kinds avoid materialising the N x N grid that
    fine-resolution scans would need.
    """

    def __init__(self, kind: str, grid: SampledDistribution | None = None,
                 width: float = 0.3, values: np.ndarray | None = None):
        if kind not in ("identity", "gaussian", "sampled"):
            raise ValueError(f"unknown kernel kind {kind!r}")
        self.kind = kind
        self.grid = grid
        self.width = width
        self.values = values

    def pair(self, a: np.ndarray, b: np.ndarray, axis: np.ndarray, h: float) -> complex:
        if self.kind == "identity":
            return complex(np.sum(a * b) * h)
        if self.kind == "gaussian":
            g = np.exp(-(axis ** 2) / (2 * self.width ** 2))
            return complex(np.sum(g * a) * h * np.sum(g * b) * h)
        return complex(a @ self.values @ b * h * h)


def identity_kernel() -> PairingKernel:
    return PairingKernel("identity")


def gaussian_kernel(width: float = 0.3) -> PairingKernel:
    return PairingKernel("gaussian", width=width)


def as_kernel(W) -> PairingKernel:
    """Accept a PairingKernel, or a 2D SampledDistribution over the square."""
    if isinstance(W, PairingKernel):
        return W
    if isinstance(W, SampledDistribution):
        if W.ndim != 2 or W.values.shape[0] != W.values.shape[1]:
            raise ValueError("a sampled pairing kernel must be square")
        if W.values.size > 4_000_000:
            raise ValueError("sampled kernel too large; use a structured kernel")
        return PairingKernel("sampled", values=W.values)
    raise TypeError("expected a PairingKernel or a 2D SampledDistribution")


@dataclass
class ScanReport:
    """Pairing values along a path of frequency pairs, with a growth fit."""

    rows: list[tuple[complex, complex, float]]  # (xi1, xi2, |value|)
    growth_slope: float | None
    max_abs: float
    params: dict

    def to_json(self) -> dict:
        return {
            "rows": [{"xi1": [r[0].real, r[0].imag], "xi2": [r[1].real, r[1].imag],
                      "abs_value": r[2]} for r in self.rows],
            "growth_slope": self.growth_slope,
            "max_abs": self.max_abs,
            "params": self.params,
        }

    def csv_rows(self) -> list[tuple]:
        header = ("xi1_re", "xi1_im", "xi2_re", "xi2_im", "abs_value")
        body = [(f"{r[0].real:.10g}", f"{r[0].imag:.10g}", f"{r[1].real:.10g}",
                 f"{r[1].imag:.10g}", f"{r[2]:.10g}") for r in self.rows]
        return [header] + body


def counterexample_scan(W, K: int, L: int, xi_path: Sequence[tuple[float, float]],
                        chi1: SampledDistribution | None = None,
                        chi2: SampledDistribution | None = None,
                        guard_factor: float = 6.0) -> ScanReport:
    """Evaluate W(A(xi1) (x) B(xi2)) along a frequency path by quadrature.

    The oscillation frequencies grow like 1/|xi| as the path approaches the
    origin; the resolution guard rejects paths the quadrature grid cannot
    resolve rather than aliasing silently.
    """
    kernel = as_kernel(W)
    chi1 = chi1 if chi1 is not None else standard_bump()
    chi2 = chi2 if chi2 is not None else chi1
    if chi1.values.shape != chi2.values.shape or chi1.lo != chi2.lo:
        raise ValueError("the two bumps must share a grid")
    A = oscillatory_family(chi1, K)
    B = oscillatory_family(chi2, L)
    h = chi1.spacing[0]
    max_freq = max((1.0 / abs(x) for pair in xi_path for x in pair if x != 0),
                   default=0.0)
    if max_freq > 0 and 2 * np.pi / h < guard_factor * max_freq:
        raise ValueError(
            "quadrature grid too coarse for the highest oscillation frequency "
            f"on the path ({max_freq:.3g}); refine the grid or shorten the path")
    axis = chi1.axes()[0]
    rows = []
    for xi1, xi2 in xi_path:
        value = kernel.pair(A.values(xi1), B.values(xi2), axis, h)
        rows.append((complex(xi1), complex(xi2), abs(value)))
    finite = [(abs(r[0]), r[2]) for r in rows if r[0] != 0 and r[2] > 0]
    slope = None
    if len(finite) >= 2:
        xs = np.log([f[0] for f in finite])
        ys = np.log([f[1] for f in finite])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return ScanReport(rows=rows, growth_slope=slope,
                      max_abs=max((r[2] for r in rows), default=0.0),
                      params={"K": K, "L": L, "kind": kernel.kind,
                              "grid_points": chi1.values.shape[0],
                              "guard_factor": guard_factor})


def matched_path(magnitudes: Sequence[float]) -> list[tuple[float, float]]:
    """The phase-cancelling approach xi2 = -xi1."""
    return [(m, -m) for m in magnitudes]


def mismatched_path(magnitudes: Sequence[float]) -> list[tuple[float, float]]:
    """The oscillatory approach xi2 = +xi1."""
    return [(m, m) for m in magnitudes]


def find_growth_orders(W, xi_path, max_order: int = 3,
                       chi1: SampledDistribution | None = None,
                       chi2: SampledDistribution | None = None) -> dict:
    """Search small (K, L) for unbounded growth along a path; honest failure.

    Returns the first order pair whose fitted slope is clearly negative
    (growth toward the origin), or reports that none was found up to
    ``max_order``.
    """
    for K in range(1, max_order + 1):
        for L in range(1, max_order + 1):
            rep = counterexample_scan(W, K, L, xi_path, chi1=chi1, chi2=chi2)
            if rep.growth_slope is not None and rep.growth_slope < -0.5:
                return {"found": True, "K": K, "L": L, "slope": rep.growth_slope}
    return {"found": False, "max_order": max_order,
            "note": "no unbounded pair detected on this path up to max_order"}


# ---------------------------------------------------------------------------
# Finite-sample equicontinuity audit
# ---------------------------------------------------------------------------

@dataclass
class AuditReport:
    """Boundedness audit of derivative pairings over a configuration family.

    Finite proxy only: sampling a family can expose unboundedness but can
    never certify equicontinuity of the underlying infinite family.
    """

    derivative_order: int
    family_size: int
    entries: list[dict]
    prefix_sups: list[float]
    heuristic: bool = True

    def to_json(self) -> dict:
        return {
            "derivative_order": self.derivative_order,
            "family_size": self.family_size,
            "entries": self.entries,
            "prefix_sups": self.prefix_sups,
            "heuristic": self.heuristic,
        }


def _directional_power(F: MultiVectorField, phi: np.ndarray, z: np.ndarray, n: int):
    """F^(n)(phi){z, ..., z} via the epsilon-polynomial of F(phi + eps z)."""
    eps_phi = np.empty(len(phi), dtype=object)
    for i in range(len(phi)):
        eps_phi[i] = LambdaScalar.affine(phi[i], z[i])
    value = F.evaluate(eps_phi)
    if not isinstance(value, LambdaScalar):
        return value if n == 0 else 0.0
    coeffs = value.coeffs
    return coeffs[n] * math.factorial(n) if n < len(coeffs) else 0.0


def equicontinuity_audit(F: MultiVectorField, family: Sequence[np.ndarray],
                         tests: Sequence[tuple[str, np.ndarray]], n: int,
                         proxy_scale: float = 1.0) -> AuditReport:
    """Sup over the family of |F^(n)(phi){Z, .., Z}| per tagged test vector.

    Each entry compares the observed sup against the proxy seminorm
    ``(proxy_scale * max|Z|)^n`` and the prefix table records how the sup
    grows as the family is refined front-to-back.
    """
    if F.k != 0:
        raise ValueError("audit applies to degree-0 functionals")
    if not family:
        raise ValueError("family must be nonempty")
    entries = []
    all_values = []
    for tag, z in tests:
        z = np.asarray(z)
        vals = [abs(_directional_power(F, np.asarray(phi), z, n)) for phi in family]
        all_values.append(vals)
        proxy = (proxy_scale * float(np.max(np.abs(z)))) ** n if n else 1.0
        sup = float(max(vals))
        entries.append({
            "tag": tag,
            "sup_abs": sup,
            "proxy_seminorm": proxy,
            "ratio": sup / proxy if proxy > 0 else float("inf"),
        })
    prefix = []
    for i in range(1, len(family) + 1):
        prefix.append(float(max(max(vals[:i]) for vals in all_values)))
    return AuditReport(derivative_order=n, family_size=len(family),
                       entries=entries, prefix_sups=prefix)
