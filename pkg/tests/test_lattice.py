"""Lattice, wave operator, propagators, switching, retraction, causal hull."""

import random
from fractions import Fraction

import numpy as np
import pytest

from pqft.lattice import (Retraction, alpha_apply, apply_wave_operator, build_lattice,
                          causal_hull, compute_propagators, gamma_map, make_switching,
                          periodic_distance, solve_cauchy, to_float,
                          wave_operator_matrix)


class TestBuildLattice:
    def test_direct_construction(self):
        lat = build_lattice(8, 8, 0.5, 1.0, 1.0)
        assert lat.n_sites == 64
        assert lat.cfl == Fraction(1, 2)

    def test_acausal_rejected(self):
        with pytest.raises(ValueError, match="acausal lattice"):
            build_lattice(8, 8, 2.0, 1.0, 1.0)

    def test_nt_too_small(self):
        with pytest.raises(ValueError, match="nt too small"):
            build_lattice(3, 8, 0.5, 1.0, 1.0)

    def test_nonpositive_spacing_rejected(self):
        with pytest.raises(ValueError):
            build_lattice(8, 8, 0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            build_lattice(8, 8, 0.5, -1.0, 1.0)

    def test_exact_rational_spacings(self):
        lat = build_lattice(8, 8, "1/2", "1", "1", mode="rational")
        assert lat.dt == Fraction(1, 2)


class TestWaveOperator:
    def test_zero_field(self, float_setup):
        lat, _, _ = float_setup
        assert np.all(apply_wave_operator(lat, np.zeros(lat.n_sites)) == 0)

    def test_linear_in_time_massless(self):
        lat = build_lattice(8, 8, 0.5, 1.0, 0.0)
        phi = np.array([t * float(lat.dt) for t in range(lat.nt) for _ in range(lat.nx)])
        out = apply_wave_operator(lat, phi)
        assert np.abs(out).max() < 1e-12

    def test_delta_stencil_values(self):
        lat = build_lattice(8, 8, 1.0, 1.0, 1.0)  # unit spacings, unit mass
        phi = np.zeros(lat.n_sites)
        t0, x0 = 4, 3
        phi[lat.site(t0, x0)] = 1.0
        out = apply_wave_operator(lat, phi)
        assert out[lat.site(t0, x0)] == pytest.approx(5.0)  # 2/dt^2 + 2/dx^2 + m^2
        for neighbor, value in (((t0 + 1, x0), 1.0), ((t0 - 1, x0), 1.0),
                                ((t0, x0 + 1), -1.0), ((t0, x0 - 1), -1.0)):
            assert out[lat.site(*neighbor)] == pytest.approx(value)

    def test_shape_mismatch(self, float_setup):
        lat, _, _ = float_setup
        with pytest.raises(ValueError):
            apply_wave_operator(lat, np.zeros(lat.n_sites + 1))

    def test_matrix_matches_stencil(self, float_setup):
        lat, _, _ = float_setup
        P = wave_operator_matrix(lat)
        rng = np.random.default_rng(0)
        phi = rng.normal(size=lat.n_sites)
        assert np.abs(P @ phi - apply_wave_operator(lat, phi)).max() < 1e-12


class TestPropagators:
    def test_retarded_strictly_causal(self, float_setup):
        lat, props, _ = float_setup
        R = props.retarded
        for a in range(lat.n_sites):
            ta, xa = lat.coords(a)
            for b in range(lat.n_sites):
                tb, xb = lat.coords(b)
                if R[a, b] != 0:
                    assert ta > tb
                    assert periodic_distance(lat.nx, xa, xb) <= (ta - tb) * float(1 / lat.cfl)

    def test_green_identity(self, float_setup):
        lat, props, _ = float_setup
        P = wave_operator_matrix(lat)
        resid = P @ props.retarded
        for b in range(lat.n_sites):
            e = np.zeros(lat.n_sites)
            e[b] = 1.0
            target = e if lat.is_interior_site(b) else np.zeros(lat.n_sites)
            interior = resid[lat.nx:-lat.nx, b]
            assert np.abs(interior - target[lat.nx:-lat.nx]).max() < 1e-12

    def test_advanced_is_transpose(self, float_setup):
        _, props, _ = float_setup
        assert np.array_equal(props.advanced, props.retarded.T)

    def test_hadamard_antisymmetric_part_exact(self, float_setup):
        lat, props, _ = float_setup
        D = props.twopoint
        assert np.abs((D - D.T) - 1j * props.commutator).max() <= 1e-12

    def test_bisolution_on_interior_rows(self, float_setup):
        lat, props, _ = float_setup
        P = wave_operator_matrix(lat)
        left = (P @ props.twopoint)[lat.nx:-lat.nx, :]
        right = (props.twopoint @ P.T)[:, lat.nx:-lat.nx]
        assert np.abs(left).max() <= 1e-9
        assert np.abs(right).max() <= 1e-9

    def test_rational_mode_kernels_exact(self, rational_setup):
        lat, props, _ = rational_setup
        P = wave_operator_matrix(lat)
        b = lat.site(2, 3)
        col = props.retarded[:, b]
        resid = np.dot(P, col)
        for s in range(lat.nx, lat.n_sites - lat.nx):
            expect = Fraction(1) if s == b else Fraction(0)
            assert resid[s] == expect

    def test_massless_zero_mode_supported(self):
        lat = build_lattice(8, 4, 0.5, 1.0, 0.0)
        props = compute_propagators(lat)
        D = props.twopoint
        assert np.abs((D - D.T) - 1j * props.commutator).max() <= 1e-12


class TestSwitching:
    def test_profile_shape(self, float_setup):
        lat, _, _ = float_setup
        sw = make_switching(lat, 2, 5)
        theta = [float(v) for v in sw.theta]
        assert theta[:3] == [0.0, 0.0, 0.0]
        assert theta[5:] == [1.0, 1.0, 1.0]
        assert all(theta[i] < theta[i + 1] for i in (2, 3, 4))

    def test_reversed_window_rejected(self, float_setup):
        lat, _, _ = float_setup
        with pytest.raises(ValueError):
            make_switching(lat, 5, 5)
        with pytest.raises(ValueError):
            make_switching(lat, 0, 3)
        with pytest.raises(ValueError):
            make_switching(lat, 2, 7)

    def test_exact_plateau_values(self, rational_setup):
        lat, _, _ = rational_setup
        sw = make_switching(lat, 2, 5)
        assert sw.theta[2] == 0 and sw.theta[5] == 1
        assert sw.dtheta_support_rows() == (3, 4, 5)
        assert sw.active_rows() == (2, 3, 4, 5)


class TestRetraction:
    def test_alpha_zero(self, float_setup):
        lat, _, ret = float_setup
        assert np.all(alpha_apply(ret, np.zeros(lat.n_sites)) == 0)

    def test_one_sided_inverse(self, float_setup):
        lat, _, ret = float_setup
        rng = np.random.default_rng(1)
        for _ in range(20):
            h = rng.normal(size=lat.n_sites)
            h[:lat.nx] = 0.0
            h[-lat.nx:] = 0.0
            resid = apply_wave_operator(lat, alpha_apply(ret, h)) - h
            assert np.abs(resid[lat.nx:-lat.nx]).max() <= 1e-10

    def test_boundary_support_rejected(self, float_setup):
        lat, _, ret = float_setup
        h = np.zeros(lat.n_sites)
        h[0] = 1.0
        with pytest.raises(ValueError, match="one-sided inverse"):
            alpha_apply(ret, h)

    def test_alpha_reduces_to_retarded_in_plateau(self, float_setup):
        lat, props, ret = float_setup
        h = np.zeros(lat.n_sites)
        site = lat.site(6, 2)  # theta == 1 from row 5 on
        h[site] = 1.3
        expect = props.retarded @ h
        assert np.abs(alpha_apply(ret, h) - expect).max() == 0

    def test_gamma_identity_at_one(self, float_setup):
        lat, _, ret = float_setup
        phi = np.random.default_rng(2).normal(size=lat.n_sites)
        assert np.abs(gamma_map(ret, 1, phi) - phi).max() < 1e-14

    def test_gamma_fixes_solutions(self, float_setup):
        lat, _, ret = float_setup
        rng = np.random.default_rng(3)
        phi = solve_cauchy(lat, rng.normal(size=lat.nx), rng.normal(size=lat.nx))
        for lam in (0, Fraction(1, 3), 0.5, 1):
            assert np.abs(gamma_map(ret, lam, phi) - phi).max() <= 1e-10

    def test_gamma0_projection(self, float_setup):
        lat, _, ret = float_setup
        rng = np.random.default_rng(4)
        for _ in range(10):
            phi = rng.normal(size=lat.n_sites)
            g0 = gamma_map(ret, 0, phi)
            assert np.abs(apply_wave_operator(lat, g0)).max() <= 1e-10
            assert np.abs(gamma_map(ret, 0, g0) - g0).max() <= 1e-10

    def test_gamma_scales_wave_operator(self, float_setup):
        lat, _, ret = float_setup
        rng = np.random.default_rng(5)
        phi = rng.normal(size=lat.n_sites)
        pphi = apply_wave_operator(lat, phi)
        for lam in (0, Fraction(1, 3), 0.5, 1):
            out = apply_wave_operator(lat, gamma_map(ret, lam, phi))
            assert np.abs(out - float(lam) * pphi).max() <= 1e-10

    def test_rational_alpha_exact(self, rational_setup, rng):
        lat, _, ret = rational_setup
        h = np.empty(lat.n_sites, dtype=object)
        for i in range(lat.n_sites):
            h[i] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
        h[:lat.nx] = Fraction(0)
        h[-lat.nx:] = Fraction(0)
        resid = apply_wave_operator(lat, alpha_apply(ret, h)) - h
        assert all(v == 0 for v in resid[lat.nx:-lat.nx])


class TestCausalHull:
    def test_empty(self, float_setup):
        lat, _, _ = float_setup
        assert causal_hull(lat, []) == frozenset()

    def test_one_step_cone_at_unit_cfl(self):
        lat = build_lattice(8, 8, 0.5, 0.5, 1.0)  # cfl = 1
        t0, x0 = 3, 4
        hull = causal_hull(lat, [lat.site(t0, x0)])
        row = [x for x in range(lat.nx) if lat.site(t0 + 1, x) in hull]
        assert sorted(row) == sorted({(x0 - 1) % 8, x0, (x0 + 1) % 8})

    def test_idempotent(self, float_setup):
        lat, _, _ = float_setup
        sites = {lat.site(3, 1), lat.site(5, 6)}
        hull = causal_hull(lat, sites)
        assert causal_hull(lat, hull) == hull

    def test_contains_input(self, float_setup):
        lat, _, _ = float_setup
        sites = {lat.site(2, 2)}
        assert sites <= causal_hull(lat, sites)


class TestSolveCauchy:
    def test_kernel_membership(self, float_setup):
        lat, _, _ = float_setup
        rng = np.random.default_rng(6)
        phi = solve_cauchy(lat, rng.normal(size=lat.nx), rng.normal(size=lat.nx))
        assert np.abs(apply_wave_operator(lat, phi)).max() < 1e-12

    def test_rational_exact(self, rational_setup, rng):
        lat, _, _ = rational_setup
        c0 = np.array([Fraction(rng.randint(-3, 3)) for _ in range(lat.nx)], dtype=object)
        c1 = np.array([Fraction(rng.randint(-3, 3)) for _ in range(lat.nx)], dtype=object)
        phi = solve_cauchy(lat, c0, c1)
        assert all(v == 0 for v in apply_wave_operator(lat, phi))
