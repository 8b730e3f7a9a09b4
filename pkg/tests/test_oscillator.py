import math

import mpmath
import numpy as np
import pytest
from scipy.special import pbdv

from twistlab.exceptions import ResolutionError
from twistlab.oscillator import (ALPHA, Line1DGrid, assemble_h0, assemble_h0_dirichlet,
                                 assemble_h_eps, dirichlet_green_kernel, direct_green,
                                 extrapolated_eigenvalues, green_kernel, hermite_function,
                                 oscillator_green, required_points, resolvent_gap_1d, spectrum)
from twistlab.twist import make_profile, scaled_twist


def hermite_oracle(n, x):
    # Closed form with numpy's physicists' Hermite polynomials.
    c = np.zeros(n + 1)
    c[n] = 1.0
    H = np.polynomial.hermite.hermval(x / 2, c)
    return H * np.exp(-x**2 / 8) / math.sqrt(math.sqrt(math.pi) * 2**n * math.factorial(n)) \
        / math.sqrt(2)


class TestGrid:
    def test_even_rejected(self):
        with pytest.raises(ValueError):
            Line1DGrid(12.0, 1200)

    def test_zero_is_node(self, line_grid):
        assert line_grid.interior[line_grid.zero_index] == 0.0
        assert line_grid.size == 1199

    def test_coarsened(self, line_grid):
        c = line_grid.coarsened()
        assert c.n_points == 601 and c.spacing == pytest.approx(2 * line_grid.spacing)

    def test_required_points(self):
        assert required_points(12.0, 0.2) == 1203
        assert required_points(12.0, 0.05) == 4803
        n = required_points(12.0, 0.1)
        assert Line1DGrid(12.0, n).nodes_inside(0.1) >= 20
        assert Line1DGrid(12.0, n - 2).nodes_inside(0.1) < 20


class TestSpectrum:
    def test_free_ground_state(self, line_grid):
        raw, ext = extrapolated_eigenvalues(line_grid, 3)
        assert abs(ext[0] - 0.25) < 1e-6
        assert abs(raw[0] - 0.25) < 1e-4

    def test_dirichlet_ground_state(self, line_grid):
        _, ext = extrapolated_eigenvalues(line_grid, 2, dirichlet=True)
        assert abs(ext[0] - 0.75) < 1e-6

    def test_ratio_three(self, line_grid):
        _, free = extrapolated_eigenvalues(line_grid, 1)
        _, dir_ = extrapolated_eigenvalues(line_grid, 1, dirichlet=True)
        assert abs(dir_[0] / free[0] - 3.0) < 1e-5

    def test_ladder(self, line_grid):
        _, ext = extrapolated_eigenvalues(line_grid, 6)
        assert np.allclose(np.diff(ext), ALPHA, atol=1e-5)
        assert np.allclose(ext, ALPHA * (np.arange(6) + 0.5), atol=1e-5)

    def test_dirichlet_spectrum_is_odd_levels_doubled(self, line_grid):
        # Odd eigenfunctions survive the constraint; the even sector sees the
        # Dirichlet condition, so both sectors coincide with the odd levels.
        _, ext = extrapolated_eigenvalues(line_grid, 4, dirichlet=True)
        assert np.allclose(ext, [0.75, 0.75, 1.75, 1.75], atol=1e-5)

    def test_interlacing(self, line_grid):
        free = spectrum(assemble_h0(line_grid), 6).eigenvalues
        dirich = spectrum(assemble_h0_dirichlet(line_grid), 5).eigenvalues
        for k in range(5):
            assert free[k] <= dirich[k] + 1e-10 <= free[k + 1] + 2e-10

    def test_sign_changes(self, line_grid):
        es = spectrum(assemble_h0(line_grid), 5)
        for n in range(5):
            v = es.eigenfunctions[:, n]
            v = v[np.abs(v) > 1e-6 * np.abs(v).max()]
            assert np.count_nonzero(np.diff(np.sign(v))) == n

    def test_hermite_functions(self, line_grid):
        es = spectrum(assemble_h0(line_grid), 4)
        x = line_grid.interior
        h = line_grid.spacing
        for n in range(4):
            psi = hermite_function(n, x)
            assert np.allclose(psi, hermite_oracle(n, x), atol=1e-13)
            assert h * np.sum(psi**2) == pytest.approx(1.0, abs=1e-10)
            assert np.max(np.abs(es.eigenfunctions[:, n] - psi)) < 1e-4

    def test_dirichlet_eigenfunction_vanishes_at_zero(self, line_grid):
        es = spectrum(assemble_h0_dirichlet(line_grid), 2)
        assert np.all(es.eigenfunctions[line_grid.zero_index] == 0)


class TestGreen:
    def test_pbdv_against_mpmath(self):
        for nu, z in [(-2.5, 0.0), (-2.5, 1.3), (-0.7, -2.0), (-4.5, 3.0)]:
            ref = float(mpmath.pcfd(nu, z))
            assert pbdv(nu, z)[0] == pytest.approx(ref, rel=1e-10)

    def test_closed_form_value_at_origin(self):
        assert float(oscillator_green(0.0, 0.0, -1.0)) == pytest.approx(0.49311251986477317,
                                                                          rel=1e-12)

    def test_closed_form_matches_grid(self, line_grid):
        g = direct_green(assemble_h0(line_grid), -1.0)
        x = line_grid.interior
        sel = np.nonzero(np.abs(x) <= 6)[0][::10]
        exact = oscillator_green(x[sel][:, None], x[sel][None, :], -1.0)
        assert np.max(np.abs(g.values[np.ix_(sel, sel)] - exact)) < 1e-4

    def test_closed_form_symmetric_positive(self):
        x = np.linspace(-5, 5, 41)
        R = oscillator_green(x[:, None], x[None, :], -1.0)
        assert np.allclose(R, R.T, atol=1e-15)
        assert np.all(R > 0)

    def test_spectrum_value_rejected(self, line_grid):
        op = assemble_h0(line_grid)
        lam0 = spectrum(op, 1).eigenvalues[0]
        with pytest.raises(ValueError):
            green_kernel(op, lam0)

    def test_truncation_converges_monotonically(self, line_grid):
        op = assemble_h0(line_grid)
        full = green_kernel(op, -1.0)
        z = line_grid.zero_index
        errs = []
        for N in (10, 40, 160):
            g = green_kernel(op, -1.0, truncation=N)
            errs.append(abs(full.values[z, z] - g.values[z, z]))
            assert g.tail_bound > 0
        assert errs[0] > errs[1] > errs[2]

    def test_spectral_equals_direct(self, line_grid):
        op = assemble_h0(line_grid)
        assert np.max(np.abs(green_kernel(op).values - direct_green(op).values)) < 1e-10

    def test_krein_equals_constrained_inverse(self, line_grid):
        g = green_kernel(assemble_h0(line_grid), -1.0)
        krein = dirichlet_green_kernel(g)
        direct = direct_green(assemble_h0_dirichlet(line_grid), -1.0)
        idx = np.linspace(0, line_grid.size - 1, 50).astype(int)
        assert np.max(np.abs(krein.values[np.ix_(idx, idx)]
                             - direct.values[np.ix_(idx, idx)])) < 1e-6

    def test_constrained_sides_decouple(self, line_grid):
        krein = dirichlet_green_kernel(green_kernel(assemble_h0(line_grid), -1.0))
        x = line_grid.interior
        left, right = x < 0, x > 0
        assert np.max(np.abs(krein.values[np.ix_(left, right)])) < 1e-10

    def test_krein_needs_h0(self, line_grid):
        with pytest.raises(ValueError):
            dirichlet_green_kernel(direct_green(assemble_h0_dirichlet(line_grid)))


class TestTwisted:
    def test_resolution_error(self, line_grid, bump):
        with pytest.raises(ResolutionError) as info:
            assemble_h_eps(line_grid, 1.0, scaled_twist(bump, 0.05))
        assert info.value.min_points == 4803

    def test_zero_profile_gap_constant(self, line_grid):
        z = make_profile("zero")
        gaps = [resolvent_gap_1d(line_grid, 1.0, scaled_twist(z, e)).value for e in (0.4, 0.1)]
        assert gaps[0] == pytest.approx(gaps[1], abs=1e-12)
        assert gaps[0] > 0.1

    def test_gap_decreases(self, fine_line_grid, bump):
        gaps = [resolvent_gap_1d(fine_line_grid, 10.0, scaled_twist(bump, e)).value
                for e in (0.4, 0.2, 0.1)]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_twist_raises_ground_state(self, fine_line_grid, bump):
        lam = spectrum(assemble_h_eps(fine_line_grid, 5.0, scaled_twist(bump, 0.2)), 1)
        assert 0.25 < lam.eigenvalues[0] < 0.75

    def test_symmetric(self, fine_line_grid, bump):
        op = assemble_h_eps(fine_line_grid, 1.0, scaled_twist(bump, 0.1))
        assert op.symmetry_defect() == 0
