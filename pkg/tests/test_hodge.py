import io
import math
import random

import numpy as np
import pytest

from slagcy.families import family_from_entries
from slagcy.gridops import periodic_axis, periodic_quad, spectral_diff
from slagcy.hodge import (
    GramMatrix,
    HodgeError,
    PhiCurve,
    gram_L2,
    harmonic_basis_2d,
    harmonic_basis_diag3,
    phi_2d,
    phi_curve,
    transform_gram,
)

BESSEL = {"g11": "exp(-2*t*sin(2*pi*x1))", "g22": "exp(t*sin(2*pi*x1))",
          "g33": "exp(t*sin(2*pi*x1))"}

TWO_D_FAMILIES = [
    {"g11": "exp(t*cos(2*pi*x1))", "g22": "exp(-t*cos(2*pi*x1))"},
    {"g11": "exp(t*cos(2*pi*x1))", "g12": "1/4", "g22": "17/16*exp(-t*cos(2*pi*x1))"},
    {"g11": "exp(t*sin(2*pi*x1))", "g22": "(1 + cos(2*pi*x2)/4)*exp(-t*sin(2*pi*x1))"},
]


def bessel_i0(t, terms=80):
    return math.fsum((t / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


def bessel_family():
    return family_from_entries(BESSEL, name="bessel")


def flat_family(dim=3):
    entries = {f"g{i}{i}": "1" for i in range(1, dim + 1)}
    return family_from_entries(entries, dim=dim)


class TestPeriodicQuad:
    def test_constant(self):
        assert periodic_quad(np.ones(8)) == 1.0

    def test_sine_vanishes(self):
        for n in (2, 3, 8, 17):
            x = periodic_axis(n)
            assert abs(periodic_quad(np.sin(2 * np.pi * x))) < 1e-14

    def test_bessel_value(self):
        x = periodic_axis(64)
        q = periodic_quad(np.exp(np.sin(2 * np.pi * x)))
        assert abs(q - bessel_i0(1.0)) < 1e-12

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            periodic_quad(np.ones(1))
        with pytest.raises(ValueError):
            periodic_axis(1)

    def test_spectral_diff_accuracy(self):
        x = periodic_axis(64)
        d = spectral_diff(np.sin(2 * np.pi * x), 0)
        assert np.max(np.abs(d - 2 * np.pi * np.cos(2 * np.pi * x))) < 1e-10


class TestDiag3Basis:
    def test_flat_basis_is_coordinate_basis(self):
        basis = harmonic_basis_diag3(flat_family(), 0.0, n=32)
        assert np.allclose(basis.theta[0, 0], 1.0)
        assert np.allclose(basis.theta[1, 1], 1.0)
        assert np.allclose(basis.theta[2, 2], 1.0)
        assert basis.residuals["periods"] < 1e-14

    def test_bessel_theta1_profile(self):
        n = 256
        basis = harmonic_basis_diag3(bessel_family(), 1.0, n=n)
        x = periodic_axis(n)
        expect = np.exp(-2 * np.sin(2 * np.pi * x)) / bessel_i0(2.0)
        assert np.max(np.abs(basis.theta[0, 0] - expect)) < 1e-12

    def test_period_normalization(self):
        basis = harmonic_basis_diag3(bessel_family(), 0.7, n=256)
        assert basis.residuals["periods"] < 1e-12

    def test_rejects_nondiagonal(self):
        fam = family_from_entries({"g11": "1", "g12": "1/2", "g22": "1", "g33": "1"})
        with pytest.raises(HodgeError, match="not zero"):
            harmonic_basis_diag3(fam, 0.0, n=16)

    def test_rejects_non_unit_determinant(self):
        fam = family_from_entries({"g11": "2", "g22": "1", "g33": "1"})
        with pytest.raises(HodgeError, match="determinant"):
            harmonic_basis_diag3(fam, 0.0, n=16)

    def test_rejects_x2_dependence(self):
        fam = family_from_entries({"g11": "exp(sin(2*pi*x2))", "g22": "1",
                                   "g33": "exp(-sin(2*pi*x2))"})
        with pytest.raises(HodgeError, match="x2 or x3"):
            harmonic_basis_diag3(fam, 0.0, n=16)


class TestGram:
    def test_flat_gram_is_identity(self):
        basis = harmonic_basis_diag3(flat_family(), 0.0, n=32)
        gram = gram_L2(basis)
        assert np.allclose(gram.matrix, np.eye(3), atol=1e-14)
        assert gram.volume == pytest.approx(1.0)

    def test_bessel_closed_forms(self):
        basis = harmonic_basis_diag3(bessel_family(), 1.0, n=256)
        gram = gram_L2(basis)
        expect = np.diag([1.0 / bessel_i0(2.0), bessel_i0(1.0), bessel_i0(1.0)])
        assert np.max(np.abs(gram.matrix - expect)) < 1e-12

    def test_symmetry_and_positivity_random(self):
        rng = random.Random(41)
        for _ in range(5):
            a, b = rng.uniform(0.2, 1.5), rng.uniform(-1.0, 1.0)
            fam = family_from_entries({
                "g11": f"exp(-{a}*2*t*sin(2*pi*x1) - {b}*2*t*cos(2*pi*x1))",
                "g22": f"exp({a}*t*sin(2*pi*x1) + {b}*t*cos(2*pi*x1))",
                "g33": f"exp({a}*t*sin(2*pi*x1) + {b}*t*cos(2*pi*x1))"})
            gram = gram_L2(harmonic_basis_diag3(fam, 0.8, n=128))
            assert np.allclose(gram.matrix, gram.matrix.T)
            assert np.all(np.linalg.eigvalsh(gram.matrix) > 0)

    def test_unimodular_invariance(self):
        basis = harmonic_basis_diag3(bessel_family(), 1.0, n=128)
        gram = gram_L2(basis)
        rng = np.random.default_rng(7)
        for _ in range(20):
            p = np.eye(3, dtype=int)
            for _ in range(4):
                i, j = rng.integers(0, 3, size=2)
                if i != j:
                    shear = np.eye(3, dtype=int)
                    shear[i, j] = int(rng.integers(-2, 3))
                    p = p @ shear
            if rng.integers(0, 2):
                p[[0, 1]] = p[[1, 0]]  # determinant -1 representative
            transformed = transform_gram(gram, p)
            assert abs(transformed.det() - gram.det()) < 1e-12

    def test_non_unimodular_rejected(self):
        gram = GramMatrix(matrix=np.eye(3), volume=1.0)
        with pytest.raises(HodgeError, match="unimodular"):
            transform_gram(gram, 2 * np.eye(3))


class TestPhiCurve3D:
    def test_flat_phi_is_one(self):
        curve = phi_curve(flat_family(), np.linspace(0, 1, 5), n=64)
        assert np.allclose(curve.phi, 1.0, atol=1e-14)
        assert curve.classification(1e-10) == "constant"

    def test_bessel_matches_series_oracle(self):
        ts = np.linspace(0.0, 1.0, 11)
        curve = phi_curve(bessel_family(), ts, n=256)
        expect = np.array([bessel_i0(t) ** 2 / bessel_i0(2 * t) for t in ts])
        assert np.max(np.abs(curve.phi - expect)) < 1e-12
        assert curve.classification(1e-10) == "non-constant"

    def test_phi_at_zero_is_one(self):
        curve = phi_curve(bessel_family(), [0.0], n=64)
        assert curve.phi[0] == pytest.approx(1.0, abs=1e-14)

    def test_cauchy_schwarz_upper_bound(self):
        # with g22 = g33 the closed form is a strict Cauchy-Schwarz ratio
        ts = np.linspace(0.1, 1.0, 10)
        curve = phi_curve(bessel_family(), ts, n=256)
        assert np.all(curve.phi < 1.0)
        assert np.all(curve.phi <= 1.0 - 1e-4)

    def test_quadrature_doubling_stability(self):
        ts = [0.3, 0.9]
        phi_n = phi_curve(bessel_family(), ts, n=128).phi
        phi_2n = phi_curve(bessel_family(), ts, n=256).phi
        assert np.max(np.abs(phi_n - phi_2n)) < 1e-12

    def test_csv_format(self):
        curve = phi_curve(bessel_family(), [0.0, 1.0], n=64)
        text = curve.to_csv_text()
        lines = text.strip().splitlines()
        assert lines[0] == "t,phi,g11_int,g22_int,g33_int"
        assert len(lines) == 3
        row = [float(v) for v in lines[2].split(",")]
        assert row[0] == 1.0
        assert row[2] == pytest.approx(bessel_i0(2.0), abs=1e-12)  # int g11
        assert row[3] == pytest.approx(bessel_i0(1.0), abs=1e-12)  # int g^22

    def test_empty_curve_csv_has_header_only(self):
        curve = PhiCurve(t=np.array([]), phi=np.array([]), grams=())
        assert curve.to_csv_text() == "t,phi,g11_int,g22_int,g33_int\n"

    def test_inadmissible_family_refused(self):
        fam = family_from_entries({"g11": "exp(t)", "g22": "1", "g33": "1"})
        with pytest.raises(Exception, match="slice conditions"):
            phi_curve(fam, [0.0, 1.0], n=32)


class TestPhi2D:
    def test_flat_2d(self):
        curve = phi_2d(flat_family(dim=2), np.linspace(0, 1, 3), n=32)
        assert np.allclose(curve.phi, 1.0, atol=1e-14)

    def test_diagonal_family_theta1(self):
        fam = family_from_entries(TWO_D_FAMILIES[0], dim=2)
        n = 128
        basis = harmonic_basis_2d(fam, 1.0, n=n)
        x = periodic_axis(n)
        g11 = np.exp(np.cos(2 * np.pi * x))
        expect = g11 / periodic_quad(g11)
        assert np.max(np.abs(basis.theta[0, 0][:, 0] - expect)) < 1e-12
        assert np.max(np.abs(basis.theta[0, 1])) < 1e-14

    def test_offdiagonal_family_has_dx2_correction(self):
        # constant g12 against non-constant C engages the dx2 term of theta_1
        fam = family_from_entries(
            {"g11": "exp(t*cos(2*pi*x1))", "g12": "1/4",
             "g22": "(17/16 + cos(2*pi*x2)/4)*exp(-t*cos(2*pi*x1))"}, dim=2)
        basis = harmonic_basis_2d(fam, 0.8, n=128)
        assert np.max(np.abs(basis.theta[0, 1])) > 1e-3
        assert basis.residuals["closure"] < 1e-10
        assert basis.residuals["coclosure"] < 1e-8
        gram = gram_L2(basis)
        assert gram.det() == pytest.approx(1.0, abs=1e-9)

    def test_nonconstant_c_records_scale(self):
        fam = family_from_entries(TWO_D_FAMILIES[2], dim=2)
        basis = harmonic_basis_2d(fam, 0.5, n=128)
        assert abs(basis.scale - 1.0) > 1e-4  # K != 1 here
        gram = gram_L2(basis)
        assert gram.det() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("entries", TWO_D_FAMILIES)
    def test_phi_identically_one(self, entries):
        fam = family_from_entries(entries, dim=2)
        curve = phi_2d(fam, np.linspace(0, 1, 21), n=128)
        assert np.max(np.abs(curve.phi - 1.0)) < 1e-8

    def test_gram_entries_match_remark_formulas(self):
        # |theta1|^2 = (1 + L^2)/M, <theta1,theta2> = -L, |theta2|^2 = M  (K = 1)
        fam = family_from_entries(TWO_D_FAMILIES[1], dim=2)
        t = 0.6
        basis = harmonic_basis_2d(fam, t, n=256)
        gram = gram_L2(basis)
        big_m = periodic_quad(np.exp(t * np.cos(2 * np.pi * periodic_axis(256))))
        big_l = 0.25
        assert gram.matrix[0, 0] == pytest.approx((1 + big_l ** 2) / big_m, abs=1e-10)
        assert gram.matrix[0, 1] == pytest.approx(-big_l, abs=1e-10)
        assert gram.matrix[1, 1] == pytest.approx(big_m, abs=1e-10)

    def test_x1_dependent_determinant_rejected(self):
        fam = family_from_entries({"g11": "1 + sin(2*pi*x1)/2", "g22": "1"}, dim=2)
        with pytest.raises(HodgeError, match="x1"):
            harmonic_basis_2d(fam, 0.0, n=64)
