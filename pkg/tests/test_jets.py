import math
import random
from fractions import Fraction

import pytest

from slagcy.jets import (
    EXACT,
    FLOAT,
    NVARS,
    X1,
    X2,
    X3,
    Y1,
    Y2,
    Y3,
    ComplexJet,
    IncompatibleJetsError,
    Jet,
    JetDomainError,
    det3,
    grlex_key,
    holomorphic_extend,
    jet_cos,
    jet_exp,
    jet_log,
    jet_pow,
    jet_sin,
    jet_sqrt,
)


def var(k, order=4, mode=EXACT):
    return Jet.variable(k, order, mode)


def const(v, order=4, mode=EXACT):
    return Jet.constant(v, order, mode)


def random_jet(rng, order=3, vars=(X1, X2, Y1), nterms=5, mode=EXACT):
    terms = {}
    for _ in range(nterms):
        idx = [0] * NVARS
        deg = rng.randint(0, order)
        for _ in range(deg):
            idx[rng.choice(vars)] += 1
        if mode == EXACT:
            coeff = Fraction(rng.randint(-9, 9), rng.randint(1, 9))
        else:
            coeff = rng.uniform(-2, 2)
        terms[tuple(idx)] = coeff
    return Jet.from_terms(terms, order, mode)


class TestArithmetic:
    def test_product_of_conjugates(self):
        x1 = var(X1, order=2)
        prod = (1 + x1) * (1 - x1)
        assert prod == Jet.from_terms({(0,) * 6: 1, (2, 0, 0, 0, 0, 0): -1}, 2)

    def test_self_division_is_one(self):
        rng = random.Random(7)
        for _ in range(20):
            a = random_jet(rng)
            a = a - a.constant_term + 1  # unit constant term
            q = a / a
            assert q == const(1, a.order)

    def test_geometric_series(self):
        x2 = var(X2, order=3)
        q = const(1, 3) / (1 - x2)
        expected = Jet.from_terms({(0, k, 0, 0, 0, 0): 1 for k in range(4)}, 3)
        assert q == expected
        # multiply back: (1 - x2) * q == 1 up to truncation
        assert (1 - x2) * q == const(1, 3)

    def test_ring_axioms_random(self):
        rng = random.Random(13)
        for _ in range(100):
            a, b, c = (random_jet(rng) for _ in range(3))
            assert (a + b) + c == a + (b + c)
            assert a * (b + c) == a * b + a * c
            assert a * b == b * a

    def test_mul_truncation_depends_only_on_low_degrees(self):
        rng = random.Random(5)
        for _ in range(20):
            a = random_jet(rng, order=3)
            b = random_jet(rng, order=3)
            prod = a * b
            # pad with arbitrary degree-4 terms at a higher order; the
            # truncation back to 3 must be unchanged
            pad = {(4, 0, 0, 0, 0, 0): Fraction(3), (0, 2, 0, 2, 0, 0): Fraction(-7, 2)}
            a4 = Jet.from_terms({**a.coeffs, **pad}, 4)
            b4 = Jet.from_terms(dict(b.coeffs), 4)
            assert (a4 * b4).truncate(3) == prod

    def test_division_by_zero_constant_term(self):
        with pytest.raises(JetDomainError, match="singular leading coefficient"):
            const(1) / var(X1)

    def test_incompatible_operands(self):
        with pytest.raises(IncompatibleJetsError):
            var(X1, order=3) + var(X1, order=4)
        with pytest.raises(IncompatibleJetsError):
            var(X1, mode=EXACT) * var(X1, order=4, mode=FLOAT)
        with pytest.raises(IncompatibleJetsError):
            Jet.variable(X1, 3, EXACT) + Jet.variable(X1, 3, EXACT, (1, 0, 0, 0, 0, 0))

    def test_float_coefficients_rejected_in_exact_mode(self):
        with pytest.raises(JetDomainError):
            Jet.constant(0.5, 3, EXACT)

    def test_integer_power(self):
        x = var(X1, order=5)
        assert (1 + x) ** 3 == 1 + 3 * x + 3 * x * x + x * x * x
        assert x ** 0 == const(1, 5)


class TestElementary:
    def test_sqrt_binomial(self):
        a = 1 + var(X1, order=2)
        s = jet_sqrt(a)
        assert s == Jet.from_terms(
            {(0,) * 6: 1, (1, 0, 0, 0, 0, 0): Fraction(1, 2),
             (2, 0, 0, 0, 0, 0): Fraction(-1, 8)}, 2)
        assert s * s == a

    def test_exp_of_zero_jet(self):
        assert jet_exp(const(0)) == const(1)

    def test_sin_matches_taylor(self):
        x2 = var(X2, order=3)
        assert jet_sin(x2) == x2 - x2 * x2 * x2 / 6

    def test_float_mode_matches_scalar_functions(self):
        # constant-term-only jets reproduce the scalar functions
        for c, fn, ref in ((0.3, jet_exp, math.exp), (1.7, jet_log, math.log),
                           (0.9, jet_sin, math.sin), (0.9, jet_cos, math.cos)):
            jet = fn(Jet.constant(c, 3, FLOAT))
            assert jet.constant_term == pytest.approx(ref(c), abs=1e-15)

    def test_exp_log_inverse(self):
        rng = random.Random(3)
        a = random_jet(rng, order=4, vars=(X1, X2)) * Fraction(1, 10)
        a = a - a.constant_term  # zero constant term for exact exp
        assert jet_log(jet_exp(a) ) == a

    def test_pow_rational_consistency(self):
        a = 1 + var(X2, order=4)
        p = jet_pow(a, Fraction(3, 2))
        assert p * p == a ** 3

    def test_exact_root_extraction(self):
        a = 4 + var(X1, order=2) * 4
        s = jet_sqrt(a)
        assert s.constant_term == 2
        assert s * s == a
        with pytest.raises(JetDomainError, match="irrational"):
            jet_sqrt(2 + var(X1, order=2))

    def test_domain_errors(self):
        with pytest.raises(JetDomainError):
            jet_log(var(X1))  # constant term 0
        with pytest.raises(JetDomainError):
            jet_sqrt(const(-1) + var(X1))
        with pytest.raises(JetDomainError):
            jet_exp(const(1))  # e is irrational; exact mode


class TestPartial:
    def test_product_monomial(self):
        x1, x2 = var(X1), var(X2)
        assert (x1 * x2).partial(X1) == x2.truncate(3)

    def test_partial_of_absent_variable_is_zero(self):
        a = var(X1) * var(X2)
        assert a.partial(Y1).is_zero()

    def test_leibniz_rule(self):
        rng = random.Random(11)
        for _ in range(30):
            a = random_jet(rng)
            b = random_jet(rng)
            for v in (X1, X2, Y1):
                lhs = (a * b).partial(v)
                rhs = a.partial(v) * b.truncate(a.order - 1) + a.truncate(a.order - 1) * b.partial(v)
                assert lhs == rhs

    def test_order_zero_rejected(self):
        with pytest.raises(JetDomainError):
            Jet.constant(2, 0).partial(X1)


def extend_by_substitution(f):
    """Independent oracle: substitute z_k = x_k + i y_k by complex jet powers."""
    order, mode = f.order, f.mode
    z = [ComplexJet(Jet.variable(k, order, mode), Jet.variable(k + 3, order, mode))
         for k in range(3)]
    acc = ComplexJet.from_real(f.zero_like())
    for idx, c in f.coeffs.items():
        term = ComplexJet.from_real(Jet.constant(c, order, mode))
        for k in range(3):
            for _ in range(idx[k]):
                term = term * z[k]
        acc = acc + term
    return acc


class TestHolomorphicExtend:
    def test_square_monomial(self):
        f = var(X1, order=2) * var(X1, order=2)
        e = holomorphic_extend(f)
        assert e.re == Jet.from_terms({(2, 0, 0, 0, 0, 0): 1, (0, 0, 0, 2, 0, 0): -1}, 2)
        assert e.im == Jet.from_terms({(1, 0, 0, 1, 0, 0): 2}, 2)

    def test_constant(self):
        e = holomorphic_extend(const(Fraction(5, 3)))
        assert e.re == const(Fraction(5, 3))
        assert e.im.is_zero()

    def test_cross_monomial(self):
        f = var(X2, order=2) * var(X3, order=2)
        e = holomorphic_extend(f)
        assert e.re == Jet.from_terms({(0, 1, 1, 0, 0, 0): 1, (0, 0, 0, 0, 1, 1): -1}, 2)
        assert e.im == Jet.from_terms({(0, 1, 0, 0, 0, 1): 1, (0, 0, 1, 0, 1, 0): 1}, 2)

    def test_restriction_to_real_slice(self):
        rng = random.Random(17)
        for _ in range(20):
            f = random_jet(rng, order=4, vars=(X1, X2, X3))
            e = holomorphic_extend(f)
            assert e.re.restrict_zero((Y1, Y2, Y3)) == f
            assert e.im.restrict_zero((Y1, Y2, Y3)).is_zero()

    def test_cauchy_riemann_exact(self):
        rng = random.Random(19)
        for _ in range(20):
            f = random_jet(rng, order=4, vars=(X1, X2, X3))
            e = holomorphic_extend(f)
            for xk, yk in ((X1, Y1), (X2, Y2), (X3, Y3)):
                assert e.re.partial(xk) == e.im.partial(yk)
                assert e.re.partial(yk) == -(e.im.partial(xk))

    def test_matches_substitution_oracle(self):
        rng = random.Random(23)
        for _ in range(10):
            f = random_jet(rng, order=4, vars=(X1, X2, X3))
            e = holomorphic_extend(f)
            o = extend_by_substitution(f)
            assert e.re == o.re
            assert e.im == o.im

    def test_rejects_y_dependence(self):
        with pytest.raises(JetDomainError):
            holomorphic_extend(var(Y1))


def det3_permutation_oracle(m):
    total = None
    for (p0, p1, p2), sign in ((( 0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                               ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
        term = m[0][p0] * m[1][p1] * m[2][p2] * sign
        total = term if total is None else total + term
    return total


class TestDet3:
    def test_identity(self):
        one, zero = const(1), const(0)
        m = [[one if i == j else zero for j in range(3)] for i in range(3)]
        assert det3(m) == one

    def test_diagonal(self):
        one, zero = const(1), const(0)
        m = [[1 + var(X1), zero, zero], [zero, one, zero], [zero, zero, one]]
        assert det3(m) == 1 + var(X1)

    def test_random_against_permutation_oracle(self):
        rng = random.Random(29)
        for _ in range(10):
            m = [[random_jet(rng, order=3, nterms=3) for _ in range(3)] for _ in range(3)]
            assert det3(m) == det3_permutation_oracle(m)


class TestDumpAndSlices:
    def test_dump_graded_lex(self):
        a = 1 + var(X2, order=2) + var(X1, order=2) * var(X2, order=2)
        assert a.dumps().splitlines() == [
            "0 0 0 0 0 0 : 1",
            "0 1 0 0 0 0 : 1",
            "1 1 0 0 0 0 : 1",
        ]

    def test_grlex_ordering(self):
        idx = [(0, 0, 0, 0, 0, 0), (1, 0, 0, 0, 0, 0), (0, 1, 0, 0, 0, 0),
               (2, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 2)]
        ordered = sorted(idx, key=grlex_key)
        assert ordered[0] == (0,) * 6
        assert sum(ordered[1]) <= sum(ordered[-1])

    def test_slice_and_attach_roundtrip(self):
        a = var(X1, order=4) + var(Y1, order=4) * var(Y1, order=4) * var(X2, order=4)
        sl = a.slice_coeff(Y1, 2)
        assert sl == var(X2, order=2)
        back = sl.mul_monomial(Y1, 2)
        assert back.coefficient((0, 1, 0, 2, 0, 0)) == 1

    def test_restrict_zero(self):
        a = var(X1, order=3) + var(X1, order=3) * var(Y2, order=3)
        assert a.restrict_zero((Y2,)) == var(X1, order=3)

    def test_evaluate(self):
        a = 1 + var(X1, order=3) * var(X2, order=3)
        assert a.evaluate((2, 3, 0, 0, 0, 0)) == 7
