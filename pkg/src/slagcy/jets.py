"""Truncated multivariate power series (jets) in up to six real variables.

A jet stores the Taylor coefficients of a real-analytic germ around a base
point, up to a fixed total degree, as a sparse map from exponent tuples to
scalars.  Two scalar modes are supported: exact rationals (``Fraction``) and
binary floats.  All operations are pure; jets are treated as immutable values.

Variables are fixed as (x1, x2, x3, y1, y2, y3) with z_k = x_k + i*y_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

NVARS = 6
X1, X2, X3, Y1, Y2, Y3 = range(NVARS)
VAR_NAMES = ("x1", "x2", "x3", "y1", "y2", "y3")
Y_VARS = (Y1, Y2, Y3)

EXACT = "exact"
FLOAT = "float"

ZERO_INDEX = (0,) * NVARS

MultiIndex = tuple  # 6 non-negative integer exponents


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class IncompatibleJetsError(JetError):
    """Operands disagree in base point, order or scalar mode."""


class JetDomainError(JetError):
    """A scalar or constant term lies outside the domain of an operation."""


def grlex_key(idx: MultiIndex) -> tuple:
    """Graded-lexicographic sort key: total degree first, then lex."""
    return (sum(idx), idx)


def _coerce(value, mode: str):
    if mode == EXACT:
        if isinstance(value, float):
            raise JetDomainError(f"float scalar {value!r} not allowed in exact mode")
        if isinstance(value, Fraction):
            return value
        return Fraction(value)
    return float(value)


def _coerce_point(point, mode: str) -> tuple:
    pt = tuple(_coerce(v, mode) for v in point)
    if len(pt) != NVARS:
        raise JetError(f"base point must have {NVARS} components, got {len(pt)}")
    return pt


def _zero_point(mode: str) -> tuple:
    z = Fraction(0) if mode == EXACT else 0.0
    return (z,) * NVARS


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion around ``base_point`` up to total degree ``order``.

    ``coeffs`` maps exponent tuples to nonzero scalars; an absent index is a
    zero coefficient.  Do not mutate ``coeffs`` after construction.
    """

    order: int
    coeffs: dict
    mode: str
    base_point: tuple

    # -- constructors -------------------------------------------------------

    @staticmethod
    def constant(value, order: int, mode: str = EXACT, base_point=None) -> "Jet":
        bp = _zero_point(mode) if base_point is None else _coerce_point(base_point, mode)
        v = _coerce(value, mode)
        coeffs = {} if v == 0 else {ZERO_INDEX: v}
        return Jet(order, coeffs, mode, bp)

    @staticmethod
    def variable(var: int, order: int, mode: str = EXACT, base_point=None) -> "Jet":
        """The coordinate function itself: base value plus the linear monomial."""
        bp = _zero_point(mode) if base_point is None else _coerce_point(base_point, mode)
        if not 0 <= var < NVARS:
            raise JetError(f"variable index {var} out of range")
        if order < 1:
            raise JetError("variable jet needs order >= 1")
        one = Fraction(1) if mode == EXACT else 1.0
        coeffs = {}
        if bp[var] != 0:
            coeffs[ZERO_INDEX] = bp[var]
        idx = tuple(1 if k == var else 0 for k in range(NVARS))
        coeffs[idx] = one
        return Jet(order, coeffs, mode, bp)

    @staticmethod
    def from_terms(terms: dict, order: int, mode: str = EXACT, base_point=None) -> "Jet":
        bp = _zero_point(mode) if base_point is None else _coerce_point(base_point, mode)
        coeffs = {}
        for idx, val in terms.items():
            idx = tuple(idx)
            if len(idx) != NVARS or any(e < 0 for e in idx):
                raise JetError(f"bad multi-index {idx}")
            if sum(idx) > order:
                raise JetError(f"multi-index {idx} exceeds order {order}")
            v = _coerce(val, mode)
            if v != 0:
                coeffs[idx] = v
        return Jet(order, coeffs, mode, bp)

    def zero_like(self, order: int | None = None) -> "Jet":
        return Jet(self.order if order is None else order, {}, self.mode, self.base_point)

    # -- basic queries -------------------------------------------------------

    @property
    def constant_term(self):
        return self.coeffs.get(ZERO_INDEX, _coerce(0, self.mode))

    def coefficient(self, idx) -> object:
        return self.coeffs.get(tuple(idx), _coerce(0, self.mode))

    def is_zero(self) -> bool:
        return not self.coeffs

    def max_abs_coeff(self):
        if not self.coeffs:
            return _coerce(0, self.mode)
        return max(abs(v) for v in self.coeffs.values())

    def depends_on(self, var: int) -> bool:
        return any(idx[var] for idx in self.coeffs)

    def __bool__(self) -> bool:  # pragma: no cover - guard against accidental truthiness
        raise TypeError("ambiguous truth value of a Jet; use is_zero()")

    # -- compatibility -------------------------------------------------------

    def _check_compatible(self, other: "Jet") -> None:
        if self.mode != other.mode:
            raise IncompatibleJetsError(f"scalar modes differ: {self.mode} vs {other.mode}")
        if self.order != other.order:
            raise IncompatibleJetsError(f"orders differ: {self.order} vs {other.order}")
        if self.base_point != other.base_point:
            raise IncompatibleJetsError("base points differ")

    def _wrap(self, coeffs: dict) -> "Jet":
        return Jet(self.order, {k: v for k, v in coeffs.items() if v != 0}, self.mode, self.base_point)

    # -- ring operations -----------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = Jet.constant(other, self.order, self.mode, self.base_point)
        self._check_compatible(other)
        out = dict(self.coeffs)
        for idx, v in other.coeffs.items():
            s = out.get(idx)
            if s is None:
                out[idx] = v
            else:
                s = s + v
                if s == 0:
                    del out[idx]
                else:
                    out[idx] = s
        return Jet(self.order, out, self.mode, self.base_point)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.order, {k: -v for k, v in self.coeffs.items()}, self.mode, self.base_point)

    def __sub__(self, other):
        if not isinstance(other, Jet):
            other = Jet.constant(other, self.order, self.mode, self.base_point)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            v = _coerce(other, self.mode)
            if v == 0:
                return self.zero_like()
            return Jet(self.order, {k: c * v for k, c in self.coeffs.items()}, self.mode, self.base_point)
        self._check_compatible(other)
        order = self.order
        out: dict = {}
        rhs = sorted(((sum(idx), idx, c) for idx, c in other.coeffs.items()))
        for ia, ca in self.coeffs.items():
            room = order - sum(ia)
            for db, ib, cb in rhs:
                if db > room:
                    break
                key = (ia[0] + ib[0], ia[1] + ib[1], ia[2] + ib[2],
                       ia[3] + ib[3], ia[4] + ib[4], ia[5] + ib[5])
                prod = ca * cb
                s = out.get(key)
                out[key] = prod if s is None else s + prod
        return self._wrap(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        v = _coerce(other, self.mode)
        if v == 0:
            raise JetDomainError("division by zero scalar")
        if self.mode == EXACT:
            return self * (Fraction(1) / v)
        return self * (1.0 / v)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Jet":
        c = self.constant_term
        if c == 0:
            raise JetDomainError(
                "division by a jet with zero constant term (singular leading coefficient)")
        u = (self / c) - 1  # nilpotent part; u**(order+1) == 0
        acc = Jet.constant(1, self.order, self.mode, self.base_point)
        for _ in range(self.order):
            acc = 1 - u * acc
        return acc / c

    def __pow__(self, n: int) -> "Jet":
        if not isinstance(n, int) or n < 0:
            raise JetDomainError("** supports non-negative integer exponents; use jet_pow")
        result = Jet.constant(1, self.order, self.mode, self.base_point)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- calculus ------------------------------------------------------------

    def partial(self, var: int) -> "Jet":
        """Formal partial derivative; the result order drops by one."""
        if self.order < 1:
            raise JetDomainError("cannot differentiate an order-0 jet")
        out = {}
        for idx, c in self.coeffs.items():
            e = idx[var]
            if e:
                key = idx[:var] + (e - 1,) + idx[var + 1:]
                out[key] = c * e
        return Jet(self.order - 1, out, self.mode, self.base_point)

    # -- reshaping -----------------------------------------------------------

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError("cannot raise the order of a jet by truncation")
        if order == self.order:
            return self
        return Jet(order, {k: v for k, v in self.coeffs.items() if sum(k) <= order},
                   self.mode, self.base_point)

    def lift(self, order: int) -> "Jet":
        """Reinterpret at a higher order; the added coefficients are zero."""
        if order < self.order:
            raise JetError("lift target below current order")
        return Jet(order, dict(self.coeffs), self.mode, self.base_point)

    def restrict_zero(self, vars: Iterable[int]) -> "Jet":
        """Restriction to the subspace where the given variables vanish."""
        vars = tuple(vars)
        for v in vars:
            if self.base_point[v] != 0:
                raise JetDomainError("restriction requires zero base component")
        out = {idx: c for idx, c in self.coeffs.items() if all(idx[v] == 0 for v in vars)}
        return Jet(self.order, out, self.mode, self.base_point)

    def slice_coeff(self, var: int, m: int) -> "Jet":
        """Coefficient of the m-th power of one variable, as a jet in the others."""
        if m > self.order:
            raise JetError("slice degree exceeds order")
        out = {}
        for idx, c in self.coeffs.items():
            if idx[var] == m:
                out[idx[:var] + (0,) + idx[var + 1:]] = c
        return Jet(self.order - m, out, self.mode, self.base_point)

    def mul_monomial(self, var: int, m: int) -> "Jet":
        """Multiply by the m-th power of a coordinate; raises the order by m."""
        out = {}
        for idx, c in self.coeffs.items():
            if idx[var] != 0:
                raise JetError("mul_monomial expects a jet free of the target variable")
            out[idx[:var] + (m,) + idx[var + 1:]] = c
        return Jet(self.order + m, out, self.mode, self.base_point)

    def truncate_var(self, var: int, degree: int) -> "Jet":
        """Drop all monomials whose exponent in one variable exceeds ``degree``."""
        out = {idx: c for idx, c in self.coeffs.items() if idx[var] <= degree}
        return Jet(self.order, out, self.mode, self.base_point)

    # -- evaluation & output ---------------------------------------------------

    def evaluate(self, point: Sequence) -> object:
        """Evaluate the Taylor polynomial at a point (absolute coordinates)."""
        if self.mode == EXACT:
            disp = [Fraction(p) - b for p, b in zip(point, self.base_point)]
            total = Fraction(0)
        else:
            disp = [float(p) - b for p, b in zip(point, self.base_point)]
            total = 0.0
        for idx, c in self.coeffs.items():
            term = c
            for k, e in enumerate(idx):
                for _ in range(e):
                    term = term * disp[k]
            total += term
        return total

    def dumps(self) -> str:
        """Debug dump: one "multi-index : coefficient" line in graded-lex order."""
        lines = []
        for idx in sorted(self.coeffs, key=grlex_key):
            v = self.coeffs[idx]
            sv = str(v) if self.mode == EXACT else repr(v)
            lines.append(" ".join(str(e) for e in idx) + " : " + sv)
        return "\n".join(lines)

    def __repr__(self) -> str:
        terms = []
        for idx in sorted(self.coeffs, key=grlex_key)[:8]:
            mono = "*".join(f"{VAR_NAMES[k]}^{e}" if e > 1 else VAR_NAMES[k]
                            for k, e in enumerate(idx) if e)
            c = self.coeffs[idx]
            terms.append(f"{c}" + (f"*{mono}" if mono else ""))
        if len(self.coeffs) > 8:
            terms.append("...")
        body = " + ".join(terms) if terms else "0"
        return f"Jet<{self.mode},o{self.order}>({body})"


# -- elementary functions -----------------------------------------------------


def _factorials(order: int):
    out = [1]
    for k in range(1, order + 1):
        out.append(out[-1] * k)
    return out


def _exp_coeffs(c, order: int, mode: str):
    fact = _factorials(order)
    if mode == EXACT:
        if c != 0:
            raise JetDomainError("exact exp needs constant term 0")
        return [Fraction(1, fact[k]) for k in range(order + 1)]
    e = math.exp(c)
    return [e / fact[k] for k in range(order + 1)]

def _log_coeffs(c, order: int, mode: str):
    if c <= 0:
        raise JetDomainError(f"log needs positive constant term, got {c}")
    if mode == EXACT:
        if c != 1:
            raise JetDomainError("exact log needs constant term 1")
        return [Fraction(0)] + [Fraction((-1) ** (k + 1), k) for k in range(1, order + 1)]
    out = [math.log(c)]
    ck = 1.0
    for k in range(1, order + 1):
        ck *= c
        out.append((-1.0) ** (k + 1) / (k * ck))
    return out

def _sin_coeffs(c, order: int, mode: str):
    fact = _factorials(order)
    if mode == EXACT:
        if c != 0:
            raise JetDomainError("exact sin needs constant term 0")
        cycle = [Fraction(0), Fraction(1), Fraction(0), Fraction(-1)]
    else:
        s, co = math.sin(c), math.cos(c)
        cycle = [s, co, -s, -co]
    return [cycle[k % 4] / fact[k] for k in range(order + 1)]

def _cos_coeffs(c, order: int, mode: str):
    fact = _factorials(order)
    if mode == EXACT:
        if c != 0:
            raise JetDomainError("exact cos needs constant term 0")
        cycle = [Fraction(1), Fraction(0), Fraction(-1), Fraction(0)]
    else:
        s, co = math.sin(c), math.cos(c)
        cycle = [co, -s, -co, s]
    return [cycle[k % 4] / fact[k] for k in range(order + 1)]


def _integer_nth_root(n: int, d: int) -> int | None:
    """Exact d-th root of a non-negative integer, or None."""
    if n < 0:
        return None
    if n in (0, 1) or d == 1:
        return n
    x = 1 << -(-n.bit_length() // d)  # upper bound
    while True:
        y = ((d - 1) * x + n // x ** (d - 1)) // d
        if y >= x:
            break
        x = y
    return x if x ** d == n else None


def _exact_pow(c: Fraction, r: Fraction) -> Fraction:
    """c**r as an exact rational; raises if the result is irrational."""
    if c <= 0:
        raise JetDomainError(f"rational power needs positive constant term, got {c}")
    num, den = r.numerator, r.denominator
    p = _integer_nth_root(c.numerator, den)
    q = _integer_nth_root(c.denominator, den)
    if p is None or q is None:
        raise JetDomainError(
            f"{c}**(1/{den}) is irrational; use float mode or adjust the constant term")
    root = Fraction(p, q)
    return root ** num


def _pow_coeffs(c, r: Fraction, order: int, mode: str):
    # Generalized binomial series: (c + u)**r = c**r * sum binom(r,k) (u/c)**k.
    if mode == EXACT:
        head = _exact_pow(c, r)
        out = [head]
        for k in range(1, order + 1):
            head = head * (r - k + 1) / k / c
            out.append(head)
        return out
    if c <= 0:
        raise JetDomainError(f"rational power needs positive constant term, got {c}")
    head = c ** float(r)
    out = [head]
    rf = float(r)
    for k in range(1, order + 1):
        head = head * (rf - k + 1) / k / c
        out.append(head)
    return out


def _compose(a: Jet, coeff_list) -> Jet:
    """Horner evaluation of a scalar Taylor series on the nilpotent part of ``a``."""
    tilde = a - a.constant_term
    res = Jet.constant(coeff_list[-1], a.order, a.mode, a.base_point)
    for k in range(len(coeff_list) - 2, -1, -1):
        res = res * tilde + coeff_list[k]
    return res


def jet_exp(a: Jet) -> Jet:
    return _compose(a, _exp_coeffs(a.constant_term, a.order, a.mode))

def jet_log(a: Jet) -> Jet:
    return _compose(a, _log_coeffs(a.constant_term, a.order, a.mode))

def jet_sin(a: Jet) -> Jet:
    return _compose(a, _sin_coeffs(a.constant_term, a.order, a.mode))

def jet_cos(a: Jet) -> Jet:
    return _compose(a, _cos_coeffs(a.constant_term, a.order, a.mode))

def jet_pow(a: Jet, r) -> Jet:
    """a**r for a rational exponent.

    Non-negative integer exponents reduce to repeated multiplication and allow
    a vanishing constant term; all other exponents need a positive constant
    term (exactly representable in exact mode).
    """
    r = Fraction(r)
    if r.denominator == 1 and r >= 0:
        return a ** int(r)
    return _compose(a, _pow_coeffs(a.constant_term, r, a.order, a.mode))

def jet_sqrt(a: Jet) -> Jet:
    return _compose(a, _pow_coeffs(a.constant_term, Fraction(1, 2), a.order, a.mode))


# -- complex jets and holomorphic extension -----------------------------------


@dataclass(frozen=True)
class ComplexJet:
    """A pair of real jets representing re + i*im."""

    re: Jet
    im: Jet

    def __post_init__(self):
        self.re._check_compatible(self.im)

    @staticmethod
    def from_real(re: Jet) -> "ComplexJet":
        return ComplexJet(re, re.zero_like())

    def __add__(self, other: "ComplexJet") -> "ComplexJet":
        return ComplexJet(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexJet") -> "ComplexJet":
        return ComplexJet(self.re - other.re, self.im - other.im)

    def __mul__(self, other: "ComplexJet") -> "ComplexJet":
        return ComplexJet(self.re * other.re - self.im * other.im,
                          self.re * other.im + self.im * other.re)

    def __neg__(self) -> "ComplexJet":
        return ComplexJet(-self.re, -self.im)

    def conjugate(self) -> "ComplexJet":
        return ComplexJet(self.re, -self.im)

    def abs2(self) -> Jet:
        """Modulus squared re**2 + im**2 as a real jet."""
        return self.re * self.re + self.im * self.im

    def partial(self, var: int) -> "ComplexJet":
        return ComplexJet(self.re.partial(var), self.im.partial(var))

    def restrict_zero(self, vars) -> "ComplexJet":
        return ComplexJet(self.re.restrict_zero(vars), self.im.restrict_zero(vars))


def holomorphic_extend(f: Jet) -> ComplexJet:
    """Extend a germ in the x-variables to the holomorphic germ of z = x + i*y.

    Every monomial (x - a)**alpha is replaced by ((x - a) + i*y)**alpha and
    expanded binomially; the real and imaginary coefficient buckets satisfy the
    Cauchy-Riemann relations exactly and restrict to (f, 0) at y = 0.
    """
    for idx in f.coeffs:
        if idx[Y1] or idx[Y2] or idx[Y3]:
            raise JetDomainError("holomorphic_extend needs a jet in the x-variables only")
    if any(b != 0 for b in f.base_point[3:]):
        raise JetDomainError("holomorphic_extend needs a base point with y = 0")
    re: dict = {}
    im: dict = {}
    comb = math.comb
    for idx, c in f.coeffs.items():
        a1, a2, a3 = idx[0], idx[1], idx[2]
        for b1 in range(a1 + 1):
            f1 = comb(a1, b1)
            for b2 in range(a2 + 1):
                f2 = f1 * comb(a2, b2)
                for b3 in range(a3 + 1):
                    coeff = c * (f2 * comb(a3, b3))
                    key = (a1 - b1, a2 - b2, a3 - b3, b1, b2, b3)
                    r = (b1 + b2 + b3) & 3
                    bucket = re if r % 2 == 0 else im
                    if r >= 2:
                        coeff = -coeff
                    prev = bucket.get(key)
                    bucket[key] = coeff if prev is None else prev + coeff
    re = {k: v for k, v in re.items() if v != 0}
    im = {k: v for k, v in im.items() if v != 0}
    return ComplexJet(Jet(f.order, re, f.mode, f.base_point),
                      Jet(f.order, im, f.mode, f.base_point))


def det3(m) -> Jet:
    """Determinant of a 3x3 matrix of jets (Laplace expansion along row 1)."""
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
