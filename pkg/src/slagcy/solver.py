"""Order-by-order construction of a Calabi-Yau structure around a metric germ.

Given a real-analytic metric g on a neighborhood of the origin of R^3, a
Calabi-Yau structure (Omega, omega) on a complexified neighborhood restricting
to (Vol_g, 0) on y = 0 is built as truncated power series.  The holomorphic
volume coefficient is forced: gamma = holomorphic extension of sqrt(det g).
The hermitian metric h = A + iB is found from the determinant constraint

    (D)   det(h) = |gamma|^2

together with the closedness of the associated Kaehler 2-form

    omega = -sum_{i<j} B_ij (dx_i^dx_j + dy_i^dy_j) + sum_{i,j} A_ij dx_j^dy_i,

whose twenty components split into first-order evolution systems in y1, y2
and y3.  Three successive sweeps extend the data from {y=0} to {y2=y3=0},
then to {y3=0}, then everywhere: in each sweep the evolved unknowns gain one
power of the evolution variable at a time by integrating their evolution
equations, the remaining diagonal entry (a11, a22, a33 respectively) is
solved algebraically from (D) -- the determinant is linear in it with an
invertible leading coefficient -- and the entries left free are supplied by
an extension policy.  A full residual verifier reports how well every
constraint holds; nothing is assumed that is not re-checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .jets import (
    EXACT,
    FLOAT,
    NVARS,
    VAR_NAMES,
    X1,
    X2,
    X3,
    Y1,
    Y2,
    Y3,
    Y_VARS,
    ComplexJet,
    Jet,
    det3,
    holomorphic_extend,
    jet_sqrt,
)


class SolverError(Exception):
    """Base class for construction failures."""


class DegenerateMetricError(SolverError):
    """The leading coefficient multiplying the determinant-solved entry vanishes."""


class PolicyError(SolverError):
    """An extension policy is malformed or inconsistent with its initial data."""


ENTRY_KEYS = ("a11", "a12", "a13", "a21", "a22", "a23", "a31", "a32", "a33",
              "b12", "b13", "b23")

# Evolution systems per sweep: target -> ((sign, source, derivative-variable), ...),
# one first-order equation d(target)/d(y_step) = sum sign * d(source)/d(var).
_EVOLUTION = {
    1: {
        "b12": ((1, "a12", X1), (-1, "a11", X2)),
        "b13": ((1, "a13", X1), (-1, "a11", X3)),
        "b23": ((1, "a13", X2), (-1, "a12", X3)),
    },
    2: {
        "b12": ((1, "a22", X1), (-1, "a21", X2)),
        "b13": ((1, "a23", X1), (-1, "a21", X3)),
        "b23": ((1, "a23", X2), (-1, "a22", X3)),
        "a11": ((1, "a21", Y1), (1, "b12", X1)),
        "a12": ((1, "a22", Y1), (1, "b12", X2)),
        "a13": ((1, "a23", Y1), (1, "b12", X3)),
    },
    3: {
        "b12": ((1, "a32", X1), (-1, "a31", X2)),
        "b13": ((1, "a33", X1), (-1, "a31", X3)),
        "b23": ((1, "a33", X2), (-1, "a32", X3)),
        "a11": ((1, "a31", Y1), (1, "b13", X1)),
        "a12": ((1, "a32", Y1), (1, "b13", X2)),
        "a13": ((1, "a33", Y1), (1, "b13", X3)),
        "a21": ((1, "a31", Y2), (1, "b23", X1)),
        "a22": ((1, "a32", Y2), (1, "b23", X2)),
        "a23": ((1, "a33", Y2), (1, "b23", X3)),
    },
}

# Entries kept symmetric by mirroring an evolved partner, per sweep.
_MIRRORS = {1: (), 2: (("a21", "a12"), ("a31", "a13")), 3: (("a31", "a13"), ("a32", "a23"))}

# Diagonal entry solved from the determinant constraint, per sweep.
_DSOLVE = {1: "a11", 2: "a22", 3: "a33"}

_EVOLVE_VAR = {1: Y1, 2: Y2, 3: Y3}

# Variables still suppressed while a sweep runs (for restricting |gamma|^2).
_SUPPRESSED = {1: (Y2, Y3), 2: (Y3,), 3: ()}

_STEP1_POLICY_KEYS = ("a22", "a33", "a12", "a13", "a23")
_STEP2_POLICY_KEYS = ("a33", "a23")

_DEFAULT_POLICY_TOL = 1e-9


@dataclass(frozen=True)
class ExtensionPolicy:
    """Choice of the entries the construction leaves free.

    ``step1`` optionally assigns a22, a33, a12, a13, a23 on {y2=y3=0} (jets in
    x and y1); ``step2`` optionally assigns a33 and a23 on {y3=0} (jets in x,
    y1, y2).  ``None`` means the constant rule: the entry keeps its previous
    values, with no dependence on the new evolution variable.  Assigned jets
    must restrict to the data they extend.
    """

    step1: dict | None = None
    step2: dict | None = None


CONSTANT_POLICY = ExtensionPolicy()


@dataclass(frozen=True)
class HermitianJet:
    """The matrices A (real part) and B (imaginary part) of h = A + iB.

    ``entries`` holds nine a_ij jets and the three independent b_ij (i < j);
    B is antisymmetric by construction.  A is symmetric for solved structures
    (an emergent property that check_structure verifies, not an input
    assumption).
    """

    entries: dict

    def __post_init__(self):
        missing = [k for k in ENTRY_KEYS if k not in self.entries]
        if missing:
            raise SolverError(f"missing entries: {missing}")
        ref = self.entries["a11"]
        for k in ENTRY_KEYS:
            ref._check_compatible(self.entries[k])

    @property
    def order(self) -> int:
        return self.entries["a11"].order

    @property
    def mode(self) -> str:
        return self.entries["a11"].mode

    @property
    def base_point(self) -> tuple:
        return self.entries["a11"].base_point

    def A(self, i: int, j: int) -> Jet:
        return self.entries[f"a{i}{j}"]

    def B(self, i: int, j: int) -> Jet:
        if i == j:
            return self.entries["a11"].zero_like()
        key = f"b{min(i, j)}{max(i, j)}"
        b = self.entries[key]
        return b if i < j else -b

    def A_matrix(self):
        return [[self.A(i, j) for j in (1, 2, 3)] for i in (1, 2, 3)]

    def B_matrix(self):
        return [[self.B(i, j) for j in (1, 2, 3)] for i in (1, 2, 3)]


@dataclass(frozen=True)
class CYStructureJet:
    """A solved structure: h = A + iB, the volume coefficient gamma, and the
    inputs that produced it."""

    h: HermitianJet
    gamma: ComplexJet
    g: tuple  # 3x3 input metric jets
    policy: ExtensionPolicy | None
    order: int

    @property
    def mode(self) -> str:
        return self.h.mode


@dataclass(frozen=True)
class ResidualReport:
    """Maximum absolute residual coefficient per constraint.

    Exact mode reports exact rationals (zero means identically zero);
    derivative-consuming constraints are evaluated at order - 1.
    """

    res_D: object
    res_domega: object
    res_C41: object
    res_C42: object
    res_initial_A: object
    res_initial_B: object
    res_symmetry: object
    res_slice_im_omega: object
    res_slice_omega: object
    details: dict = field(default_factory=dict)
    effective_orders: dict = field(default_factory=dict)

    _FIELDS = ("res_D", "res_domega", "res_C41", "res_C42", "res_initial_A",
               "res_initial_B", "res_symmetry", "res_slice_im_omega", "res_slice_omega")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self._FIELDS}

    def max_residual(self):
        return max(self.as_dict().values())

    def passes(self, tol) -> bool:
        return all(v <= tol for v in self.as_dict().values())


# -- hermitian matrix helpers ----------------------------------------------------


def _hmatrix(entries: dict):
    """h = A + iB as a 3x3 array of complex jets (B antisymmetric)."""
    def h(i, j):
        a = entries[f"a{i}{j}"]
        if i == j:
            return ComplexJet.from_real(a)
        b = entries[f"b{min(i, j)}{max(i, j)}"]
        return ComplexJet(a, b if i < j else -b)
    return [[h(i, j) for j in (1, 2, 3)] for i in (1, 2, 3)]


def _cdet3(h) -> ComplexJet:
    return (h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
            - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
            + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]))


_COFACTOR_ROWS = {"a11": (2, 3), "a22": (1, 3), "a33": (1, 2)}


def _diagonal_cofactor(entries: dict, key: str) -> ComplexJet:
    """Coefficient of the diagonal entry ``key`` in det(h): the complementary
    2x2 minor."""
    i, j = _COFACTOR_ROWS[key]
    h = _hmatrix(entries)
    return h[i - 1][i - 1] * h[j - 1][j - 1] - h[i - 1][j - 1] * h[j - 1][i - 1]


# -- gamma ------------------------------------------------------------------------


def _validate_metric(g, order: int | None = None):
    if len(g) != 3 or any(len(row) != 3 for row in g):
        raise SolverError("metric must be a 3x3 array of jets")
    ref = g[0][0]
    for row in g:
        for entry in row:
            ref._check_compatible(entry)
            for idx in entry.coeffs:
                if idx[Y1] or idx[Y2] or idx[Y3]:
                    raise SolverError("metric jets must not depend on the y-variables")
    for i in range(3):
        for j in range(i + 1, 3):
            if g[i][j].coeffs != g[j][i].coeffs:
                raise SolverError(f"metric is not symmetric at entry ({i + 1},{j + 1})")
    if order is not None and ref.order != order:
        raise SolverError(f"metric jets have order {ref.order}, expected {order}")
    # positive definiteness of the constant-term matrix (Sylvester)
    c = [[float(g[i][j].constant_term) for j in range(3)] for i in range(3)]
    m1 = c[0][0]
    m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0]
    m3 = (c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
          - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
          + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]))
    if not (m1 > 0 and m2 > 0 and m3 > 0):
        raise DegenerateMetricError(
            f"metric constant term is not positive-definite (leading minors {m1}, {m2}, {m3})")


def build_gamma(g) -> ComplexJet:
    """Holomorphic extension of sqrt(det g): the unique coefficient of the
    holomorphic volume form restricting to the volume density on y = 0."""
    _validate_metric(g)
    d = det3(g)
    if not float(d.constant_term) > 0:
        raise DegenerateMetricError(
            f"det(g) has non-positive constant term {d.constant_term}")
    return holomorphic_extend(jet_sqrt(d))


# -- the three evolution sweeps ----------------------------------------------------


def _coeff_close(a: Jet, b: Jet, tol) -> bool:
    diff = (a - b).max_abs_coeff()
    if a.mode == EXACT:
        return diff == 0
    return diff <= tol


def _apply_policy(step: int, entries: dict, policy: ExtensionPolicy, tol) -> None:
    assigned = policy.step1 if step == 1 else policy.step2 if step == 2 else None
    if step == 3 or assigned is None:
        return
    keys = _STEP1_POLICY_KEYS if step == 1 else _STEP2_POLICY_KEYS
    extra = set(assigned) - set(keys)
    if extra:
        raise PolicyError(f"step {step} policy cannot assign {sorted(extra)}")
    forbidden = (Y2, Y3) if step == 1 else (Y3,)
    restrict_var = Y1 if step == 1 else Y2
    for key in keys:
        if key not in assigned:
            continue
        jet = assigned[key]
        entries["a11"]._check_compatible(jet)
        if any(jet.depends_on(v) for v in forbidden):
            names = ", ".join(VAR_NAMES[v] for v in forbidden)
            raise PolicyError(f"step {step} policy entry {key} may not depend on {names}")
        if not _coeff_close(jet.restrict_zero((restrict_var,)), entries[key], tol):
            raise PolicyError(
                f"step {step} policy entry {key} does not restrict to the data it extends")
        entries[key] = jet
        if key[0] == "a" and key[1] != key[2]:
            entries[f"a{key[2]}{key[1]}"] = jet


def ck_step(step: int, state: HermitianJet, gamma: ComplexJet,
            policy: ExtensionPolicy = CONSTANT_POLICY,
            policy_tol: float = _DEFAULT_POLICY_TOL) -> HermitianJet:
    """One evolution sweep: extend the partial solution into y1, y2 or y3.

    The state must already solve the previous sweeps (for step 1: carry the
    initial data A(x,0) = g, B(x,0) = 0).  Evolved unknowns gain one power of
    the evolution variable per round from their first-order equations; the
    sweep's diagonal entry comes from the determinant constraint, which is
    linear in it.
    """
    if step not in (1, 2, 3):
        raise SolverError(f"step must be 1, 2 or 3, got {step}")
    cur = dict(state.entries)
    _apply_policy(step, cur, policy, policy_tol)
    order = state.order
    ev = _EVOLVE_VAR[step]
    d_key = _DSOLVE[step]
    gamma_sq = gamma.abs2().restrict_zero(_SUPPRESSED[step])

    cof0 = _diagonal_cofactor({k: cur[k].slice_coeff(ev, 0) for k in ENTRY_KEYS}, d_key)
    if cof0.re.constant_term == 0:
        i, j = _COFACTOR_ROWS[d_key]
        raise DegenerateMetricError(
            f"the ({i},{j})x({i},{j}) minor multiplying {d_key} vanishes at the base point")

    for m in range(1, order + 1):
        new_slices = {}
        for key, terms in _EVOLUTION[step].items():
            rhs = None
            for sign, src, var in terms:
                d = cur[src].slice_coeff(ev, m - 1).partial(var)
                if sign < 0:
                    d = -d
                rhs = d if rhs is None else rhs + d
            new_slices[key] = rhs / m
        for key, sl in new_slices.items():
            cur[key] = cur[key] + sl.mul_monomial(ev, m)
        for dst, src in _MIRRORS[step]:
            cur[dst] = cur[dst] + new_slices[src].mul_monomial(ev, m)
        # determinant constraint at this order, linear in the diagonal entry
        capped = {k: cur[k].truncate_var(ev, m) for k in ENTRY_KEYS}
        det_rest = _cdet3(_hmatrix(capped)).re.slice_coeff(ev, m)
        numer = gamma_sq.slice_coeff(ev, m) - det_rest
        d_slice = numer / cof0.re.truncate(order - m)
        cur[d_key] = cur[d_key] + d_slice.mul_monomial(ev, m)

    return HermitianJet(cur)


def solve_calabi_yau(g, order: int, policy: ExtensionPolicy = CONSTANT_POLICY,
                     policy_tol: float = _DEFAULT_POLICY_TOL) -> CYStructureJet:
    """Run the full construction: gamma, then the three sweeps.

    ``g`` is a 3x3 array of symmetric, y-free jets of the requested order with
    positive-definite constant term.  Deterministic for fixed inputs.
    """
    if order < 2:
        raise SolverError(f"order must be >= 2, got {order}")
    _validate_metric(g, order)
    gamma = build_gamma(g)
    zero = g[0][0].zero_like()
    entries = {f"a{i}{j}": g[i - 1][j - 1] for i in (1, 2, 3) for j in (1, 2, 3)}
    entries.update({"b12": zero, "b13": zero, "b23": zero})
    state = HermitianJet(entries)
    for step in (1, 2, 3):
        state = ck_step(step, state, gamma, policy, policy_tol)
    return CYStructureJet(h=state, gamma=gamma, g=tuple(tuple(row) for row in g),
                          policy=policy, order=order)


# -- residual verification -----------------------------------------------------------


def _maxc(jet: Jet):
    return jet.max_abs_coeff()


def check_structure(s: CYStructureJet) -> ResidualReport:
    """Evaluate every constraint on the stored structure and report the
    maximum absolute coefficient of each residual jet."""
    e = s.h.entries
    gamma = s.gamma
    det = _cdet3(_hmatrix(e))
    gsq = gamma.abs2()
    details: dict = {}
    details["D"] = _maxc(det.re - gsq)
    details["D_imag"] = _maxc(det.im)

    a = {(i, j): e[f"a{i}{j}"] for i in (1, 2, 3) for j in (1, 2, 3)}
    b = {(1, 2): e["b12"], (1, 3): e["b13"], (2, 3): e["b23"]}
    xs = (None, X1, X2, X3)
    ys = (None, Y1, Y2, Y3)
    pairs = ((1, 2), (1, 3), (2, 3))

    def group_max(residuals):
        vals = [_maxc(r) for r in residuals]
        return max(vals)

    closure = {}
    for p, label in ((1, "C1"), (2, "C2.1"), (3, "C3.1")):
        closure[label] = group_max(
            b[i, j].partial(ys[p]) - a[p, j].partial(xs[i]) + a[p, i].partial(xs[j])
            for i, j in pairs)
    for (r1, r2), label, bkey in (((1, 2), "C2.2", (1, 2)), ((1, 3), "C3.2", (1, 3)),
                                  ((2, 3), "C3.3", (2, 3))):
        closure[label] = group_max(
            a[r1, k].partial(ys[r2]) - a[r2, k].partial(ys[r1]) - b[bkey].partial(xs[k])
            for k in (1, 2, 3))
    closure["C4.1"] = _maxc(b[2, 3].partial(X1) - b[1, 3].partial(X2) + b[1, 2].partial(X3))
    closure["C4.2"] = _maxc(b[2, 3].partial(Y1) - b[1, 3].partial(Y2) + b[1, 2].partial(Y3))
    details.update(closure)

    res_initial_A = max(_maxc(a[i, j].restrict_zero(Y_VARS) - s.g[i - 1][j - 1])
                        for i in (1, 2, 3) for j in (1, 2, 3))
    res_initial_B = max(_maxc(bij.restrict_zero(Y_VARS)) for bij in b.values())
    res_symmetry = max(_maxc(a[i, j] - a[j, i]) for i, j in pairs)
    res_slice_im = _maxc(gamma.im.restrict_zero(Y_VARS))

    report = ResidualReport(
        res_D=max(details["D"], details["D_imag"]),
        res_domega=max(closure.values()),
        res_C41=closure["C4.1"],
        res_C42=closure["C4.2"],
        res_initial_A=res_initial_A,
        res_initial_B=res_initial_B,
        res_symmetry=res_symmetry,
        res_slice_im_omega=res_slice_im,
        res_slice_omega=res_initial_B,
        details=details,
        effective_orders={"D": s.order, "closure": s.order - 1, "initial": s.order,
                          "symmetry": s.order, "slices": s.order},
    )
    return report


def horizontal_slice_residuals(s: CYStructureJet) -> dict:
    """Residuals of the conditions making every slice {y1 = t, y2 = y3 = 0}
    special Lagrangian: B and Im(gamma) restricted to that slice family."""
    e = s.h.entries
    b_max = max(_maxc(e[k].restrict_zero((Y2, Y3))) for k in ("b12", "b13", "b23"))
    im_max = _maxc(s.gamma.im.restrict_zero((Y2, Y3)))
    return {"B_slice": b_max, "im_gamma_slice": im_max}


# -- structure dump / load -------------------------------------------------------------

_DUMP_HEADER = "slagcy-structure v1"


def _dump_scalar(v, mode: str) -> str:
    return str(v) if mode == EXACT else repr(float(v))


def _parse_scalar(text: str, mode: str):
    return Fraction(text) if mode == EXACT else float(text)


def dump_structure(s: CYStructureJet) -> str:
    """Stable text dump: per entry, "multi-index : coefficient" lines in
    graded-lex order."""
    mode = s.mode
    lines = [_DUMP_HEADER, f"mode = {mode}", f"order = {s.order}",
             "base_point = " + " ".join(_dump_scalar(v, mode) for v in s.h.base_point)]
    def emit(tag, jet):
        lines.append(f"[{tag}]")
        dump = jet.dumps()
        if dump:
            lines.append(dump)
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            emit(f"A {i} {j}", s.h.A(i, j))
    for i, j in ((1, 2), (1, 3), (2, 3)):
        emit(f"B {i} {j}", s.h.entries[f"b{i}{j}"])
    for i in (1, 2, 3):
        for j in range(i, 4):
            emit(f"g {i} {j}", s.g[i - 1][j - 1])
    emit("gamma re", s.gamma.re)
    emit("gamma im", s.gamma.im)
    return "\n".join(lines) + "\n"


def load_structure(text: str) -> CYStructureJet:
    """Parse a dump back into a structure (policy is not recorded)."""
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    if not lines or lines[0] != _DUMP_HEADER:
        raise SolverError("not a structure dump (bad header)")
    meta = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("["):
        if "=" in lines[pos]:
            key, _, value = lines[pos].partition("=")
            meta[key.strip()] = value.strip()
        pos += 1
    try:
        mode = meta["mode"]
        order = int(meta["order"])
        base_point = tuple(_parse_scalar(v, mode) for v in meta["base_point"].split())
    except KeyError as exc:
        raise SolverError(f"structure dump missing {exc}") from exc
    if mode not in (EXACT, FLOAT):
        raise SolverError(f"unknown mode {mode!r}")

    sections: dict = {}
    tag = None
    for ln in lines[pos:]:
        if ln.startswith("["):
            tag = ln.strip("[]")
            sections[tag] = {}
        elif ln.strip():
            if tag is None:
                raise SolverError("coefficient line before any section")
            idx_text, _, val_text = ln.partition(":")
            idx = tuple(int(v) for v in idx_text.split())
            if len(idx) != NVARS:
                raise SolverError(f"bad multi-index line {ln!r}")
            sections[tag][idx] = _parse_scalar(val_text.strip(), mode)

    def jet_of(tag: str) -> Jet:
        return Jet.from_terms(sections.get(tag, {}), order, mode, base_point)

    entries = {f"a{i}{j}": jet_of(f"A {i} {j}") for i in (1, 2, 3) for j in (1, 2, 3)}
    for i, j in ((1, 2), (1, 3), (2, 3)):
        entries[f"b{i}{j}"] = jet_of(f"B {i} {j}")
    g = [[None] * 3 for _ in range(3)]
    for i in (1, 2, 3):
        for j in range(i, 4):
            jet = jet_of(f"g {i} {j}")
            g[i - 1][j - 1] = jet
            g[j - 1][i - 1] = jet
    gamma = ComplexJet(jet_of("gamma re"), jet_of("gamma im"))
    return CYStructureJet(h=HermitianJet(entries), gamma=gamma,
                          g=tuple(tuple(row) for row in g), policy=None, order=order)
