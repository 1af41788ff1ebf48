"""One-parameter metric families on the torus and their admissibility test.

A family A_t feeds the structure solver with every horizontal slice
{y1 = t, y2 = y3 = 0} special Lagrangian exactly when det(A_t) does not
depend on t and the 1-form dual to d/dx1 is harmonic for A_t at every t;
harmonicity splits into the closure of the form (curl of the first row) and
the closure of its Hodge dual (x1-independence of sqrt(det A_t)).  The test
evaluates these three residuals on sampled grids.

Constructors cover a block-diagonal class diag(e^u, Q_t) with
det(Q_t) = e^{-u} q(x2, x3), two collapsing degenerations of it obtained by
normalizing integral constraints numerically, and the cone-asymptotic
cylinder family built from a curve (x1 + i t)^(1/3).  Entries are either DSL
expressions (jet-expandable) or plain grid evaluators (when a numeric
normalization constant is baked in).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import dsl
from .dsl import Expr, eval_grid, eval_jet, free_variables, parse
from .gridops import grid_diff, periodic_axis, periodic_quad
from .jets import FLOAT, X1, X2, X3, Y1, Jet
from .solver import ExtensionPolicy


class FamilyError(Exception):
    """Malformed family or sampling failure."""


class InadmissibleFamilyError(FamilyError):
    """The family fails the slice-by-slice special Lagrangian conditions."""


def _as_expr(obj) -> Expr:
    if isinstance(obj, str):
        return parse(obj)
    if isinstance(obj, (int, float)):
        from fractions import Fraction
        return dsl.Num(Fraction(obj))
    return obj


@dataclass(frozen=True)
class ExprEntry:
    """Metric entry given by a DSL expression over (t, x1, x2, x3)."""

    expr: Expr

    def sample(self, t: float, axes: dict) -> np.ndarray:
        env = dict(axes)
        env["t"] = t
        return np.asarray(eval_grid(self.expr, env), dtype=np.float64)


@dataclass(frozen=True)
class GridEntry:
    """Metric entry given by a plain evaluator (t, axes) -> samples.

    Used when the entry involves a numerically computed normalization and is
    therefore not expressible in the DSL; such entries sample onto grids but
    cannot be jet-expanded.
    """

    fn: Callable
    label: str = ""

    def sample(self, t: float, axes: dict) -> np.ndarray:
        return np.asarray(self.fn(t, axes), dtype=np.float64)


def _entry(obj):
    if isinstance(obj, (ExprEntry, GridEntry)):
        return obj
    return ExprEntry(_as_expr(obj))


@dataclass(frozen=True)
class MetricFamily:
    """A t-parametrized dim x dim symmetric metric with sampled entries."""

    dim: int
    entries: tuple
    t_range: tuple
    periodic: tuple
    name: str = ""

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise FamilyError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.entries) != self.dim or any(len(r) != self.dim for r in self.entries):
            raise FamilyError("entries must form a dim x dim array")
        if len(self.periodic) != self.dim:
            raise FamilyError("one periodicity flag per x-variable is required")
        lo, hi = self.t_range
        if not lo <= hi:
            raise FamilyError(f"empty t_range {self.t_range}")

    def entry(self, i: int, j: int):
        return self.entries[i - 1][j - 1]

    def sample_matrix(self, t: float, axes: dict) -> list:
        return [[self.entries[i][j].sample(t, axes) for j in range(self.dim)]
                for i in range(self.dim)]

    def is_expressible(self) -> bool:
        return all(isinstance(e, ExprEntry) for row in self.entries for e in row)


def family_from_entries(entries, *, dim: int = 3, t_range=(0.0, 1.0),
                        periodic=None, name: str = "") -> MetricFamily:
    """Build a symmetric family from an upper-triangular dict like
    {"g11": "...", "g12": "...", ...}; missing off-diagonals are zero."""
    if periodic is None:
        periodic = (True,) * dim
    grid = [[None] * dim for _ in range(dim)]
    known = dict(entries)
    for i in range(1, dim + 1):
        for j in range(i, dim + 1):
            key = f"g{i}{j}"
            value = known.pop(key, None)
            if value is None and i == j:
                raise FamilyError(f"missing diagonal entry {key}")
            ent = _entry(value if value is not None else 0)
            grid[i - 1][j - 1] = ent
            grid[j - 1][i - 1] = ent
    if known:
        raise FamilyError(f"unknown entries {sorted(known)}")
    return MetricFamily(dim, tuple(tuple(r) for r in grid), tuple(t_range),
                        tuple(periodic), name)


def family_axes(fam: MetricFamily, n: int) -> dict:
    """Sparse broadcastable sample axes {"x1": ..., ...} for the family's grid."""
    axes = {}
    for k in range(fam.dim):
        x = periodic_axis(n, fam.periodic[k])
        shape = [1] * fam.dim
        shape[k] = n
        axes[f"x{k + 1}"] = x.reshape(shape)
    return axes


@dataclass(frozen=True)
class FamilyCheckReport:
    """Maximum sampled residual of each slice condition."""

    det_t_independence: float
    det_x1_independence: float
    closure_residual: float
    tolerance: float
    n: int
    nt: int

    @property
    def verdict(self) -> str:
        return "pass" if self.passed() else "fail"

    def passed(self) -> bool:
        return max(self.det_t_independence, self.det_x1_independence,
                   self.closure_residual) <= self.tolerance

    def as_dict(self) -> dict:
        return {
            "det_t_independence": self.det_t_independence,
            "det_x1_independence": self.det_x1_independence,
            "closure_residual": self.closure_residual,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "n": self.n,
            "nt": self.nt,
        }


def _det_samples(m, dim: int) -> np.ndarray:
    if dim == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _check_positive_definite(m, dim: int, t: float) -> None:
    minors = [np.asarray(m[0][0])]
    minors.append(np.asarray(m[0][0] * m[1][1] - m[0][1] * m[1][0]))
    if dim == 3:
        minors.append(np.asarray(_det_samples(m, 3)))
    for k, minor in enumerate(minors, start=1):
        if not np.all(minor > 0):
            raise FamilyError(
                f"non-positive-definite sample at t={t}: leading minor {k} reaches "
                f"{float(np.min(minor))}")


def check_slag_family(fam: MetricFamily, n: int = 64, nt: int = 9,
                      tol: float = 1e-10) -> FamilyCheckReport:
    """Evaluate the three slice conditions on an n^dim x nt sample grid.

    A passing family feeds :func:`family_to_policy` with every horizontal
    slice special Lagrangian.
    """
    if nt < 2:
        raise FamilyError("need at least 2 t-samples for the t-derivative")
    axes = family_axes(fam, n)
    lo, hi = fam.t_range
    ts = np.linspace(lo, hi, nt)

    dets = []
    closure_max = 0.0
    sqrt_det_x1_max = 0.0
    full_shape = np.broadcast_shapes(*(a.shape for a in axes.values()))
    for t in ts:
        m = fam.sample_matrix(float(t), axes)
        _check_positive_definite(m, fam.dim, float(t))
        det = np.broadcast_to(_det_samples(m, fam.dim), full_shape)
        dets.append(det)
        d_sqrt = grid_diff(np.sqrt(det), 0, fam.periodic[0], n)
        sqrt_det_x1_max = max(sqrt_det_x1_max, float(np.max(np.abs(d_sqrt))))
        for i in range(fam.dim):
            for j in range(i + 1, fam.dim):
                r = (grid_diff(m[0][j], i, fam.periodic[i], n)
                     - grid_diff(m[0][i], j, fam.periodic[j], n))
                closure_max = max(closure_max, float(np.max(np.abs(r))))
    det_t = np.gradient(np.stack(dets, axis=0), ts, axis=0)
    det_t_max = float(np.max(np.abs(det_t)))
    return FamilyCheckReport(det_t_independence=det_t_max,
                             det_x1_independence=sqrt_det_x1_max,
                             closure_residual=closure_max,
                             tolerance=tol, n=n, nt=nt)


# -- constructors for the block-diagonal class -------------------------------------


def make_block_family(u, Q, q, *, t_range=(0.0, 1.0), periodic=(True, True, True),
                      n_check: int = 64, nt_check: int = 5, tol: float = 1e-10,
                      name: str = "block") -> MetricFamily:
    """diag(e^u, Q_t) with the block-determinant law det(Q_t) = e^{-u} q.

    ``u`` depends on (t, x1), ``q`` on (x2, x3); the law is validated on a
    sample grid and violations are rejected.
    """
    u = _as_expr(u)
    q = _as_expr(q)
    qm = [[_as_expr(Q[i][j]) for j in range(2)] for i in range(2)]
    if free_variables(u) - {"t", "x1"}:
        raise FamilyError("u may depend on t and x1 only")
    if free_variables(q) - {"x2", "x3"}:
        raise FamilyError("q may depend on x2 and x3 only")
    entries = (
        (ExprEntry(dsl.Call("exp", u)), _entry(0), _entry(0)),
        (_entry(0), ExprEntry(qm[0][0]), ExprEntry(qm[0][1])),
        (_entry(0), ExprEntry(qm[0][1]), ExprEntry(qm[1][1])),
    )
    fam = MetricFamily(3, entries, tuple(t_range), tuple(periodic), name)
    axes = family_axes(fam, n_check)
    worst = 0.0
    for t in np.linspace(t_range[0], t_range[1], nt_check):
        env = dict(axes)
        env["t"] = float(t)
        det_q = (eval_grid(qm[0][0], env) * eval_grid(qm[1][1], env)
                 - eval_grid(qm[0][1], env) ** 2)
        law = np.exp(-eval_grid(u, env)) * eval_grid(q, env)
        worst = max(worst, float(np.max(np.abs(det_q - law))))
    if worst > tol:
        raise FamilyError(
            f"block-determinant law violated: max |det(Q) - e^(-u) q| = {worst:.3e}")
    return fam


_NORM_GRID = 256


def _collapse_norm(w: Expr, t: float, n_norm: int) -> float:
    """Integral of e^{w(t,s)/2} over one period in x1."""
    s = periodic_axis(n_norm)
    vals = np.exp(0.5 * eval_grid(w, {"t": t, "x1": s}))
    if not np.all(np.isfinite(vals)):
        raise FamilyError(f"non-integrable profile at t={t}")
    return float(periodic_quad(vals))


def make_collapsing_22(w_raw, t1: float, *, t_range=None, n_norm: int = _NORM_GRID,
                       name: str = "collapse22") -> MetricFamily:
    """Family whose 2-cycle {x1 = 1/2} collapses to a circle as t -> t1.

    The raw profile is renormalized to u_t = w_raw - 2 log int_0^1 e^{w_raw/2},
    which pins int_0^1 e^{u_t/2} = 1 for every t; the metric is
    diag(e^u, 1, e^{-u}).
    """
    w = _as_expr(w_raw)
    if free_variables(w) - {"t", "x1"}:
        raise FamilyError("the collapse profile may depend on t and x1 only")
    if t_range is None:
        t_range = (0.0, 0.9 * t1)
    if not t_range[1] < t1:
        raise FamilyError(f"t_range must stay strictly below the collapse time {t1}")

    def a11(t, axes):
        norm = _collapse_norm(w, t, n_norm)
        return np.exp(eval_grid(w, {"t": t, "x1": axes["x1"]})) / norm ** 2

    def a33(t, axes):
        norm = _collapse_norm(w, t, n_norm)
        return np.exp(-eval_grid(w, {"t": t, "x1": axes["x1"]})) * norm ** 2

    zero = _entry(0)
    entries = (
        (GridEntry(a11, "exp(u)"), zero, zero),
        (zero, _entry(1), zero),
        (zero, zero, GridEntry(a33, "exp(-u)")),
    )
    return MetricFamily(3, entries, tuple(t_range), (True, True, True), name)


def make_collapsing_21(w_raw, v_raw, t1: float, *, t_range=None,
                       n_norm: int = _NORM_GRID, name: str = "collapse21") -> MetricFamily:
    """Family also collapsing the 2-cycle {x2 = 1/2}: diag(e^u, e^v, e^{-(u+v)})
    with int_0^1 e^{v_t(x1,s)/2} ds = 1 enforced by a per-x1 shift of v."""
    w = _as_expr(w_raw)
    v = _as_expr(v_raw)
    if free_variables(w) - {"t", "x1"}:
        raise FamilyError("the x1-profile may depend on t and x1 only")
    if free_variables(v) - {"t", "x1", "x2"}:
        raise FamilyError("the x2-profile may depend on t, x1 and x2 only")
    if t_range is None:
        t_range = (0.0, 0.9 * t1)
    if not t_range[1] < t1:
        raise FamilyError(f"t_range must stay strictly below the collapse time {t1}")

    def _v_norm(t: float, x1: np.ndarray) -> np.ndarray:
        """Per-x1 normalizer int_0^1 e^{v(t,x1,s)/2} ds, broadcast like x1."""
        flat = np.atleast_1d(np.asarray(x1, dtype=np.float64)).ravel()
        s = periodic_axis(n_norm)
        vals = np.exp(0.5 * eval_grid(v, {"t": t, "x1": flat[:, None], "x2": s[None, :]}))
        if not np.all(np.isfinite(vals)):
            raise FamilyError(f"non-integrable profile at t={t}")
        vals = np.broadcast_to(np.asarray(vals), (flat.size, s.size))
        norms = np.asarray(periodic_quad(vals, axis=1))
        return norms.reshape(np.shape(x1) if np.ndim(x1) else ())

    def a11(t, axes):
        norm = _collapse_norm(w, t, n_norm)
        return np.exp(eval_grid(w, {"t": t, "x1": axes["x1"]})) / norm ** 2

    def a22(t, axes):
        vn = _v_norm(t, axes["x1"])
        vv = eval_grid(v, {"t": t, "x1": axes["x1"], "x2": axes["x2"]})
        return np.exp(vv) / vn ** 2

    def a33(t, axes):
        norm = _collapse_norm(w, t, n_norm)
        vn = _v_norm(t, axes["x1"])
        vv = eval_grid(v, {"t": t, "x1": axes["x1"], "x2": axes["x2"]})
        wv = eval_grid(w, {"t": t, "x1": axes["x1"]})
        return np.exp(-(wv + vv)) * norm ** 2 * vn ** 2

    zero = _entry(0)
    entries = (
        (GridEntry(a11, "exp(u)"), zero, zero),
        (zero, GridEntry(a22, "exp(v)"), zero),
        (zero, zero, GridEntry(a33, "exp(-(u+v))")),
    )
    return MetricFamily(3, entries, tuple(t_range), (True, True, True), name)


def make_cone_family(f, *, t_range=(0.1, 1.0), name: str = "cone") -> MetricFamily:
    """Cylinder family asymptotic to a cone: diag(|c'|^2, |c|^2 f, |c|^2 f)
    for the curve c(x1) = (x1 + i t)^(1/3), principal branch, x1 > 0.

    ``f`` is the conformal factor of the cross-section metric, a positive
    function of (x2, x3).  Not periodic in x1; grids avoid the branch point.
    """
    f = _as_expr(f)
    if free_variables(f) - {"x2", "x3"}:
        raise FamilyError("the conformal factor may depend on x2 and x3 only")

    def _modulus_sq(t, x1):
        x1 = np.asarray(x1, dtype=np.float64)
        if not np.all(x1 > 0):
            raise FamilyError("cone family sampled at x1 <= 0 (branch point)")
        return x1 ** 2 + float(t) ** 2

    def a11(t, axes):
        # |c'|^2 = (1/9) |x1 + i t|^(-4/3)
        return _modulus_sq(t, axes["x1"]) ** (-2.0 / 3.0) / 9.0

    def across(t, axes):
        fv = eval_grid(f, {"x2": axes.get("x2", 0.0), "x3": axes.get("x3", 0.0)})
        if not np.all(fv > 0):
            raise FamilyError("conformal factor must be positive on samples")
        return _modulus_sq(t, axes["x1"]) ** (1.0 / 3.0) * fv

    zero = _entry(0)
    entries = (
        (GridEntry(a11, "|c'|^2"), zero, zero),
        (zero, GridEntry(across, "|c|^2 f"), zero),
        (zero, zero, GridEntry(across, "|c|^2 f")),
    )
    return MetricFamily(3, entries, tuple(t_range), (False, True, True), name)


# -- bridge into the structure solver ------------------------------------------------


def family_to_policy(fam: MetricFamily, base_t: float, order: int,
                     mode: str = FLOAT, base_x=(0, 0, 0), *,
                     check: bool = True, check_n: int = 64, check_nt: int = 9,
                     check_tol: float = 1e-10):
    """Jet-expand A_{base_t + y1} into step-1 extension data.

    Returns (g, policy): the metric jets at t = base_t and an extension policy
    assigning the free step-1 entries from the family, so that the solved
    structure carries the slices {y1 = const} as the family's tori.  The
    family must be expressible (pure DSL entries) and pass the admissibility
    check.
    """
    if fam.dim != 3:
        raise FamilyError("only 3-dimensional families feed the structure solver")
    if not fam.is_expressible():
        raise FamilyError(
            "family entries are not jet-expandable (numerically normalized or grid-only)")
    if check:
        report = check_slag_family(fam, n=check_n, nt=check_nt, tol=check_tol)
        if not report.passed():
            raise InadmissibleFamilyError(
                f"family fails the slice conditions: {report.as_dict()}")

    base_point = tuple(base_x) + (0, 0, 0)
    gens = {
        "x1": Jet.variable(X1, order, mode, base_point),
        "x2": Jet.variable(X2, order, mode, base_point),
        "x3": Jet.variable(X3, order, mode, base_point),
    }
    env_g = dict(gens)
    env_g["t"] = Jet.constant(base_t, order, mode, base_point)
    env_p = dict(gens)
    env_p["t"] = Jet.variable(Y1, order, mode, base_point) + base_t

    g = [[eval_jet(fam.entry(i, j).expr, env_g) for j in (1, 2, 3)] for i in (1, 2, 3)]
    policy_keys = {"a22": (2, 2), "a33": (3, 3), "a12": (1, 2), "a13": (1, 3), "a23": (2, 3)}
    step1 = {key: eval_jet(fam.entry(i, j).expr, env_p) for key, (i, j) in policy_keys.items()}
    return g, ExtensionPolicy(step1=step1, step2=None)
