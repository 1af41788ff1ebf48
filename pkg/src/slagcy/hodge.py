"""Harmonic 1-form bases on metric tori and the obstruction curve Phi(t).

For a family of flat-coordinate tori, the harmonic basis dual to the
coordinate cycles has closed-form coefficients in two classes: diagonal 3D
metrics depending on x1 only (theta_1 = g11/int(g11) dx1, theta_2 = dx2,
theta_3 = dx3) and general admissible 2D metrics with det = C(x2).  The
obstruction function is the determinant of the L2 Gram matrix of that basis;
it is identically 1 for the 2D class and genuinely t-dependent in 3D.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .families import (
    InadmissibleFamilyError,
    MetricFamily,
    check_slag_family,
    family_axes,
)
from .gridops import periodic_quad, spectral_diff

__all__ = [
    "HarmonicBasis", "GramMatrix", "PhiCurve", "periodic_quad",
    "harmonic_basis_diag3", "harmonic_basis_2d", "gram_L2",
    "phi_curve", "phi_2d", "transform_gram",
]


class HodgeError(Exception):
    """Precondition or verification failure while building a basis."""


@dataclass(frozen=True)
class HarmonicBasis:
    """1-forms theta_i = sum_k theta[i, k] dx_{k+1} sampled on a periodic grid,
    normalized against the coordinate cycles: int_{cycle_i} theta_j = delta_ij."""

    dim: int
    theta: np.ndarray          # (dim, dim, *grid)
    metric: np.ndarray         # (dim, dim, *grid) samples that produced it
    cycle_basis: np.ndarray    # integer homology basis (identity here)
    scale: float = 1.0         # 2D volume-normalization factor applied to C
    residuals: dict = None

    @property
    def grid_shape(self) -> tuple:
        return self.theta.shape[2:]


@dataclass(frozen=True)
class GramMatrix:
    """L2 inner products of the basis forms, plus the torus volume."""

    matrix: np.ndarray
    volume: float

    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class PhiCurve:
    """Sampled obstruction values Phi(t) = det(Gram(t))."""

    t: np.ndarray
    phi: np.ndarray
    grams: tuple
    integrals: np.ndarray | None = None  # columns documented per builder

    def spread(self) -> float:
        return float(np.max(self.phi) - np.min(self.phi))

    def dphi_dt(self) -> np.ndarray:
        return np.gradient(self.phi, self.t)

    def classification(self, tol: float = 1e-10) -> str:
        return "non-constant" if self.spread() > 100.0 * tol else "constant"

    def to_csv(self, target) -> None:
        """Write `t,phi,g11_int,g22_int,g33_int` rows at full double precision."""
        close = False
        if isinstance(target, (str, bytes)):
            fh = open(target, "w", encoding="utf-8")
            close = True
        else:
            fh = target
        try:
            fh.write("t,phi,g11_int,g22_int,g33_int\n")
            for k in range(len(self.t)):
                cols = [self.t[k], self.phi[k]]
                if self.integrals is not None:
                    cols.extend(self.integrals[k])
                else:
                    cols.extend([np.nan] * 3)
                fh.write(",".join(format(float(c), ".17g") for c in cols) + "\n")
        finally:
            if close:
                fh.close()

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


# -- shared helpers --------------------------------------------------------------


def _metric_stack(samples, dim: int, shape) -> np.ndarray:
    out = np.empty((dim, dim) + shape, dtype=np.float64)
    for i in range(dim):
        for j in range(dim):
            out[i, j] = np.broadcast_to(samples[i][j], shape)
    return out


def _pointwise_inverse(metric: np.ndarray) -> tuple:
    """Inverse and determinant of a (dim, dim, *grid) sample stack."""
    m = np.moveaxis(metric, (0, 1), (-2, -1))
    det = np.linalg.det(m)
    if not np.all(det > 0):
        raise HodgeError("singular metric sample (non-positive determinant)")
    inv = np.linalg.inv(m)
    return np.moveaxis(inv, (-2, -1), (0, 1)), det


def gram_L2(basis: HarmonicBasis, metric: np.ndarray | None = None) -> GramMatrix:
    """Gram matrix <theta_i, theta_j> = int g^{kl} theta_ik theta_jl sqrt(det g)
    over the torus, by periodic quadrature on the basis grid."""
    g = basis.metric if metric is None else np.asarray(metric, dtype=np.float64)
    dim = basis.dim
    inv, det = _pointwise_inverse(g)
    sqrt_det = np.sqrt(det)
    entries = np.empty((dim, dim), dtype=np.float64)
    for i in range(dim):
        for j in range(i, dim):
            integrand = np.zeros_like(sqrt_det)
            for k in range(dim):
                for l in range(dim):
                    integrand = integrand + inv[k, l] * basis.theta[i, k] * basis.theta[j, l]
            value = float(periodic_quad(integrand * sqrt_det))
            entries[i, j] = value
            entries[j, i] = value
    return GramMatrix(matrix=entries, volume=float(periodic_quad(sqrt_det)))


def transform_gram(gram: GramMatrix, basis_change: np.ndarray) -> GramMatrix:
    """Gram matrix after replacing the cycle basis by P . cycles."""
    p = np.asarray(basis_change, dtype=np.float64)
    if abs(abs(np.linalg.det(p)) - 1.0) > 1e-9:
        raise HodgeError("cycle basis change must be unimodular")
    pinv = np.linalg.inv(p)
    return GramMatrix(matrix=pinv.T @ gram.matrix @ pinv, volume=gram.volume)


def _verify_periods(basis: HarmonicBasis, tol: float) -> float:
    """Max deviation of the cycle-period matrix from the identity.

    Periods are averaged over representative circles; closure makes the
    representative irrelevant up to quadrature error.
    """
    dim = basis.dim
    worst = 0.0
    for i in range(dim):
        for j in range(dim):
            comp = basis.theta[i, j]
            other_axes = tuple(ax for ax in range(dim) if ax != j)
            if comp.ndim == dim:
                per_rep = periodic_quad(comp, axis=j)
                value = float(np.mean(per_rep))
            else:  # 1D storage: coefficients depend on x1 only
                value = float(periodic_quad(comp)) if j == 0 else float(np.mean(comp))
            target = 1.0 if i == j else 0.0
            worst = max(worst, abs(value - target))
    if worst > tol:
        raise HodgeError(f"cycle normalization off by {worst:.3e} (tol {tol:.1e})")
    return worst


def _closure_residual(theta: np.ndarray, dim: int) -> float:
    worst = 0.0
    for i in range(dim):
        for a in range(dim):
            for b in range(a + 1, dim):
                r = spectral_diff(theta[i, b], a) - spectral_diff(theta[i, a], b)
                worst = max(worst, float(np.max(np.abs(r))))
    return worst


def _coclosure_residual(theta: np.ndarray, metric: np.ndarray, dim: int) -> float:
    inv, det = _pointwise_inverse(metric)
    sqrt_det = np.sqrt(det)
    worst = 0.0
    for i in range(dim):
        div = np.zeros_like(sqrt_det)
        for k in range(dim):
            flux = np.zeros_like(sqrt_det)
            for l in range(dim):
                flux = flux + inv[k, l] * theta[i, l]
            div = div + spectral_diff(sqrt_det * flux, k)
        worst = max(worst, float(np.max(np.abs(div / sqrt_det))))
    return worst


# -- diagonal 3D basis --------------------------------------------------------------


def _diag3_samples(fam: MetricFamily, t: float, n: int, tol: float) -> np.ndarray:
    """(3, n) diagonal entry samples over the x1-grid, after validating that
    the family is diagonal, x1-only and unit-determinant."""
    if fam.dim != 3:
        raise HodgeError("diagonal basis needs a 3-dimensional family")
    axes = family_axes(fam, n)
    m = fam.sample_matrix(t, axes)
    diag = np.empty((3, n), dtype=np.float64)
    for i in range(3):
        for j in range(3):
            arr = np.asarray(m[i][j])
            if i != j:
                if arr.size and float(np.max(np.abs(arr))) > tol:
                    raise HodgeError(f"family entry ({i + 1},{j + 1}) is not zero")
                continue
            if arr.ndim == 3 and (arr.shape[1] > 1 or arr.shape[2] > 1):
                raise HodgeError(f"diagonal entry ({i + 1},{i + 1}) depends on x2 or x3")
            diag[i] = np.broadcast_to(arr.reshape(-1), (n,))
    det = diag[0] * diag[1] * diag[2]
    if float(np.max(np.abs(det - 1.0))) > tol:
        raise HodgeError("family determinant is not identically 1 on samples")
    if np.any(diag <= 0):
        raise HodgeError("non-positive diagonal sample")
    return diag


def harmonic_basis_diag3(fam: MetricFamily, t: float, n: int = 256,
                         tol: float = 1e-10) -> HarmonicBasis:
    """Cycle-normalized harmonic basis for diagonal metrics depending on
    (t, x1) with unit determinant: theta_1 = g11/int(g11) dx1, theta_2 = dx2,
    theta_3 = dx3.  Verified (periods, closure, co-closure) before returning."""
    diag = _diag3_samples(fam, t, n, tol)
    g11 = diag[0]
    theta = np.zeros((3, 3, n), dtype=np.float64)
    theta[0, 0] = g11 / periodic_quad(g11)
    theta[1, 1] = 1.0
    theta[2, 2] = 1.0
    metric = np.zeros((3, 3, n), dtype=np.float64)
    for i in range(3):
        metric[i, i] = diag[i]
    basis = HarmonicBasis(dim=3, theta=theta, metric=metric,
                          cycle_basis=np.eye(3, dtype=int), residuals={})
    period_err = _verify_periods(basis, max(tol, 1e-12))
    closure = _closure_residual(theta, 3)
    coclosure = _coclosure_residual(theta, metric, 3)
    if max(closure, coclosure) > tol:
        raise HodgeError(
            f"harmonicity residual above tolerance: d={closure:.3e}, delta={coclosure:.3e}")
    basis.residuals.update(periods=period_err, closure=closure, coclosure=coclosure)
    return basis


def phi_curve(fam: MetricFamily, t_samples: Sequence, n: int = 256, *,
              check: bool = True, check_tol: float = 1e-10,
              closed_form_tol: float = 1e-10, basis_tol: float = 1e-10) -> PhiCurve:
    """Phi(t) = det Gram(t) for a diagonal x1-only family.

    Also evaluates the closed-form ratio
    int(g^22) int(g^33) / int(g^22 g^33) and insists the quadrature Gram
    agrees; the curve rows carry (int g11, int g^22, int g^33).
    """
    if check:
        report = check_slag_family(fam, n=min(n, 128), nt=max(2, min(9, len(t_samples))),
                                   tol=check_tol)
        if not report.passed():
            raise InadmissibleFamilyError(
                f"family fails the slice conditions: {report.as_dict()}")
    ts = np.asarray(list(t_samples), dtype=np.float64)
    phis = np.empty_like(ts)
    grams = []
    integrals = np.empty((len(ts), 3), dtype=np.float64)
    for k, t in enumerate(ts):
        basis = harmonic_basis_diag3(fam, float(t), n, tol=basis_tol)
        gram = gram_L2(basis)
        grams.append(gram)
        phis[k] = gram.det()
        g11, g22, g33 = basis.metric[0, 0], basis.metric[1, 1], basis.metric[2, 2]
        i11 = float(periodic_quad(g11))
        i22 = float(periodic_quad(1.0 / g22))
        i33 = float(periodic_quad(1.0 / g33))
        cross = float(periodic_quad(1.0 / (g22 * g33)))
        closed = i22 * i33 / cross
        if abs(phis[k] - closed) > closed_form_tol:
            raise HodgeError(
                f"quadrature Gram disagrees with the closed form at t={t}: "
                f"{phis[k]!r} vs {closed!r}")
        integrals[k] = (i11, i22, i33)
    return PhiCurve(t=ts, phi=phis, grams=tuple(grams), integrals=integrals)


# -- general 2D basis ----------------------------------------------------------------


def _sample_2d(fam: MetricFamily, t: float, n: int) -> np.ndarray:
    if fam.dim != 2:
        raise HodgeError("2D basis needs a 2-dimensional family")
    axes = family_axes(fam, n)
    m = fam.sample_matrix(t, axes)
    return _metric_stack(m, 2, (n, n))


def harmonic_basis_2d(fam: MetricFamily, t: float, n: int = 128,
                      tol: float = 1e-8) -> HarmonicBasis:
    """Cycle-normalized harmonic basis for an admissible 2D family with
    det = C(x2):

        theta_1 = [g11 K dx1 + (g12 K - sqrt(C) L) dx2] / (K M),
        theta_2 = sqrt(C)/K dx2,

    with K = int sqrt(C) dx2, L = int g12 dx2, M = int g11 dx1.  The volume
    normalization K = 1 is realized by rescaling C; the applied factor is
    recorded as ``scale`` (the basis and Phi are scale-invariant)."""
    g = _sample_2d(fam, t, n)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    if np.any(det <= 0):
        raise HodgeError("non-positive determinant sample")
    if float(np.max(np.ptp(det, axis=0))) > tol:
        raise HodgeError("determinant depends on x1 (not an admissible 2D family)")
    c = det.mean(axis=0)  # C(x2)
    sqrt_c = np.sqrt(c)[None, :]

    m_per_col = np.asarray(periodic_quad(g[0, 0], axis=0))
    l_per_row = np.asarray(periodic_quad(g[0, 1], axis=1))
    if float(np.ptp(m_per_col)) > tol or float(np.ptp(l_per_row)) > tol:
        raise HodgeError("int g11 dx1 or int g12 dx2 is not constant "
                         "(the dual of d/dx1 is not closed)")
    big_m = float(np.mean(m_per_col))
    big_l = float(np.mean(l_per_row))
    big_k = float(periodic_quad(sqrt_c))

    theta = np.zeros((2, 2, n, n), dtype=np.float64)
    theta[0, 0] = np.broadcast_to(g[0, 0] / big_m, (n, n))
    theta[0, 1] = np.broadcast_to((g[0, 1] * big_k - sqrt_c * big_l) / (big_k * big_m), (n, n))
    theta[1, 1] = np.broadcast_to(sqrt_c / big_k, (n, n))

    basis = HarmonicBasis(dim=2, theta=theta, metric=g,
                          cycle_basis=np.eye(2, dtype=int),
                          scale=1.0 / big_k, residuals={})
    period_err = _verify_periods(basis, tol)
    closure = _closure_residual(theta, 2)
    coclosure = _coclosure_residual(theta, g, 2)
    if max(closure, coclosure) > tol:
        raise HodgeError(
            f"harmonicity residual above tolerance: d={closure:.3e}, delta={coclosure:.3e}")
    basis.residuals.update(periods=period_err, closure=closure, coclosure=coclosure)
    return basis


def phi_2d(fam: MetricFamily, t_samples: Sequence, n: int = 128, *,
           check: bool = True, check_tol: float = 1e-10,
           basis_tol: float = 1e-8) -> PhiCurve:
    """Phi(t) for an admissible 2D family; the 2D algebra predicts Phi == 1.

    Curve rows carry (int g11 dx1, int g12 dx2, int sqrt(C) dx2) in the
    g11_int/g22_int/g33_int columns.
    """
    if check:
        report = check_slag_family(fam, n=min(n, 128), nt=max(2, min(9, len(t_samples))),
                                   tol=check_tol)
        if not report.passed():
            raise InadmissibleFamilyError(
                f"family fails the slice conditions: {report.as_dict()}")
    ts = np.asarray(list(t_samples), dtype=np.float64)
    phis = np.empty_like(ts)
    grams = []
    integrals = np.empty((len(ts), 3), dtype=np.float64)
    for k, t in enumerate(ts):
        basis = harmonic_basis_2d(fam, float(t), n, tol=basis_tol)
        gram = gram_L2(basis)
        grams.append(gram)
        phis[k] = gram.det()
        g = basis.metric
        integrals[k] = (float(periodic_quad(g[0, 0], axis=0).mean()),
                        float(periodic_quad(g[0, 1], axis=1).mean()),
                        1.0 / basis.scale)
    return PhiCurve(t=ts, phi=phis, grams=tuple(grams), integrals=integrals)
