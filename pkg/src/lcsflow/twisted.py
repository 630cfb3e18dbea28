"""Twisted exterior calculus and Hodge theory for locally conformally
symplectic (lcs) forms on flat tori.

Conventions.  The Lee form theta is a closed 1-form; the twisted
differential is

    d_theta b = d b - theta ^ b,

its formal L2 adjoint on the flat torus is d_theta* = d* - i_{theta#}, and
Delta_theta = d_theta d_theta* + d_theta* d_theta.  A nondegenerate 2-form
omega is lcs when d omega = theta ^ omega; rescaling omega -> f*omega moves
theta to theta + d ln f, which is the gauge freedom everything here is
organized around.  For constant theta the whole calculus diagonalizes over
Fourier modes m with multiplier mu_j(m) = 2*pi*i*m_j - c_j, and
Delta_theta acts as |mu(m)|^2 * Id, so harmonic means mu(m) = 0 exactly.
The metric is the flat one throughout; there is no metric parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .forms import (
    DegreeError,
    DiffForm,
    GridSpec,
    index_sets,
    insert_sign,
    wedge,
    contract,
    ext_d,
    scalar_form,
)


class DegenerateForm(ValueError):
    """2-form fails the pointwise nondegeneracy margin."""


class NotLcs(ValueError):
    """No closed Lee form reproduces d omega within tolerance."""


class NotClosed(ValueError):
    """A 1-form expected to be closed is not."""


class NonConstantLee(ValueError):
    """Operation requires a constant (harmonic) Lee form."""


class NonPositiveFunction(ValueError):
    """Conformal factor must be strictly positive."""


HARMONIC_SNAP = 1e-12  # |c_j| below this is treated as exactly zero


# -- Lee forms ------------------------------------------------------------


@dataclass
class LeeForm:
    """Closed 1-form split as harmonic constants + d(potential).

    harmonic: length-n array of constant coefficients (exact zeros are
    meaningful: they decide which Fourier modes are mu-harmonic).
    potential: mean-zero scalar grid field g with theta = harmonic + dg.
    """

    grid: GridSpec
    harmonic: np.ndarray
    potential: np.ndarray
    closedness_residual: float = 0.0

    @classmethod
    def constant(cls, grid: GridSpec, coeffs) -> "LeeForm":
        c = np.zeros(grid.n)
        c[:] = np.asarray(coeffs, dtype=float)
        return cls(grid, c, np.zeros(grid.shape))

    @classmethod
    def zero(cls, grid: GridSpec) -> "LeeForm":
        return cls.constant(grid, np.zeros(grid.n))

    @property
    def is_constant(self) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.harmonic))))
        return float(np.max(np.abs(self.potential))) <= 1e-12 * scale

    @property
    def is_zero(self) -> bool:
        return self.is_constant and not self.harmonic.any()

    def one_form(self) -> DiffForm:
        """theta = harmonic + d(potential) as a degree-1 form."""
        out = ext_d(scalar_form(self.grid, self.potential))
        out.comps += self.harmonic[:, None].reshape((self.grid.n,) + (1,) * self.grid.n)
        return out


def _as_theta(theta, grid: GridSpec):
    """Normalize a Lee-form argument to (constant_coeffs or None, 1-form)."""
    if isinstance(theta, LeeForm):
        if theta.grid != grid:
            raise ValueError("Lee form on a different grid")
        if theta.is_constant:
            return theta.harmonic, None
        return None, theta.one_form()
    if isinstance(theta, DiffForm):
        if theta.degree != 1:
            raise DegreeError("Lee form must have degree 1")
        return None, theta
    c = np.asarray(theta, dtype=float)
    if c.shape != (grid.n,):
        raise ValueError(f"constant Lee form needs {grid.n} coefficients")
    return c, None


def _wedge_const(c: np.ndarray, a: DiffForm) -> DiffForm:
    """(sum_j c_j dx_j) ^ a for constant coefficients — exact, no FFT."""
    grid = a.grid
    if a.degree >= grid.n:
        raise DegreeError("wedge with top-degree form")
    out_sets = index_sets(grid.n, a.degree + 1)
    out = DiffForm(grid, a.degree + 1)
    for idx, s in enumerate(a.index_set_list):
        for j in range(grid.n):
            if j in s or c[j] == 0.0:
                continue
            sign, target = insert_sign(j, s)
            out.comps[out_sets.index(target)] += sign * c[j] * a.comps[idx]
    return out


def _contract_const(c: np.ndarray, a: DiffForm) -> DiffForm:
    """i_V a for the constant vector field V with components c — exact."""
    grid = a.grid
    if a.degree == 0:
        raise DegreeError("cannot contract a scalar field")
    out_sets = index_sets(grid.n, a.degree - 1)
    out = DiffForm(grid, a.degree - 1)
    for idx, s in enumerate(a.index_set_list):
        for pos, j in enumerate(s):
            if c[j] == 0.0:
                continue
            target = s[:pos] + s[pos + 1 :]
            out.comps[out_sets.index(target)] += ((-1) ** pos) * c[j] * a.comps[idx]
    return out


# -- twisted differential, adjoint, Laplacian ----------------------------


def d_theta(a: DiffForm, theta) -> DiffForm:
    """Twisted differential d_theta a = da - theta ^ a."""
    c, one_form = _as_theta(theta, a.grid)
    da = ext_d(a)
    if one_form is None:
        return da - _wedge_const(c, a)
    return da - wedge(one_form, a)


def codifferential(a: DiffForm) -> DiffForm:
    """Untwisted d*, spectral (exact adjoint of the discrete d)."""
    grid = a.grid
    if a.degree == 0:
        raise DegreeError("d* of a scalar field")
    out_sets = index_sets(grid.n, a.degree - 1)
    spec = a.spectra()
    out_spec = np.zeros((comb(grid.n, a.degree - 1),) + grid.shape, dtype=complex)
    for t_idx, t in enumerate(index_sets(grid.n, a.degree - 1)):
        for j in range(grid.n):
            if j in t:
                continue
            sign, src = insert_sign(j, t)
            src_idx = a.index_set_list.index(src)
            out_spec[t_idx] += sign * np.conj(grid.derivative_multiplier(j)) * spec[src_idx]
    return DiffForm.from_spectra(grid, a.degree - 1, out_spec)


def d_theta_star(a: DiffForm, theta) -> DiffForm:
    """Adjoint of d_theta: d_theta* = d* - i_{theta#}."""
    c, one_form = _as_theta(theta, a.grid)
    da = codifferential(a)
    if one_form is None:
        return da - _contract_const(c, a)
    return da - contract(one_form, a)


def laplacian_theta(a: DiffForm, theta) -> DiffForm:
    """Twisted Laplacian d_theta d_theta* + d_theta* d_theta."""
    grid = a.grid
    out = DiffForm(grid, a.degree)
    if a.degree < grid.n:
        out = out + d_theta_star(d_theta(a, theta), theta)
    if a.degree > 0:
        out = out + d_theta(d_theta_star(a, theta), theta)
    return out


# -- splitting closed 1-forms --------------------------------------------


def split_harmonic_exact(theta: DiffForm, tol: float = 1e-8):
    """Split a closed 1-form as harmonic constants + d(potential).

    Returns (c, g, residual) where c is the length-n harmonic part (entries
    |c_j| <= 1e-12 snapped to exact 0.0 so they are usable as exact-zero
    tests downstream), g the mean-zero potential, and residual the
    reconstruction defect ||theta - c - dg|| / max(||theta||, eps).

    Raises NotClosed when ||d theta|| / ||theta|| exceeds tol.
    """
    grid = theta.grid
    if theta.degree != 1:
        raise DegreeError("split expects a 1-form")
    nrm = theta.norm()
    if nrm > 0:
        closed_defect = ext_d(theta).norm() / nrm
        if closed_defect > tol:
            raise NotClosed(f"d theta residual {closed_defect:.3e} > {tol:.1e}")
    c = np.array([float(np.mean(comp)) for comp in theta.comps])
    c[np.abs(c) <= HARMONIC_SNAP] = 0.0
    spec = theta.spectra()
    k2 = np.zeros(grid.shape)
    g_spec = np.zeros(grid.shape, dtype=complex)
    for j in range(grid.n):
        mult = grid.derivative_multiplier(j)
        k2 = k2 + np.abs(mult) ** 2
        g_spec += np.conj(mult) * spec[j]
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    from scipy import fft as sfft

    g = sfft.ifftn(g_spec * inv).real
    g -= g.mean()
    recon = ext_d(scalar_form(grid, g))
    recon.comps += c.reshape((grid.n,) + (1,) * grid.n)
    residual = (theta - recon).norm() / max(nrm, 1e-300)
    return c, g, residual


# -- Lee form extraction and lcs validation ------------------------------


def pfaffian_values(omega: DiffForm) -> np.ndarray:
    """Pointwise Pfaffian of a 2-form (n = 2 or 4)."""
    grid = omega.grid
    if omega.degree != 2:
        raise DegreeError("Pfaffian of a non-2-form")
    if grid.n == 2:
        return omega.comps[0].copy()
    if grid.n == 4:
        c = omega.comps  # order: 01, 02, 03, 12, 13, 23
        return c[0] * c[5] - c[1] * c[4] + c[2] * c[3]
    raise DegenerateForm(f"no nondegenerate 2-forms on T^{grid.n} (odd dimension)")


def lee_form(omega: DiffForm, nondeg_threshold: float = 1e-8, lcs_tol: float = 1e-8):
    """Extract the Lee form of a nondegenerate 2-form.

    Solves theta ^ omega = d omega pointwise in the least-squares sense
    (C(n,3) equations in n unknowns; on T^2 there are none and theta = 0).
    Returns (LeeForm, diagnostics) with diagnostics keys lcs_residual and
    nondeg_margin.  Raises DegenerateForm / NotLcs.
    """
    grid = omega.grid
    if omega.degree != 2:
        raise DegreeError("Lee form extraction expects a 2-form")
    pf = pfaffian_values(omega)
    margin = float(np.min(np.abs(pf)))
    if margin < nondeg_threshold:
        raise DegenerateForm(
            f"Pfaffian margin {margin:.3e} below threshold {nondeg_threshold:.1e}"
        )
    two_sets = index_sets(grid.n, 2)
    triples = index_sets(grid.n, 3)
    if not triples:
        theta_field = DiffForm(grid, 1)
        lcs_residual = 0.0
    else:
        domega = ext_d(omega)
        npts = grid.num_nodes
        M = np.zeros((npts, len(triples), grid.n))
        for ti, tr in enumerate(triples):
            for pos, j in enumerate(tr):
                rest = tr[:pos] + tr[pos + 1 :]
                coeff = omega.comps[two_sets.index(rest)].reshape(-1)
                M[:, ti, j] = ((-1) ** pos) * coeff
        b = domega.comps.reshape(len(triples), -1).T[:, :, None]
        mtm = np.einsum("pij,pik->pjk", M, M)
        mtb = np.einsum("pij,pik->pjk", M, b)
        theta_flat = np.linalg.solve(mtm, mtb)[:, :, 0]
        theta_field = DiffForm(
            grid, 1, theta_flat.T.reshape((grid.n,) + grid.shape).copy()
        )
        defect = (domega - wedge(theta_field, omega)).norm()
        lcs_residual = defect / max(omega.norm(), 1e-300)
        if lcs_residual > lcs_tol:
            raise NotLcs(f"lcs residual {lcs_residual:.3e} > {lcs_tol:.1e}")
    c, g, _ = split_harmonic_exact(theta_field, tol=max(lcs_tol, 1e-8))
    closed_defect = 0.0
    if theta_field.norm() > 0:
        closed_defect = ext_d(theta_field).norm() / theta_field.norm()
    lee = LeeForm(grid, c, g, closedness_residual=closed_defect)
    return lee, {"lcs_residual": lcs_residual, "nondeg_margin": margin}


@dataclass
class LcsForm:
    """A validated lcs pair (omega, theta) with extraction diagnostics."""

    omega: DiffForm
    lee: LeeForm
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> GridSpec:
        return self.omega.grid


def validate_lcs(
    omega: DiffForm, nondeg_threshold: float = 1e-8, lcs_tol: float = 1e-8
) -> LcsForm:
    """Extract and check the Lee form; package the certified pair."""
    lee, diag = lee_form(omega, nondeg_threshold=nondeg_threshold, lcs_tol=lcs_tol)
    return LcsForm(omega, lee, diag)


def conformal_rescale(L: LcsForm, f_values, lcs_tol: float = 1e-8) -> LcsForm:
    """Rescale omega -> f*omega (f > 0); Lee form becomes theta + d ln f."""
    f = np.broadcast_to(np.asarray(f_values, dtype=float), L.grid.shape)
    fmin = float(np.min(f))
    if fmin <= 0.0:
        raise NonPositiveFunction(f"conformal factor min {fmin:.3e} <= 0")
    new_omega = wedge(scalar_form(L.grid, f), L.omega)
    return validate_lcs(new_omega, lcs_tol=lcs_tol)


def gauge_normalize(L: LcsForm, lcs_tol: float = 1e-8):
    """Rescale by e^{-g} so the Lee form becomes its harmonic part.

    Returns (normalized LcsForm, f_values) with f = e^{-g}.  A form whose
    Lee form is already constant is returned unchanged with f identically 1.
    """
    if L.lee.is_constant:
        return L, np.ones(L.grid.shape)
    f = np.exp(-L.lee.potential)
    out = conformal_rescale(L, f, lcs_tol=lcs_tol)
    return out, f


# -- per-mode Hodge solver (constant Lee form) ---------------------------


def _require_constant(theta, grid: GridSpec) -> np.ndarray:
    if isinstance(theta, LeeForm):
        if not theta.is_constant:
            raise NonConstantLee(
                "per-mode Hodge operations need a constant Lee form; "
                "gauge_normalize first"
            )
        c = theta.harmonic.astype(float).copy()
    else:
        c = np.asarray(theta, dtype=float).copy()
        if c.shape != (grid.n,):
            raise ValueError(f"need {grid.n} constant coefficients")
    c[np.abs(c) <= HARMONIC_SNAP] = 0.0
    return c


class _ModeOps:
    """Vectorized per-mode wedge/contraction by mu(m) = 2*pi*i*m - c."""

    def __init__(self, grid: GridSpec, c: np.ndarray):
        self.grid = grid
        # true modes here: the Nyquist bucket is a genuine nonzero mode for
        # the harmonic test mu(m) = 0, unlike in the (real-symmetric) d
        self.mu = [grid.true_multiplier(j) - c[j] for j in range(grid.n)]
        mu2 = np.zeros(grid.shape)
        for m in self.mu:
            mu2 = mu2 + np.abs(np.broadcast_to(m, grid.shape)) ** 2
        self.mu2 = mu2
        self.harmonic_mask = mu2 == 0.0
        inv = np.zeros(grid.shape)
        nz = ~self.harmonic_mask
        inv[nz] = 1.0 / mu2[nz]
        self.inv = inv

    def wedge_mu(self, spec: np.ndarray, degree: int) -> np.ndarray:
        grid = self.grid
        out_sets = index_sets(grid.n, degree + 1)
        out = np.zeros((comb(grid.n, degree + 1),) + grid.shape, dtype=complex)
        for idx, s in enumerate(index_sets(grid.n, degree)):
            for j in range(grid.n):
                if j in s:
                    continue
                sign, target = insert_sign(j, s)
                out[out_sets.index(target)] += sign * self.mu[j] * spec[idx]
        return out

    def contract_mubar(self, spec: np.ndarray, degree: int) -> np.ndarray:
        grid = self.grid
        out_sets = index_sets(grid.n, degree - 1)
        src_sets = index_sets(grid.n, degree)
        out = np.zeros((comb(grid.n, degree - 1),) + grid.shape, dtype=complex)
        for t_idx, t in enumerate(out_sets):
            for j in range(grid.n):
                if j in t:
                    continue
                sign, src = insert_sign(j, t)
                out[t_idx] += sign * np.conj(self.mu[j]) * spec[src_sets.index(src)]
        return out


def _spec_norm(spec: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(np.abs(spec) ** 2))) / grid.num_nodes


@dataclass
class HodgeSolveResult:
    """Primitive alpha with d_theta alpha ~ target, plus residual data."""

    primitive: DiffForm
    residual: float
    harmonic_part_norm: float


def hodge_decompose(a: DiffForm, theta) -> tuple[DiffForm, DiffForm, DiffForm]:
    """Orthogonal splitting a = harmonic + d_theta(exact) + d_theta*(coexact).

    Constant Lee forms only; the three summands are returned as forms of
    the same degree as a (the middle one lies in im d_theta, the last in
    im d_theta*).
    """
    grid = a.grid
    c = _require_constant(theta, grid)
    ops = _ModeOps(grid, c)
    spec = a.spectra()
    k = a.degree
    harmonic = spec * ops.harmonic_mask
    exact = np.zeros_like(spec)
    coexact = np.zeros_like(spec)
    if k > 0:
        exact = ops.wedge_mu(ops.contract_mubar(spec, k) * ops.inv, k - 1)
    if k < grid.n:
        coexact = ops.contract_mubar(ops.wedge_mu(spec, k) * ops.inv, k + 1)
    return (
        DiffForm.from_spectra(grid, k, harmonic),
        DiffForm.from_spectra(grid, k, exact),
        DiffForm.from_spectra(grid, k, coexact),
    )


def solve_primitive(target: DiffForm, theta) -> HodgeSolveResult:
    """Unique primitive alpha in im d_theta* with d_theta alpha = target.

    Per Fourier mode: alpha^(m) = i_{conj mu(m)} target^(m) / |mu(m)|^2,
    zero on harmonic modes.  residual is ||d_theta alpha - target|| /
    ||target|| and harmonic_part_norm is the (absolute) norm of the
    harmonic component, i.e. the obstruction to exactness.
    """
    grid = target.grid
    if target.degree == 0:
        raise DegreeError("a 0-form has no primitive")
    c = _require_constant(theta, grid)
    ops = _ModeOps(grid, c)
    k = target.degree
    t_spec = target.spectra()
    alpha_spec = ops.contract_mubar(t_spec, k) * ops.inv
    alpha = DiffForm.from_spectra(grid, k - 1, alpha_spec)
    recon = ops.wedge_mu(alpha_spec, k - 1)
    t_norm = _spec_norm(t_spec, grid)
    residual = _spec_norm(recon - t_spec, grid) / max(t_norm, 1e-300)
    harm = _spec_norm(t_spec * ops.harmonic_mask, grid)
    return HodgeSolveResult(alpha, residual, harm)


def torus_twisted_betti(theta, grid: GridSpec) -> tuple[int, ...]:
    """Twisted Betti numbers of T^n for a constant Lee form.

    Counted from the per-mode Koszul complex: a mode contributes C(n, k)
    to degree k iff mu(m) = 0 exactly, which happens only for m = 0 and
    theta = 0; any nonzero constant Lee form kills all cohomology.
    """
    c = _require_constant(theta, grid)
    ops = _ModeOps(grid, c)
    h = int(np.count_nonzero(ops.harmonic_mask))
    return tuple(comb(grid.n, k) * h for k in range(grid.n + 1))
