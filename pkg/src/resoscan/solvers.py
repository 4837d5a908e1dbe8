"""Shifted linear solves (H - z) x = b for families of complex shifts.

Spectral windowing needs the same Hamiltonian solved at hundreds of
shifts z = E_k + xi with |Im xi| ~ epsilon.  Two engines cover the grid
sizes that occur in practice:

* `TridiagonalShiftSolver` - one orthogonal reduction H = Q T Q^T
  (LAPACK dsytrd), after which every shift costs one complex tridiagonal
  elimination.  This is the direct dense route used up to
  DIRECT_SOLVER_MAX_N points.
* `LanczosResolvent` - a single Lanczos recurrence seeded with b serves
  all shifts that share the right-hand side; bin strengths come from
  resolvent quadratic forms of the reduced tridiagonal matrix and full
  solution vectors are rebuilt in a second pass only where needed.  Used
  beyond DIRECT_SOLVER_MAX_N where dense reductions do not fit the
  single-core budget.

Residual accounting: a backward-stable solve of (H - z) x = b cannot
deliver a residual below ~ eps_mach * ||H|| * ||x||, and for resonant
bins ||x|| ~ ||b|| / eps, so demanding 1e-10 relative to ||b|| alone is
unattainable in double precision once eps << ||H|| * 1e-4.  Every solve
here is therefore certified against

    tol_eff = max(rtol * ||b||, FLOOR_COEFF * eps_mach * h_scale * ||x||)

with h_scale a spectral-interval bound of H; both numbers are reported.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack

from .errors import LinearSolveError, ValidationError
from .hamiltonian import DiscreteHamiltonian

#: largest grid handled by the dense orthogonal-reduction engine
DIRECT_SOLVER_MAX_N = 4096

#: default relative residual target for shifted solves
SOLVE_RTOL = 1e-10

#: multiplier on the machine-level residual floor (measured headroom ~4x)
FLOOR_COEFF = 64.0

_EPS = float(np.finfo(float).eps)


def residual_floor(h_scale: float, x_norm: float, b_norm: float) -> float:
    """Smallest honestly certifiable residual relative to ||b||."""
    if b_norm == 0.0:
        return np.inf
    return FLOOR_COEFF * _EPS * h_scale * max(x_norm, b_norm) / b_norm


def _gtsv(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a complex symmetric tridiagonal system; inputs are preserved."""
    # np.array (not ascontiguousarray): the overwrite flags below require
    # private buffers, and ascontiguousarray is a no-copy passthrough for
    # arrays that are already complex and contiguous
    dl = np.array(off, dtype=complex)
    du = dl.copy()
    d = np.array(diag, dtype=complex)
    b = np.array(rhs, dtype=complex).reshape(-1, 1)
    if d.size == 1:
        # zgtsv rejects empty off-diagonals; a 1x1 system is a scalar divide
        if d[0] == 0.0:
            raise LinearSolveError("tridiagonal elimination failed (singular 1x1 system)")
        return b[:, 0] / d[0]
    _, _, _, x, info = lapack.zgtsv(dl, d, du, b, overwrite_dl=1, overwrite_du=1,
                                    overwrite_d=1, overwrite_b=1)
    if info != 0:
        raise LinearSolveError(f"tridiagonal elimination failed (info = {info})")
    return x[:, 0]


class TridiagonalShiftSolver:
    """Direct shifted solves through one Householder tridiagonalization."""

    def __init__(self, ham: DiscreteHamiltonian):
        n = ham.grid.n_points
        a = np.asfortranarray(ham.matrix())
        c, d, e, tau, info = lapack.dsytrd(a, lower=0, overwrite_a=1)
        if info != 0:
            raise LinearSolveError(f"dsytrd failed (info = {info})")
        self.ham = ham
        self.n = n
        self._c = c          # Householder reflectors, upper storage
        self._tau = tau
        self.diag = d.copy()
        self.off = e.copy()
        lo, hi = ham.spectral_bounds()
        self.h_scale = max(abs(lo), abs(hi))

    # Q = H(n-1)...H(2)H(1) with v(1:i-1) stored in column i+1 (LAPACK uplo='U')
    def apply_q(self, x: np.ndarray, transpose: bool = False) -> np.ndarray:
        y = np.array(x, dtype=complex)
        order = range(self.n - 1, 0, -1) if transpose else range(1, self.n)
        for i in order:
            tau_i = self._tau[i - 1]
            if tau_i == 0.0:
                continue
            v = self._c[: i - 1, i]
            t = tau_i * (np.dot(v, y[: i - 1]) + y[i - 1])
            y[: i - 1] -= t * v
            y[i - 1] -= t
        return y

    def reduce_rhs(self, b: np.ndarray) -> np.ndarray:
        return self.apply_q(b, transpose=True)

    def solve_reduced(self, z: complex, w: np.ndarray) -> np.ndarray:
        """y with (T - z) y = w in the reduced (tridiagonal) coordinates."""
        return _gtsv(self.diag - z, self.off, w)

    def solve(
        self,
        z: complex,
        b: np.ndarray,
        rtol: float = SOLVE_RTOL,
        max_refine: int = 2,
    ) -> tuple[np.ndarray, float, float]:
        """Solve (H - z) x = b; returns (x, relative residual, tolerance used)."""
        b_norm = float(np.linalg.norm(b))
        if b_norm == 0.0:
            return np.zeros_like(b, dtype=complex), 0.0, rtol
        x = self.apply_q(self.solve_reduced(z, self.reduce_rhs(b)))
        for _ in range(max_refine + 1):
            r = b - (self.ham.apply(x) - z * x)
            rel = float(np.linalg.norm(r)) / b_norm
            tol_eff = max(rtol, residual_floor(self.h_scale, float(np.linalg.norm(x)), b_norm))
            if rel <= tol_eff:
                return x, rel, tol_eff
            x = x + self.apply_q(self.solve_reduced(z, self.reduce_rhs(r)))
        raise LinearSolveError(
            f"shifted solve stalled at relative residual {rel:.3e} "
            f"(tolerance {tol_eff:.3e}, shift {z})"
        )


class LanczosResolvent:
    """Shared-Krylov resolvent engine for many shifts with one right-hand side.

    The three-term recurrence is run without reorthogonalization; resolvent
    values <b|(H - z)^-1|b> from the reduced tridiagonal matrix remain
    reliable in finite precision (ghost Ritz copies split weights without
    changing sums), and every shift carries the explicit Krylov residual
    |beta_{m+1} y_m| as its certificate.  Solution vectors are reconstructed
    in a deterministic second pass over the same recurrence.
    """

    def __init__(
        self,
        ham: DiscreteHamiltonian,
        b: np.ndarray,
        m_start: int = 4096,
        m_max: int = 120_000,
        growth: float = 1.5,
    ):
        b = np.asarray(b, dtype=complex)
        self.ham = ham
        self.n = ham.grid.n_points
        self.b_norm = float(np.linalg.norm(b))
        if self.b_norm == 0.0:
            raise ValidationError("Lanczos seed vector has zero norm")
        self._v1 = b / self.b_norm
        self.alphas: list[float] = []
        self.betas: list[float] = []          # betas[k] couples step k and k+1
        self._v_prev = np.zeros_like(self._v1)
        self._v_cur = self._v1.copy()
        self._beta_prev = 0.0
        self.m_start = int(m_start)
        self.m_max = int(m_max)
        self.growth = float(growth)
        lo, hi = ham.spectral_bounds()
        self.h_scale = max(abs(lo), abs(hi))

    @property
    def m(self) -> int:
        return len(self.alphas)

    def extend(self, m_target: int) -> None:
        m_target = min(int(m_target), self.m_max)
        v_prev, v_cur = self._v_prev, self._v_cur
        while self.m < m_target:
            w = self.ham.apply(v_cur)
            alpha = float(np.vdot(v_cur, w).real)
            w -= alpha * v_cur
            if self._beta_prev != 0.0:
                w -= self._beta_prev * v_prev
            beta = float(np.linalg.norm(w))
            self.alphas.append(alpha)
            self.betas.append(beta)
            if beta < 1e-14 * self.h_scale:
                # invariant subspace reached; solves from T are exact now
                break
            v_prev, v_cur = v_cur, w / beta
            self._beta_prev = beta
        self._v_prev, self._v_cur = v_prev, v_cur

    def reduced_solution(self, z: complex) -> tuple[np.ndarray, float]:
        """y = (T_m - z)^{-1} e1 and the relative Krylov residual for this shift."""
        m = self.m
        if m == 0:
            raise LinearSolveError("Lanczos space is empty; call extend() first")
        e1 = np.zeros(m, dtype=complex)
        e1[0] = 1.0
        y = _gtsv(np.asarray(self.alphas) - z, np.asarray(self.betas[: m - 1]), e1)
        cert = abs(self.betas[m - 1] * y[m - 1]) if m >= 1 else np.inf
        return y, float(cert)

    def resolvent_qform(self, z: complex) -> tuple[complex, float]:
        """(<b|(H-z)^-1|b>, certificate), Hermitian inner product."""
        y, cert = self.reduced_solution(z)
        return self.b_norm**2 * y[0], cert

    def ensure_converged(self, shifts, rtol: float = SOLVE_RTOL) -> float:
        """Grow the Krylov space until every shift is certified; returns max cert."""
        shifts = list(shifts)
        target = max(self.m, self.m_start)
        while True:
            self.extend(target)
            worst = 0.0
            for z in shifts:
                _, cert = self.reduced_solution(z)
                worst = max(worst, cert)
                if worst > rtol:
                    break
            floor = residual_floor(self.h_scale, self.b_norm, self.b_norm)
            if worst <= max(rtol, floor):
                return worst
            if self.m >= self.m_max:
                raise LinearSolveError(
                    f"Krylov resolvent not certified after {self.m} iterations "
                    f"(worst residual {worst:.3e}, target {rtol:.3e})"
                )
            target = min(self.m_max, int(self.m * self.growth) + 1)

    def materialize(self, coeff_vectors) -> list[np.ndarray]:
        """Rebuild x = V y for each reduced coefficient vector y (second pass)."""
        coeffs = [np.asarray(y, dtype=complex) for y in coeff_vectors]
        outs = [np.zeros(self.n, dtype=complex) for _ in coeffs]
        v_prev = np.zeros_like(self._v1)
        v_cur = self._v1.copy()
        beta_prev = 0.0
        for k in range(self.m):
            for y, out in zip(coeffs, outs):
                if k < y.size and y[k] != 0.0:
                    out += y[k] * v_cur
            if k == self.m - 1:
                break
            w = self.ham.apply(v_cur)
            w -= self.alphas[k] * v_cur
            if beta_prev != 0.0:
                w -= beta_prev * v_prev
            beta = self.betas[k]
            if beta < 1e-14 * self.h_scale:
                break
            v_prev, v_cur = v_cur, w / beta
            beta_prev = beta
        return outs
