"""Discrete radial Hamiltonian on the half-line grid.

The kinetic energy uses the sinc-basis discrete variable representation
restricted to (0, infinity): with R_i = i*dR,

    T_ij = pref * (-1)^(i-j) * [ pi^2/3 - 1/(2 i^2) ]            (i = j)
    T_ij = pref * (-1)^(i-j) * [ 2/(i-j)^2 - 2/(i+j)^2 ]         (i != j)

with pref = (hbar c)^2 / (2 mu c^2 dR^2).  The matrix is dense, but it is
a Toeplitz-minus-Hankel combination, so its action on a vector can be
evaluated exactly (to rounding) with FFT circulant embeddings in
O(N log N); `apply` uses that path and `matrix` builds the dense array
when a factorization needs it.  Agreement of the two paths is covered by
the unit tests.
"""

from __future__ import annotations

import numpy as np
import scipy.fft as sfft

from .errors import ValidationError
from .grid import GridFunction, RadialGrid
from .potential import PotentialModel, SystemParams, total_potential

#: default safety margin applied to the Gershgorin spectral interval
BOUNDS_MARGIN = 1.05


def kinetic_matrix(grid: RadialGrid, params: SystemParams) -> np.ndarray:
    """Dense half-line DVR kinetic matrix in MeV, shape (N, N)."""
    n = grid.n_points
    pref = params.kinetic_prefactor / grid.delta_r**2
    idx = np.arange(1, n + 1)

    # lookup tables over i-j in [-(n-1), n-1] and i+j in [2, 2n]
    m = np.arange(-(n - 1), n)
    toe = np.where(m == 0, np.pi**2 / 3.0, 2.0 / np.maximum(np.abs(m), 1) ** 2)
    toe *= np.where(m % 2 == 0, 1.0, -1.0)
    s = np.arange(0, 2 * n + 1)
    han = np.zeros_like(s, dtype=float)
    han[2:] = 2.0 / s[2:] ** 2
    han[2:] *= np.where(s[2:] % 2 == 0, 1.0, -1.0)

    out = np.empty((n, n), dtype=float)
    block = max(1, min(n, 8 * 1024 * 1024 // max(n, 1)))
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        rows = idx[lo:hi, None]
        out[lo:hi] = toe[(rows - idx[None, :]) + (n - 1)] - han[rows + idx[None, :]]
    out *= pref
    return out


class DiscreteHamiltonian:
    """H = T + diag(V) acting on values sampled on a RadialGrid."""

    def __init__(self, grid: RadialGrid, params: SystemParams, v_diag: np.ndarray):
        v = np.asarray(v_diag, dtype=float)
        if v.shape != (grid.n_points,):
            raise ValidationError(
                f"potential diagonal shape {v.shape} does not match grid ({grid.n_points},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValidationError("potential diagonal contains non-finite values")
        self.grid = grid
        self.params = params
        self.v_diag = v
        self._kinetic_pref = params.kinetic_prefactor / grid.delta_r**2
        self._fft_kernels = None

    # -- fast exact application -------------------------------------------

    def _build_fft_kernels(self):
        n = self.grid.n_points
        m_len = sfft.next_fast_len(2 * n)
        lag = np.arange(0, n)
        toe = np.where(lag == 0, np.pi**2 / 3.0, 2.0 / np.maximum(lag, 1) ** 2)
        toe *= np.where(lag % 2 == 0, 1.0, -1.0)
        c = np.zeros(m_len)
        c[:n] = toe
        c[m_len - n + 1 :] = toe[1:][::-1]

        s = np.arange(0, 2 * n - 1)
        g = np.zeros(m_len)
        g[: 2 * n - 1] = (2.0 / (s + 2.0) ** 2) * np.where(s % 2 == 0, 1.0, -1.0)

        rev = np.zeros(m_len, dtype=np.intp)
        rev[1:] = np.arange(m_len - 1, 0, -1)
        self._fft_kernels = (m_len, sfft.fft(c), sfft.fft(g), rev)

    def apply_kinetic(self, values: np.ndarray) -> np.ndarray:
        """T @ values via circulant embedding; identical to the dense matrix."""
        if self._fft_kernels is None:
            self._build_fft_kernels()
        m_len, spec_toe, spec_han, rev = self._fft_kernels
        n = self.grid.n_points
        buf = np.zeros(m_len, dtype=complex)
        buf[:n] = values
        f = sfft.fft(buf)
        out = sfft.ifft(spec_toe * f - spec_han * f[rev])[:n]
        if np.isrealobj(values):
            out = out.real
        return self._kinetic_pref * out

    def apply(self, values: np.ndarray) -> np.ndarray:
        """H @ values."""
        return self.apply_kinetic(values) + self.v_diag * values

    def apply_fn(self, fn: GridFunction) -> GridFunction:
        if fn.grid != self.grid:
            raise ValidationError("grid mismatch between Hamiltonian and function")
        return GridFunction(self.grid, self.apply(fn.values))

    def expectation(self, values: np.ndarray) -> float:
        """<psi|H|psi> / <psi|psi> with the dR-weighted inner product."""
        num = np.vdot(values, self.apply(values)).real
        den = np.vdot(values, values).real
        return float(num / den)

    # -- dense representation ----------------------------------------------

    def matrix(self) -> np.ndarray:
        """Dense symmetric H; built on demand (O(N^2) memory, caller-owned)."""
        h = kinetic_matrix(self.grid, self.params)
        h[np.diag_indices_from(h)] += self.v_diag
        return h

    # -- spectral bounds -----------------------------------------------------

    def spectral_bounds(self, margin: float = BOUNDS_MARGIN) -> tuple[float, float]:
        """Rigorous eigenvalue bounds from Gershgorin rows, widened by `margin`.

        The row sums of |T_ij| are evaluated in closed form via cumulative
        sums, so the cost is O(N) and no dense matrix is needed.
        """
        if margin < 1.0:
            raise ValidationError(f"margin must be >= 1, got {margin}")
        n = self.grid.n_points
        i = np.arange(1, n + 1, dtype=float)
        # S[k] = sum_{m=1..k} 1/m^2, k = 0..2n
        s = np.zeros(2 * n + 1)
        s[1:] = np.cumsum(1.0 / np.arange(1, 2 * n + 1, dtype=float) ** 2)
        ii = np.arange(1, n + 1)
        radius = 2.0 * (s[ii - 1] + s[n - ii] - s[ii + n] + s[ii] + 0.25 / i**2)
        radius *= self._kinetic_pref
        t_diag = self._kinetic_pref * (np.pi**2 / 3.0 - 0.5 / i**2)
        diag = t_diag + self.v_diag
        lo = float(np.min(diag - radius))
        hi = float(np.max(diag + radius))
        lo = min(lo, float(np.min(self.v_diag)))
        hi = max(hi, float(np.max(t_diag)) + float(np.max(self.v_diag)))
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return mid - margin * half, mid + margin * half


def build_hamiltonian(
    grid: RadialGrid, params: SystemParams, model: PotentialModel, j: int
) -> DiscreteHamiltonian:
    """Assemble H for partial wave j with the effective potential on the grid."""
    v = np.asarray(total_potential(model, params, j)(grid.points), dtype=float)
    return DiscreteHamiltonian(grid, params, v)
