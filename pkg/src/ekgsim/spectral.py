"""Periodic-box Fourier representation of scalar fields and the multiplier
calculus used by every other module.

Conventions
-----------
The box is ``[-L/2, L/2)^3`` sampled on ``n`` points per dimension, and a
field is stored through coefficients ``c_m`` such that

    f(x) = sum_m c_m exp(i xi_m . x),      xi_m = 2 pi m / L,

with ``m`` in FFT ordering (``numpy.fft.fftfreq``).  Because the sample
points are centred, forward/inverse transforms carry the alternating phase
``(-1)^(m1+m2+m3)``; the phase is real, so conjugate symmetry of real fields
survives the bookkeeping.  Nyquist planes (``|m_i| = n/2``) are zeroed by
convention, and all operators of negative homogeneity return 0 on the zero
mode.  Nonlinear products are formed pointwise on a 3/2 zero-padded grid and
truncated back (dealiasing), after which Nyquist planes are zeroed again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _smoothstep(u):
    """C-infinity monotone bridge: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        b = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return a / (a + b)


def bump_profile(r):
    """Radial cutoff profile: 1 on [0, 5/4], 0 beyond 8/5, smooth monotone.

    Generating function of the dyadic shell partition; shells are differences
    of two dilates and therefore resum exactly.
    """
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 - _smoothstep((r - 1.25) / (1.6 - 1.25))


def shell_weight(r, k: int):
    """Dyadic shell weight at scale 2**k (supported in |r| ~ 2**k)."""
    return bump_profile(r / 2.0**k) - bump_profile(r / 2.0 ** (k - 1))


def low_weight(r, b: float):
    """Cumulative cutoff phi_{<=b}: equal to 1 for |r| <= (5/4) 2**b
    (including r = 0) and 0 beyond (8/5) 2**b."""
    return bump_profile(np.asarray(r, dtype=float) / 2.0**b)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)  # map to [0, 1]
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def graded_magnitude(r):
    """Smooth increasing radial function equal to r for r <= 1/2 and to 1
    for r >= 3/2 (hence for r >= 2).

    Documented convention of this package: the antiderivative of the
    C-infinity step ``w(t) = 1 - smoothstep(t - 1/2)``, which is exactly r
    below 1/2, saturates at exactly 1 from 3/2 on, and is monotone because
    the integrand is nonnegative.  Evaluated by 48-point Gauss-Legendre
    quadrature (machine precision for this analytic integrand).
    """
    r = np.asarray(r, dtype=float)
    y = np.clip(r, 0.5, 1.5)
    span = y - 0.5
    t = 0.5 + span[..., None] * _GL_NODES  # quadrature nodes in [1/2, y]
    integral = span * np.sum(_GL_WEIGHTS * (1.0 - _smoothstep(t - 0.5)), axis=-1)
    return np.where(r <= 0.5, r, np.minimum(0.5 + integral, 1.0))


class Grid:
    """Uniform periodic grid with precomputed frequency geometry.

    Parameters
    ----------
    n : int
        Points per dimension; must be even and >= 8.
    length : float
        Box period L (geometric units, c = 1).
    dt : float
        Default time step carried along for stepper configuration.
    """

    def __init__(self, n: int, length: float, dt: float = 0.1):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got {n}")
        if length <= 0 or dt <= 0:
            raise ValueError("box length and dt must be positive")
        self.n = int(n)
        self.length = float(length)
        self.dt = float(dt)
        self.shape = (self.n, self.n, self.n)
        self.dx = self.length / self.n
        self.cell_volume = self.dx**3
        self.volume = self.length**3

        m = np.fft.fftfreq(self.n, d=1.0 / self.n)
        k1 = 2.0 * np.pi * m / self.length
        self.modes = m.astype(int)
        ones = np.ones(self.shape)
        self.xi = [
            k1.reshape(-1, 1, 1) * ones,
            k1.reshape(1, -1, 1) * ones,
            k1.reshape(1, 1, -1) * ones,
        ]
        self.xi_sq = self.xi[0] ** 2 + self.xi[1] ** 2 + self.xi[2] ** 2
        self.xi_abs = np.sqrt(self.xi_sq)
        self.lam_wa = self.xi_abs
        self.lam_kg = np.sqrt(1.0 + self.xi_sq)
        with np.errstate(divide="ignore"):
            inv = 1.0 / self.xi_abs
        inv[0, 0, 0] = 0.0
        self.xi_abs_inv = inv

        nyq = np.abs(m) == self.n // 2
        self.nyquist_mask = (
            nyq.reshape(-1, 1, 1) | nyq.reshape(1, -1, 1) | nyq.reshape(1, 1, -1)
        )
        alt = (-1.0) ** np.abs(m)
        self._phase = (
            alt.reshape(-1, 1, 1) * alt.reshape(1, -1, 1) * alt.reshape(1, 1, -1)
        )

        x1 = -self.length / 2.0 + self.dx * np.arange(self.n)
        self.x = [
            x1.reshape(-1, 1, 1) * ones,
            x1.reshape(1, -1, 1) * ones,
            x1.reshape(1, 1, -1) * ones,
        ]
        self.r = np.sqrt(self.x[0] ** 2 + self.x[1] ** 2 + self.x[2] ** 2)

        npad = int(math.ceil(1.5 * self.n))
        npad += npad % 2
        self.n_pad = npad
        self._pad = None
        self._flip_index = (-np.arange(self.n)) % self.n

    # ------------------------------------------------------------------
    # transforms
    # ------------------------------------------------------------------
    def forward(self, values) -> np.ndarray:
        """Sample array on the centred grid -> coefficient array."""
        values = np.asarray(values)
        if values.shape[-3:] != self.shape:
            raise ValueError(f"shape {values.shape} does not match grid {self.shape}")
        c = np.fft.fftn(values, axes=(-3, -2, -1)) * (self._phase / self.n**3)
        return self.zero_nyquist(c)

    def inverse(self, coeffs) -> np.ndarray:
        """Coefficient array -> complex samples on the centred grid."""
        coeffs = np.asarray(coeffs, dtype=complex)
        return np.fft.ifftn(coeffs * self._phase, axes=(-3, -2, -1)) * self.n**3

    def zero_nyquist(self, coeffs) -> np.ndarray:
        coeffs = np.array(coeffs, copy=True)
        coeffs[..., self.nyquist_mask] = 0.0
        return coeffs

    # ------------------------------------------------------------------
    # padded (dealiased) product machinery
    # ------------------------------------------------------------------
    @property
    def pad_grid(self) -> "Grid":
        if self._pad is None:
            self._pad = Grid(self.n_pad, self.length, self.dt)
        return self._pad

    def embed(self, coeffs) -> np.ndarray:
        """Embed an n-grid spectrum into the padded-grid spectrum."""
        pg = self.pad_grid
        big = np.zeros(np.shape(coeffs)[:-3] + pg.shape, dtype=complex)
        h = self.n // 2
        sl = (slice(0, h), slice(-h, None))
        for a in sl:
            for b in sl:
                for c in sl:
                    big[..., a, b, c] = np.asarray(coeffs)[..., a, b, c]
        return big

    def extract(self, big) -> np.ndarray:
        h = self.n // 2
        out = np.zeros(np.shape(big)[:-3] + self.shape, dtype=complex)
        sl = (slice(0, h), slice(-h, None))
        for a in sl:
            for b in sl:
                for c in sl:
                    out[..., a, b, c] = np.asarray(big)[..., a, b, c]
        return out

    def pad_values(self, coeffs) -> np.ndarray:
        """Physical samples of a spectrum on the 3/2-padded grid."""
        return self.pad_grid.inverse(self.embed(coeffs))

    def unpad_forward(self, values) -> np.ndarray:
        """Forward transform of padded-grid samples, truncated to this grid."""
        big = self.pad_grid.forward(values)
        return self.zero_nyquist(self.extract(big))

    def product(self, *coeff_arrays) -> np.ndarray:
        """Dealiased pointwise product of spectra (3/2 rule + Nyquist zero)."""
        vals = self.pad_values(coeff_arrays[0])
        for c in coeff_arrays[1:]:
            vals = vals * self.pad_values(c)
        return self.unpad_forward(vals)

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------
    def conj_flip(self, coeffs) -> np.ndarray:
        """conj(c(-m)); equals c(m) iff the field is real."""
        f = self._flip_index
        c = np.asarray(coeffs)
        return np.conj(c[..., f, :, :][..., :, f, :][..., :, :, f])

    def l2_norm_sq(self, coeffs) -> float:
        """Parseval value of int |f|^2 dx over the box."""
        return float(np.sum(np.abs(coeffs) ** 2).real * self.volume)

    def integral(self, values) -> float:
        """Exact quadrature of periodic grid samples."""
        return float(np.sum(values).real * self.cell_volume)

    def wrap_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        half = self.length / 2.0
        return (pts + half) % self.length - half

    def evaluate_coeffs_at(self, coeffs, pts) -> np.ndarray:
        """Band-limited evaluation by direct Fourier sum.

        ``coeffs`` may carry leading stack dimensions; the mode contraction
        is factorised per axis so the cost per point and field is
        O(n^3 + n^2 + n) multiply-adds instead of n^3 exponentials.
        """
        pts = self.wrap_points(pts)
        k1 = 2.0 * np.pi * self.modes / self.length
        e1 = np.exp(1j * np.outer(pts[:, 0], k1))
        e2 = np.exp(1j * np.outer(pts[:, 1], k1))
        e3 = np.exp(1j * np.outer(pts[:, 2], k1))
        c = np.asarray(coeffs, dtype=complex)
        lead = c.shape[:-3]
        c = c.reshape((-1,) + self.shape)
        out = np.empty((c.shape[0], pts.shape[0]), dtype=complex)
        chunk = max(1, int(4e6 // (c.shape[0] * self.n * self.n + 1)))
        for i in range(0, pts.shape[0], chunk):
            sl = slice(i, min(i + chunk, pts.shape[0]))
            t = np.einsum("fabc,pc->fabp", c, e3[sl], optimize=True)
            t = np.einsum("fabp,pb->fap", t, e2[sl], optimize=True)
            out[:, sl] = np.einsum("fap,pa->fp", t, e1[sl], optimize=True)
        return out.reshape(lead + (pts.shape[0],))

    def shell_range(self) -> range:
        """Dyadic indices k whose frequency shell meets the lattice."""
        xi_min = 2.0 * np.pi / self.length
        xi_max = float(np.max(self.xi_abs))
        kmin = int(math.floor(math.log2(xi_min))) - 1
        kmax = int(math.ceil(math.log2(xi_max))) + 1
        return range(kmin, kmax + 1)

    def spatial_shell_range(self) -> range:
        rmax = math.sqrt(3.0) * self.length / 2.0
        return range(0, int(math.ceil(math.log2(rmax))) + 2)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.n == other.n
            and self.length == other.length
        )

    def __hash__(self):
        return hash((self.n, self.length))


@dataclass
class SpectralScalar:
    """A complex scalar field on the periodic grid, stored spectrally."""

    grid: Grid
    coeffs: np.ndarray
    is_real: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError("coefficient array does not match the grid")

    @classmethod
    def from_values(cls, grid: Grid, values, real=None) -> "SpectralScalar":
        values = np.asarray(values)
        if real is None:
            real = not np.iscomplexobj(values) or bool(
                np.allclose(values.imag, 0.0, atol=1e-13)
            )
        return cls(grid, grid.forward(values), is_real=real)

    @classmethod
    def zeros(cls, grid: Grid, real: bool = True) -> "SpectralScalar":
        return cls(grid, np.zeros(grid.shape, dtype=complex), is_real=real)

    def values(self) -> np.ndarray:
        v = self.grid.inverse(self.coeffs)
        return v.real if self.is_real else v

    def copy(self) -> "SpectralScalar":
        return SpectralScalar(self.grid, self.coeffs.copy(), self.is_real)

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.l2_norm_sq(self.coeffs))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values())))

    def zero_mode(self) -> complex:
        return complex(self.coeffs[0, 0, 0])

    def reality_defect(self) -> float:
        """Max deviation from the conjugate symmetry c(-m) = conj(c(m))."""
        return float(np.max(np.abs(self.coeffs - self.grid.conj_flip(self.coeffs))))

    def at_points(self, pts) -> np.ndarray:
        return self.grid.evaluate_coeffs_at(self.coeffs, pts)

    def __add__(self, other):
        return SpectralScalar(
            self.grid, self.coeffs + other.coeffs, self.is_real and other.is_real
        )

    def __sub__(self, other):
        return SpectralScalar(
            self.grid, self.coeffs - other.coeffs, self.is_real and other.is_real
        )

    def __mul__(self, scalar):
        real = self.is_real and not np.iscomplexobj(np.asarray(scalar))
        return SpectralScalar(self.grid, self.coeffs * scalar, real)

    __rmul__ = __mul__


@dataclass(eq=False)
class Multiplier:
    """A Fourier multiplier: pointwise symbol on the frequency lattice.

    ``preserves_real`` records whether the symbol is Hermitian
    (conj(sym(-xi)) == sym(xi)), in which case real-tagged fields stay real.
    """

    kind: str
    symbol: np.ndarray
    preserves_real: bool


def _make(grid: Grid, kind: str, sym) -> Multiplier:
    # Nyquist planes carry no data by convention; zeroing the symbol there
    # keeps odd symbols (derivatives, Riesz) honestly Hermitian.
    sym = grid.zero_nyquist(np.asarray(sym, dtype=complex))
    hermitian = bool(np.allclose(grid.conj_flip(sym), sym, atol=1e-14))
    return Multiplier(kind, sym, hermitian)


def riesz(grid: Grid, j: int) -> Multiplier:
    """R_j = |grad|^{-1} d_j, symbol i xi_j / |xi| (0 at the zero mode)."""
    return _make(grid, f"riesz_{j}", 1j * grid.xi[j] * grid.xi_abs_inv)


def derivative(grid: Grid, j: int) -> Multiplier:
    return _make(grid, f"d_{j}", 1j * grid.xi[j])


def lambda_wa(grid: Grid) -> Multiplier:
    """Half-wave symbol |xi|."""
    return _make(grid, "lambda_wa", grid.lam_wa)


def lambda_kg(grid: Grid) -> Multiplier:
    """Klein-Gordon symbol sqrt(1 + |xi|^2)."""
    return _make(grid, "lambda_kg", grid.lam_kg)


def inverse_gradient(grid: Grid, power: float = 1.0) -> Multiplier:
    """|grad|^{-power} with the zero-mode-to-zero convention."""
    with np.errstate(divide="ignore"):
        sym = grid.xi_abs ** (-float(power))
    sym[0, 0, 0] = 0.0
    return _make(grid, f"inverse_gradient^{power}", sym)


def fractional_gradient(grid: Grid, power: float) -> Multiplier:
    """|grad|^{power}; negative powers send the zero mode to zero."""
    if power < 0:
        return inverse_gradient(grid, -power)
    sym = np.ones(grid.shape) if power == 0 else grid.xi_abs ** float(power)
    return _make(grid, f"|grad|^{power}", sym)


def lp_shell(grid: Grid, k: int) -> Multiplier:
    return _make(grid, f"lp_shell({k})", shell_weight(grid.xi_abs, k))


def low_pass(grid: Grid, b: float) -> Multiplier:
    """Cumulative cutoff phi_{<=b} on the frequency side."""
    return _make(grid, f"low_pass({b})", low_weight(grid.xi_abs, b))


def smooth_low(grid: Grid, gamma: float) -> Multiplier:
    """(graded magnitude of xi)^gamma; saturates at 1 for |xi| >= 2."""
    return _make(grid, f"smooth_low^{gamma}", graded_magnitude(grid.xi_abs) ** gamma)


def sobolev_weight(grid: Grid, order: float) -> Multiplier:
    return _make(grid, f"<grad>^{order}", grid.lam_kg ** float(order))


def apply_multiplier(f: SpectralScalar, m: Multiplier) -> SpectralScalar:
    return SpectralScalar(f.grid, f.coeffs * m.symbol, f.is_real and m.preserves_real)


def forward_transform(grid: Grid, values, real=None) -> SpectralScalar:
    """Spatial samples -> SpectralScalar (shape-checked, invertible)."""
    return SpectralScalar.from_values(grid, values, real=real)


def evaluate_at_points(f: SpectralScalar, pts) -> np.ndarray:
    """Exact band-limited evaluation at arbitrary points (wrapped into the
    box)."""
    return f.at_points(pts)


def lp_project(f: SpectralScalar, k: int) -> SpectralScalar:
    return apply_multiplier(f, lp_shell(f.grid, k))


def qjk_project(f: SpectralScalar, j: int, k: int) -> SpectralScalar:
    """Frequency shell k further localised to the spatial dyadic shell j.

    Requires j >= 0 and k + j >= 0 (uncertainty principle).  For fixed k the
    spatial cutoffs telescope, so summing over admissible j recovers the
    frequency projection exactly on the grid.
    """
    if j < 0 or k + j < 0:
        raise ValueError(f"(k, j) = ({k}, {j}) outside the admissible index set")
    g = f.grid
    pk = lp_project(f, k)
    if k + j == 0 and k <= 0:
        cut = low_weight(g.r, -k)
    elif j == 0 and k >= 0:
        cut = low_weight(g.r, 0)
    else:
        cut = shell_weight(g.r, j)
    return SpectralScalar(g, g.forward(pk.values() * cut), f.is_real)
