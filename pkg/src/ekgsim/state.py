"""Evolution state in normalized complex variables and the stored run
history with smooth-in-time reconstruction.

The dynamical variables are U^G = d_t G - i Lam G for each metric component
(half-wave symbol) and the scalar field (Klein-Gordon symbol).  Real fields
are recovered by

    d_t G = (U + conj U) / 2,        Lam G = i (U - conj U) / 2,

evaluated pointwise in physical space; the wave symbol is singular on the
zero mode, so the box averages of the ten metric components ride along as
explicit ledger entries with d_t h0 = Re U(0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ekgsim.metric import COMP_INDEX, COMP_PAIRS, MetricPerturbation, expand_sym10
from ekgsim.spectral import Grid, SpectralScalar


@dataclass
class EvolutionState:
    """Normalized variables at one instant.

    ``U_h`` is the (10, n, n, n) stack in ``COMP_PAIRS`` order, ``U_psi``
    the scalar-field variable, ``h0`` the ten zero-mode ledger entries.
    """

    grid: Grid
    t: float
    U_h: np.ndarray
    U_psi: np.ndarray
    h0: np.ndarray = field(default_factory=lambda: np.zeros(10))

    def __post_init__(self):
        self.U_h = np.asarray(self.U_h, dtype=complex)
        self.U_psi = np.asarray(self.U_psi, dtype=complex)
        self.h0 = np.asarray(self.h0, dtype=float)
        if self.U_h.shape != (10,) + self.grid.shape:
            raise ValueError("U_h must be the (10, n, n, n) component stack")
        if self.U_psi.shape != self.grid.shape:
            raise ValueError("U_psi does not match the grid")

    @classmethod
    def flat(cls, grid: Grid, t: float = 0.0) -> "EvolutionState":
        return cls(
            grid,
            t,
            np.zeros((10,) + grid.shape, dtype=complex),
            np.zeros(grid.shape, dtype=complex),
        )

    def copy(self) -> "EvolutionState":
        return EvolutionState(
            self.grid, self.t, self.U_h.copy(), self.U_psi.copy(), self.h0.copy()
        )

    # ------------------------------------------------------------------
    # field recovery
    # ------------------------------------------------------------------
    def _split(self, U: np.ndarray):
        """Hermitian/anti-Hermitian split: returns (d_t G, Lam G) spectra."""
        g = self.grid
        flip = g.conj_flip(U)
        dt_part = 0.5 * (U + flip)
        lam_part = 0.5j * (U - flip)
        return dt_part, lam_part

    def h_coeffs(self) -> np.ndarray:
        """Spectral coefficients of the ten (real) metric components."""
        g = self.grid
        _, lam = self._split(self.U_h)
        h = lam * g.xi_abs_inv
        h[:, 0, 0, 0] = self.h0
        return h

    def dth_coeffs(self) -> np.ndarray:
        dt, _ = self._split(self.U_h)
        return dt

    def psi_coeffs(self) -> np.ndarray:
        _, lam = self._split(self.U_psi[None])
        return (lam[0] / self.grid.lam_kg)

    def dtpsi_coeffs(self) -> np.ndarray:
        dt, _ = self._split(self.U_psi[None])
        return dt[0]

    def metric_perturbation(self) -> MetricPerturbation:
        return MetricPerturbation(self.grid, self.h_coeffs())

    def dt_metric_perturbation(self) -> MetricPerturbation:
        return MetricPerturbation(self.grid, self.dth_coeffs())

    def psi(self) -> SpectralScalar:
        return SpectralScalar(self.grid, self.psi_coeffs(), is_real=True)

    def dtpsi(self) -> SpectralScalar:
        return SpectralScalar(self.grid, self.dtpsi_coeffs(), is_real=True)

    def reality_defect(self) -> float:
        """How far the recovered fields are from conjugate symmetry.

        The Hermitian split enforces symmetry exactly, so the meaningful
        defect is in the zero modes (which must stay real) plus the
        round-trip against U.
        """
        g = self.grid
        h = self.h_coeffs()
        dth = self.dth_coeffs()
        rebuilt = dth - 1j * g.xi_abs * h
        rebuilt[:, 0, 0, 0] = self.U_h[:, 0, 0, 0]
        defect = float(np.max(np.abs(rebuilt - self.U_h)))
        defect = max(defect, float(np.max(np.abs(self.U_h[:, 0, 0, 0].imag))))
        return defect

    @classmethod
    def from_fields(cls, grid: Grid, h: MetricPerturbation, dth: MetricPerturbation,
                    psi: SpectralScalar, dtpsi: SpectralScalar,
                    t: float = 0.0) -> "EvolutionState":
        """Build U variables from real field pairs."""
        U_h = dth.coeffs - 1j * grid.xi_abs * h.coeffs
        U_psi = dtpsi.coeffs - 1j * grid.lam_kg * psi.coeffs
        return cls(grid, t, U_h, U_psi, h.zero_modes())


@dataclass
class FieldsSlice:
    """All spectra needed by point evaluators at one reconstructed time.

    ``N_h``/``N_psi`` are the nonlinearity spectra, used to eliminate the
    second time derivative via d_t^2 h = Lap h + N_h (and the massive
    analogue for psi).
    """

    grid: Grid
    t: float
    h: np.ndarray        # (10, ...)
    dth: np.ndarray      # (10, ...)
    N_h: np.ndarray      # (10, ...)
    psi: np.ndarray
    dtpsi: np.ndarray
    N_psi: np.ndarray

    def ddth_coeffs(self) -> np.ndarray:
        return -self.grid.xi_sq * self.h + self.N_h

    def ddtpsi_coeffs(self) -> np.ndarray:
        return -(self.grid.xi_sq + 1.0) * self.psi + self.N_psi


def _hermite(t, t0, t1, y0, y1, d0, d1):
    """Cubic Hermite interpolation on [t0, t1]."""
    w = t1 - t0
    s = (t - t0) / w
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return h00 * y0 + h10 * w * d0 + h01 * y1 + h11 * w * d1


class RunHistory:
    """Snapshots of a run stored as linear profiles V = e^{i t Lam} U.

    The profile varies only through the nonlinearity, so cubic Hermite in
    time on (V, dV/dt = e^{i t Lam} N) reconstructs the state between
    snapshots without resolving the fast linear phase, which is reapplied
    exactly.  Phase-correction integrals ride along per snapshot.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.times: list[float] = []
        self.V_h: list[np.ndarray] = []
        self.V_psi: list[np.ndarray] = []
        self.Vdot_h: list[np.ndarray] = []
        self.Vdot_psi: list[np.ndarray] = []
        self.h0: list[np.ndarray] = []
        self.h0dot: list[np.ndarray] = []
        self.theta_wa: list[np.ndarray] = []
        self.theta_kg: list[np.ndarray] = []
        self._slice_cache: dict[float, FieldsSlice] = {}

    # ------------------------------------------------------------------
    def append(self, state: EvolutionState, N_h: np.ndarray, N_psi: np.ndarray,
               theta_wa=None, theta_kg=None):
        g = self.grid
        pw = np.exp(1j * state.t * g.lam_wa)
        pk = np.exp(1j * state.t * g.lam_kg)
        self.times.append(state.t)
        self.V_h.append(pw * state.U_h)
        self.V_psi.append(pk * state.U_psi)
        self.Vdot_h.append(pw * N_h)
        self.Vdot_psi.append(pk * N_psi)
        self.h0.append(state.h0.copy())
        self.h0dot.append(state.U_h[:, 0, 0, 0].real.copy())
        self.theta_wa.append(
            np.zeros(g.shape) if theta_wa is None else np.array(theta_wa)
        )
        self.theta_kg.append(
            np.zeros(g.shape) if theta_kg is None else np.array(theta_kg)
        )
        self._slice_cache.clear()

    @property
    def t_min(self) -> float:
        return self.times[0]

    @property
    def t_max(self) -> float:
        return self.times[-1]

    def contains(self, t: float) -> bool:
        return self.t_min - 1e-12 <= t <= self.t_max + 1e-12

    def _bracket(self, t: float) -> int:
        if not self.contains(t):
            raise ValueError(f"time {t} outside stored history "
                             f"[{self.t_min}, {self.t_max}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), len(self.times) - 2) if len(self.times) > 1 else 0

    def profile_at(self, t: float):
        """Hermite-interpolated (V_h, V_psi, Vdot_h, Vdot_psi, h0, h0dot)."""
        if len(self.times) == 1:
            return (self.V_h[0], self.V_psi[0], self.Vdot_h[0],
                    self.Vdot_psi[0], self.h0[0], self.h0dot[0])
        i = self._bracket(t)
        t0, t1 = self.times[i], self.times[i + 1]
        args = (t, t0, t1)
        V_h = _hermite(*args, self.V_h[i], self.V_h[i + 1],
                       self.Vdot_h[i], self.Vdot_h[i + 1])
        V_psi = _hermite(*args, self.V_psi[i], self.V_psi[i + 1],
                         self.Vdot_psi[i], self.Vdot_psi[i + 1])
        s = (t - t0) / (t1 - t0)
        Vdot_h = (1 - s) * self.Vdot_h[i] + s * self.Vdot_h[i + 1]
        Vdot_psi = (1 - s) * self.Vdot_psi[i] + s * self.Vdot_psi[i + 1]
        h0 = _hermite(*args, self.h0[i], self.h0[i + 1],
                      self.h0dot[i], self.h0dot[i + 1])
        h0dot = (1 - s) * self.h0dot[i] + s * self.h0dot[i + 1]
        return V_h, V_psi, Vdot_h, Vdot_psi, h0, h0dot

    def state_at(self, t: float) -> EvolutionState:
        g = self.grid
        V_h, V_psi, _, _, h0, _ = self.profile_at(t)
        U_h = np.exp(-1j * t * g.lam_wa) * V_h
        U_psi = np.exp(-1j * t * g.lam_kg) * V_psi
        return EvolutionState(g, t, U_h, U_psi, h0)

    def fields_at(self, t: float) -> FieldsSlice:
        """Reconstructed field spectra with nonlinearities at time t."""
        key = round(float(t), 12)
        if key in self._slice_cache:
            return self._slice_cache[key]
        g = self.grid
        V_h, V_psi, Vdot_h, Vdot_psi, h0, _ = self.profile_at(t)
        U_h = np.exp(-1j * t * g.lam_wa) * V_h
        U_psi = np.exp(-1j * t * g.lam_kg) * V_psi
        st = EvolutionState(g, t, U_h, U_psi, h0)
        N_h = np.exp(-1j * t * g.lam_wa) * Vdot_h
        N_psi = np.exp(-1j * t * g.lam_kg) * Vdot_psi
        sl = FieldsSlice(
            g, t,
            h=st.h_coeffs(), dth=st.dth_coeffs(), N_h=N_h,
            psi=st.psi_coeffs(), dtpsi=st.dtpsi_coeffs(), N_psi=N_psi,
        )
        if len(self._slice_cache) > 24:
            self._slice_cache.clear()
        self._slice_cache[key] = sl
        return sl

    def theta_at(self, t: float, kind: str) -> np.ndarray:
        """Linear interpolation of the stored phase-correction tables."""
        tab = self.theta_wa if kind == "wa" else self.theta_kg
        if len(self.times) == 1:
            return tab[0]
        i = self._bracket(t)
        t0, t1 = self.times[i], self.times[i + 1]
        s = (t - t0) / (t1 - t0)
        return (1 - s) * tab[i] + s * tab[i + 1]
