"""Right-hand sides of the reduced wave/Klein-Gordon system and the
integrating-factor RK4 time stepper.

The second time derivative never appears: it is eliminated through the
evolution equations themselves, so the nonlinearities are evaluated from
(h, d_t h, psi, d_t psi) alone, with the pointwise division by
(1 - g00_corr) applied after dealiased product assembly.  The quadratic
semilinear tensor admits an exact split into a null part Q and a trace part
P; the identity F_ge2 = Q + P is this module's flagship cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ekgsim.metric import COMP_PAIRS, MINKOWSKI, MetricPerturbation, contract_sym10
from ekgsim.spectral import Grid
from ekgsim.state import EvolutionState, RunHistory


class RegimeError(RuntimeError):
    """The perturbative guards of the scheme were breached."""


class BlowupError(RuntimeError):
    """NaN/overflow detected; carries the last good state."""

    def __init__(self, msg, last_state=None, history=None):
        super().__init__(msg)
        self.last_state = last_state
        self.history = history


# ----------------------------------------------------------------------
# pointwise tensor kernels (flattened grid axis 'P')
# ----------------------------------------------------------------------


def _pointwise_inverse(g_lower: np.ndarray) -> np.ndarray:
    """Exact pointwise inverse of a (4, 4, P) metric sample array."""
    m = np.moveaxis(g_lower, (0, 1), (-2, -1))
    inv = np.linalg.inv(m)
    return np.moveaxis(inv, (-2, -1), (0, 1))


def _christoffel_lower(dg: np.ndarray) -> np.ndarray:
    """Gamma_{m a b} = (1/2)(d_a g_{bm} + d_b g_{am} - d_m g_{ab});
    dg is indexed (derivative, comp1, comp2, P)."""
    return 0.5 * (
        np.einsum("abm...->mab...", dg)
        + np.einsum("bam...->mab...", dg)
        - dg
    )


def _f_geq2_values(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """The quadratic semilinear tensor of the reduced system, evaluated
    termwise with the full inverse metric.  Returns (4, 4, P)."""
    Gam = _christoffel_lower(dg)
    T = np.einsum("ab...,nab...->n...", ginv, dg)          # g^{rm} d_n g_{rm}
    W = np.einsum("nl...,n...->l...", ginv, T)
    V = np.einsum("rm...,rml...->l...", ginv, dg)          # g^{rm} d_r g_{ml}
    Y = np.einsum("nl...,l...->n...", ginv, V)
    K1 = np.einsum("rm...,arl...->aml...", ginv, dg)       # d_a g_{rl} raised
    K = np.einsum("ln...,aml...->amn...", ginv, K1)

    out = np.einsum("l...,lab...->ab...", W, Gam)
    out -= 2.0 * np.einsum("n...,nab...->ab...", Y, Gam)
    out += np.einsum("amn...,mbn...->ab...", K, dg)
    out += np.einsum("bmn...,man...->ab...", K, dg)
    G1 = np.einsum("rm...,man...->ran...", ginv, Gam)
    H = np.einsum("nl...,ran...->ral...", ginv, G1)
    out -= 2.0 * np.einsum("ral...,rbl...->ab...", H, Gam)
    return out


def _q_values(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Null quadratic part Q_ab of the semilinear tensor (4, 4, P)."""
    T = np.einsum("ab...,nab...->n...", ginv, dg)
    W = np.einsum("nl...,n...->l...", ginv, T)
    V = np.einsum("rm...,rml...->l...", ginv, dg)
    Y = np.einsum("nl...,l...->n...", ginv, V)
    K1 = np.einsum("rm...,arl...->aml...", ginv, dg)
    K = np.einsum("ln...,aml...->amn...", ginv, K1)
    # g^{ll2} g^{rr2} d_l g_{a r2}  and  d_{r2} g_{a l2} raised on both slots
    N1 = np.einsum("rm...,lan...->larn...", ginv, dg)
    N1 = np.einsum("kl...,lakn...->akn...", ginv, N1)      # N1[a, k(=rho), n(=lam')]
    C1 = np.einsum("rm...,man...->ran...", ginv, dg)
    C = np.einsum("ln...,ran...->ral...", ginv, C1)        # C[r(=rho), a, l(=lam)]

    out = np.einsum("arl...,rbl...->ab...", K, dg)
    out -= np.einsum("l...,abl...->ab...", Y, dg)
    out += np.einsum("brl...,ral...->ab...", K, dg)
    out -= np.einsum("l...,bal...->ab...", Y, dg)
    out += 0.5 * np.einsum("l...,bal...->ab...", W, dg)
    out -= 0.5 * np.einsum("b...,a...->ab...", T, V)
    out += 0.5 * np.einsum("l...,abl...->ab...", W, dg)
    out -= 0.5 * np.einsum("a...,b...->ab...", T, V)
    out -= np.einsum("arl...,rbl...->ab...", N1, dg)
    out += np.einsum("a...,b...->ab...", V, V)
    out += np.einsum("ral...,rbl...->ab...", C, dg)
    return out


def _p_values(ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Trace quadratic part P_ab (two-term structure), (4, 4, P)."""
    T = np.einsum("ab...,nab...->n...", ginv, dg)
    K1 = np.einsum("rm...,arl...->aml...", ginv, dg)
    K = np.einsum("ln...,aml...->amn...", ginv, K1)
    out = -0.5 * np.einsum("arl...,brl...->ab...", K, dg)
    out += 0.25 * np.einsum("a...,b...->ab...", T, T)
    return out


def _geometry_on_grid(h_full, dth_full, grad_h_full):
    """Common pointwise inputs: metric samples, inverse, first derivatives.

    ``grad_h_full`` is indexed (spatial j, a, b, ...); the returned dg is
    (mu, a, b, ...) with the time slot taken from d_t h.
    """
    g_lower = MINKOWSKI[(...,) + (None,) * (h_full.ndim - 2)] + h_full
    ginv = _pointwise_inverse(g_lower)
    dg = np.concatenate([dth_full[None], grad_h_full], axis=0)
    return g_lower, ginv, dg


def f_geq2_direct(h: MetricPerturbation, dth: MetricPerturbation) -> np.ndarray:
    """Termwise evaluation of the quadratic semilinear tensor on the grid.

    Returns physical samples with shape (4, 4, n, n, n).
    """
    from ekgsim.metric import _first_derivative_values, expand_sym10

    g = h.grid
    dg = _first_derivative_values(h, dth)
    hv = h.full_values()
    _, ginv, _ = _geometry_on_grid(hv, dg[0], dg[1:])
    return _f_geq2_values(ginv, dg)


def q_plus_p_split(h: MetricPerturbation, dth: MetricPerturbation):
    """The (Q, P) split of the quadratic semilinear tensor; Q + P equals
    ``f_geq2_direct`` identically."""
    from ekgsim.metric import _first_derivative_values

    dg = _first_derivative_values(h, dth)
    hv = h.full_values()
    _, ginv, _ = _geometry_on_grid(hv, dg[0], dg[1:])
    return _q_values(ginv, dg), _p_values(ginv, dg)


# ----------------------------------------------------------------------
# right-hand side assembly
# ----------------------------------------------------------------------


@dataclass
class RHSOutput:
    """Nonlinearity spectra and optional term breakdown (physical samples on
    the dealiasing grid)."""

    N_h: np.ndarray          # (10, n, n, n) spectra
    N_psi: np.ndarray        # (n, n, n) spectra
    parts: Optional[dict] = None


_SPAT = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
_SPAT_INDEX = {}
for _i, (_a, _b) in enumerate(_SPAT):
    _SPAT_INDEX[(_a, _b)] = _i
    _SPAT_INDEX[(_b, _a)] = _i


def _padded_field_values(state: EvolutionState):
    """One batched padded inverse FFT for every needed real field.

    Returns a dict of real sample arrays on the padded grid:
    h (10), dth (10), psi, dtpsi, dh (3, 10), ddth (3, 10), ddh (6, 10),
    dpsi (3), ddtpsi (3), ddpsi (6).
    """
    g = state.grid
    h = state.h_coeffs()
    dth = state.dth_coeffs()
    psi = state.psi_coeffs()
    dtpsi = state.dtpsi_coeffs()

    spectra = [h, dth, psi[None], dtpsi[None]]
    for j in range(3):
        ik = 1j * g.xi[j]
        spectra.append(ik * h)
        spectra.append(ik * dth)
        spectra.append((ik * psi)[None])
        spectra.append((ik * dtpsi)[None])
    for a, b in _SPAT:
        ikk = -g.xi[a] * g.xi[b]
        spectra.append(ikk * h)
        spectra.append((ikk * psi)[None])

    stack = np.concatenate([np.asarray(s).reshape((-1,) + g.shape) for s in spectra])
    vals = np.empty((stack.shape[0],) + g.pad_grid.shape)
    chunk = 48
    for i in range(0, stack.shape[0], chunk):
        vals[i:i + chunk] = g.pad_values(stack[i:i + chunk]).real

    out = {}
    pos = 0

    def take(count):
        nonlocal pos
        block = vals[pos:pos + count]
        pos += count
        return block

    out["h"] = take(10)
    out["dth"] = take(10)
    out["psi"] = take(1)[0]
    out["dtpsi"] = take(1)[0]
    out["dh"] = np.empty((3, 10) + g.pad_grid.shape)
    out["ddth"] = np.empty((3, 10) + g.pad_grid.shape)
    out["dpsi"] = np.empty((3,) + g.pad_grid.shape)
    out["ddtpsi"] = np.empty((3,) + g.pad_grid.shape)
    for j in range(3):
        out["dh"][j] = take(10)
        out["ddth"][j] = take(10)
        out["dpsi"][j] = take(1)[0]
        out["ddtpsi"][j] = take(1)[0]
    out["ddh"] = np.empty((6, 10) + g.pad_grid.shape)
    out["ddpsi"] = np.empty((6,) + g.pad_grid.shape)
    for i, _ in enumerate(_SPAT):
        out["ddh"][i] = take(10)
        out["ddpsi"][i] = take(1)[0]
    return out


def compute_rhs(state: EvolutionState, with_parts: bool = False,
                guard: float = 0.5) -> RHSOutput:
    """Nonlinearities of the coupled system at one instant.

    Every product is assembled pointwise on the 3/2-padded grid; the final
    spectra are truncated back with Nyquist planes zeroed.  Raises
    ``RegimeError`` when the time-time inverse-metric correction reaches the
    division guard.
    """
    from ekgsim.metric import expand_sym10

    g = state.grid
    f = _padded_field_values(state)
    P = g.pad_grid.shape

    h_full = expand_sym10(f["h"])
    dth_full = expand_sym10(f["dth"])
    grad_h_full = np.stack([expand_sym10(f["dh"][j]) for j in range(3)])
    _, ginv, dg = _geometry_on_grid(h_full, dth_full, grad_h_full)

    mink = MINKOWSKI[:, :, None, None, None]
    g_ge1 = ginv - mink
    g00c = g_ge1[0, 0]
    sup00 = float(np.max(np.abs(g00c)))
    if not np.isfinite(sup00):
        raise BlowupError("non-finite metric correction", last_state=state)
    if sup00 >= guard:
        raise RegimeError(f"time-time inverse-metric correction {sup00:.3f} >= {guard}")
    denom = 1.0 / (1.0 - g00c)

    # Laplacians from the second-derivative diagonal
    lap_h = f["ddh"][_SPAT_INDEX[(0, 0)]] + f["ddh"][_SPAT_INDEX[(1, 1)]] \
        + f["ddh"][_SPAT_INDEX[(2, 2)]]
    lap_psi = f["ddpsi"][_SPAT_INDEX[(0, 0)]] + f["ddpsi"][_SPAT_INDEX[(1, 1)]] \
        + f["ddpsi"][_SPAT_INDEX[(2, 2)]]

    # quasilinear sums over (mu, nu) != (0, 0)
    quas_h = np.zeros((10,) + P)
    quas_psi = np.zeros(P)
    for j in range(3):
        quas_h += 2.0 * g_ge1[0, j + 1] * f["ddth"][j]
        quas_psi += 2.0 * g_ge1[0, j + 1] * f["ddtpsi"][j]
    for a in range(3):
        for b in range(3):
            idx = _SPAT_INDEX[(min(a, b), max(a, b))]
            quas_h += g_ge1[a + 1, b + 1] * f["ddh"][idx]
            quas_psi += g_ge1[a + 1, b + 1] * f["ddpsi"][idx]
    quas_h += g00c * lap_h
    quas_psi += g00c * (lap_psi - f["psi"])

    # Klein-Gordon stress terms: 2 d_a psi d_b psi + psi^2 (m + h)_ab
    dpsi4 = np.concatenate([f["dtpsi"][None], f["dpsi"]], axis=0)
    kg_full = 2.0 * np.einsum("a...,b...->ab...", dpsi4, dpsi4)
    kg_full += f["psi"] ** 2 * (mink + h_full)
    kg10 = contract_sym10(kg_full)

    fge2 = contract_sym10(_f_geq2_values(ginv, dg))

    N_h_vals = denom * (quas_h + kg10 - fge2)
    N_psi_vals = denom * quas_psi

    N_h = g.unpad_forward(N_h_vals)
    N_psi = g.unpad_forward(N_psi_vals)

    parts = None
    if with_parts:
        parts = {
            "KG": g.unpad_forward(kg10),
            "quasilinear": g.unpad_forward(quas_h),
            "F_ge2": g.unpad_forward(fge2),
            "Q": g.unpad_forward(contract_sym10(_q_values(ginv, dg))),
            "P": g.unpad_forward(contract_sym10(_p_values(ginv, dg))),
        }
    return RHSOutput(N_h, N_psi, parts)


# ----------------------------------------------------------------------
# time stepping
# ----------------------------------------------------------------------


@dataclass
class StepperConfig:
    """Integrating-factor RK4 configuration.

    The linear phases are applied exactly per step, so the scheme is exact
    on the free flow; ``dt`` must still respect the guard dt < dx/2 so the
    nonlinear stage quadrature resolves the retained frequencies.
    """

    dt: float
    dealias: bool = True
    monitor_every: int = 1
    frozen_metric: bool = False
    guard: float = 0.5
    source: Optional[Callable] = None  # source(t) -> (S_h, S_psi) spectra

    def validate(self, grid: Grid):
        if self.dt >= 0.5 * grid.dx:
            raise ValueError(
                f"dt = {self.dt} violates the dt < dx/2 guard (dx = {grid.dx})"
            )


def _rhs_for_step(state: EvolutionState, cfg: StepperConfig) -> RHSOutput:
    out = compute_rhs(state, guard=cfg.guard)
    if cfg.frozen_metric:
        out.N_h = np.zeros_like(out.N_h)
    if cfg.source is not None:
        S_h, S_psi = cfg.source(state.t)
        out.N_h = out.N_h + S_h
        out.N_psi = out.N_psi + S_psi
    return out


def step(state: EvolutionState, cfg: StepperConfig) -> EvolutionState:
    """One integrating-factor RK4 step of size cfg.dt."""
    g = state.grid
    dt = cfg.dt
    ew_h = np.exp(-0.5j * dt * g.lam_wa)   # half-step wave phase
    ew_k = np.exp(-0.5j * dt * g.lam_kg)

    def stage_state(tau, W_h, W_psi, h0):
        # U = e^{-i tau Lam} W measured from the step start
        if tau == 0.0:
            U_h, U_psi = W_h, W_psi
        elif tau == 0.5 * dt:
            U_h, U_psi = ew_h * W_h, ew_k * W_psi
        else:
            U_h, U_psi = (ew_h**2) * W_h, (ew_k**2) * W_psi
        return EvolutionState(g, state.t + tau, U_h, U_psi, h0)

    def slope(tau, W_h, W_psi, h0):
        st = stage_state(tau, W_h, W_psi, h0)
        out = _rhs_for_step(st, cfg)
        if tau == 0.0:
            k_h, k_psi = out.N_h, out.N_psi
        elif tau == 0.5 * dt:
            k_h, k_psi = out.N_h / ew_h, out.N_psi / ew_k
        else:
            k_h, k_psi = out.N_h / ew_h**2, out.N_psi / ew_k**2
        k_h0 = st.U_h[:, 0, 0, 0].real
        if cfg.frozen_metric:
            k_h0 = np.zeros(10)
        return k_h, k_psi, k_h0

    W_h, W_psi, h0 = state.U_h, state.U_psi, state.h0
    k1 = slope(0.0, W_h, W_psi, h0)
    k2 = slope(0.5 * dt, W_h + 0.5 * dt * k1[0], W_psi + 0.5 * dt * k1[1],
               h0 + 0.5 * dt * k1[2])
    k3 = slope(0.5 * dt, W_h + 0.5 * dt * k2[0], W_psi + 0.5 * dt * k2[1],
               h0 + 0.5 * dt * k2[2])
    k4 = slope(dt, W_h + dt * k3[0], W_psi + dt * k3[1], h0 + dt * k3[2])

    W_h_new = W_h + (dt / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    W_psi_new = W_psi + (dt / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    h0_new = h0 + (dt / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])

    U_h_new = ew_h**2 * W_h_new
    U_psi_new = ew_k**2 * W_psi_new
    if not np.all(np.isfinite(U_psi_new)):
        raise BlowupError("non-finite state after step", last_state=state)
    return EvolutionState(g, state.t + dt, U_h_new, U_psi_new, h0_new)


def evolve(state: EvolutionState, t_end: float, cfg: StepperConfig,
           monitors=None, phase_correction=None,
           support_radius: float = 0.0) -> RunHistory:
    """March the state to t_end, storing snapshots at the monitor cadence.

    ``monitors`` is a list of callables ``monitor(state, rhs)`` invoked at
    every stored snapshot; ``phase_correction`` (if given) is advanced every
    step with trapezoid weights.  Refuses horizons that let the wave zone
    reach the box boundary.
    """
    g = state.grid
    cfg.validate(g)
    horizon = t_end - state.t
    if support_radius > 0.0 and horizon >= 0.5 * g.length - support_radius:
        raise ValueError(
            f"horizon {horizon} reaches the boundary: need T < L/2 - R_support "
            f"= {0.5 * g.length - support_radius}"
        )

    history = RunHistory(g)
    monitors = monitors or []

    def snapshot(st):
        out = compute_rhs(st, guard=cfg.guard)
        if cfg.frozen_metric:
            out.N_h = np.zeros_like(out.N_h)
        tw = phase_correction.theta_wa.copy() if phase_correction is not None else None
        tk = phase_correction.theta_kg.copy() if phase_correction is not None else None
        history.append(st, out.N_h, out.N_psi, tw, tk)
        for mon in monitors:
            mon(st, out)

    n_steps = int(round((t_end - state.t) / cfg.dt))
    if abs(state.t + n_steps * cfg.dt - t_end) > 1e-9:
        raise ValueError("t_end must be an integer number of steps away")

    if phase_correction is not None:
        phase_correction.start(state)
    snapshot(state)
    current = state
    try:
        for i in range(1, n_steps + 1):
            new = step(current, cfg)
            if phase_correction is not None:
                phase_correction.advance(current, new)
            current = new
            if i % cfg.monitor_every == 0 or i == n_steps:
                snapshot(current)
    except BlowupError as err:
        err.history = history
        err.last_state = current
        raise
    return history
