"""Symmetric 2-tensor bookkeeping: the double Hodge decomposition of the
metric perturbation, its inverse-metric expansion, and harmonic-gauge
residuals.

The perturbation h_ab (a, b = 0..3) rides on the fixed background
diag(-1, 1, 1, 1).  Its ten components split under Riesz transforms into two
scalars (F, Fbar), a scalar rho and a divergence-free vector omega from the
time-space block, and a divergence-free vector Omega plus a divergence-free
symmetric tensor theta from the space-space block.  Zero modes are not seen
by Riesz transforms; they are carried by convention (see ``decompose``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ekgsim.spectral import Grid, SpectralScalar

MINKOWSKI = np.diag([-1.0, 1.0, 1.0, 1.0])

# storage order of the ten independent components of a symmetric 4-tensor
COMP_PAIRS = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
COMP_INDEX = {p: i for i, p in enumerate(COMP_PAIRS)}
COMP_INDEX.update({(b, a): i for (a, b), i in list(COMP_INDEX.items())})

# storage order of the six independent spatial components (indices 1..3)
SPATIAL_PAIRS = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]
SPATIAL_INDEX = {p: i for i, p in enumerate(SPATIAL_PAIRS)}
SPATIAL_INDEX.update({(b, a): i for (a, b), i in list(SPATIAL_INDEX.items())})

# Levi-Civita on three indices (values at index triples)
EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k, _s in [(0, 1, 2, 1), (1, 2, 0, 1), (2, 0, 1, 1),
                       (0, 2, 1, -1), (2, 1, 0, -1), (1, 0, 2, -1)]:
    EPS3[_i, _j, _k] = _s


def expand_sym10(stack10: np.ndarray) -> np.ndarray:
    """(10, ...) component stack -> full symmetric (4, 4, ...) array."""
    idx = np.array([[COMP_INDEX[(a, b)] for b in range(4)] for a in range(4)])
    return stack10[idx]


def contract_sym10(full: np.ndarray) -> np.ndarray:
    """Full (4, 4, ...) symmetric array -> (10, ...) stack."""
    return np.stack([full[a, b] for a, b in COMP_PAIRS])


def expand_sym6(stack6: np.ndarray) -> np.ndarray:
    idx = np.array([[SPATIAL_INDEX[(a + 1, b + 1)] for b in range(3)] for a in range(3)])
    return stack6[idx]


@dataclass
class MetricPerturbation:
    """Ten spectral components h_ab in ``COMP_PAIRS`` order."""

    grid: Grid
    coeffs: np.ndarray  # (10, n, n, n) complex

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (10,) + self.grid.shape:
            raise ValueError("need a (10, n, n, n) component stack")

    @classmethod
    def zeros(cls, grid: Grid) -> "MetricPerturbation":
        return cls(grid, np.zeros((10,) + grid.shape, dtype=complex))

    @classmethod
    def from_values(cls, grid: Grid, values10) -> "MetricPerturbation":
        return cls(grid, grid.forward(np.asarray(values10)))

    def component(self, a: int, b: int) -> SpectralScalar:
        return SpectralScalar(self.grid, self.coeffs[COMP_INDEX[(a, b)]], is_real=True)

    def values(self) -> np.ndarray:
        return self.grid.inverse(self.coeffs).real

    def full_values(self) -> np.ndarray:
        """(4, 4, n, n, n) real samples."""
        return expand_sym10(self.values())

    def zero_modes(self) -> np.ndarray:
        return self.coeffs[:, 0, 0, 0].real.copy()

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values())))

    def copy(self) -> "MetricPerturbation":
        return MetricPerturbation(self.grid, self.coeffs.copy())


@dataclass
class MetricComponents:
    """Output of the double Hodge decomposition.

    ``F`` and ``Fbar`` each carry half of the time-time zero mode; the
    space-space zero modes are carried on ``theta`` with a sign flip so that
    the trace relation tau = -(1/2) delta_jk theta_jk holds including zero
    modes; the time-space zero modes live in ``zero_mode_0j``.
    """

    grid: Grid
    F: np.ndarray
    Fbar: np.ndarray
    rho: np.ndarray
    omega: np.ndarray  # (3, n, n, n)
    Omega: np.ndarray  # (3, n, n, n)
    theta: np.ndarray  # (6, n, n, n), SPATIAL_PAIRS order
    zero_mode_0j: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def tau(self) -> np.ndarray:
        """tau = -(1/2) delta_jk theta_jk (spectral coefficients)."""
        trace = (
            self.theta[SPATIAL_INDEX[(1, 1)]]
            + self.theta[SPATIAL_INDEX[(2, 2)]]
            + self.theta[SPATIAL_INDEX[(3, 3)]]
        )
        return -0.5 * trace

    def scalar(self, name: str) -> SpectralScalar:
        return SpectralScalar(self.grid, getattr(self, name), is_real=True)


def _riesz_sym(grid: Grid, j: int) -> np.ndarray:
    """Symbol of R_j (i xi_j / |xi|, zero at the origin and Nyquist)."""
    sym = 1j * grid.xi[j] * grid.xi_abs_inv
    sym[grid.nyquist_mask] = 0.0
    return sym


def decompose(h: MetricPerturbation) -> MetricComponents:
    """Double Hodge decomposition of the ten metric components.

    All Riesz transforms act on the zero-mean parts; zero modes of h are
    rehomed per the class docstring so the round trip with ``reconstruct``
    is exact.
    """
    g = h.grid
    R = [_riesz_sym(g, j) for j in range(3)]
    c = h.coeffs
    h00 = c[COMP_INDEX[(0, 0)]]
    h0 = [c[COMP_INDEX[(0, j + 1)]] for j in range(3)]
    hs = [[c[COMP_INDEX[(j + 1, k + 1)]] for k in range(3)] for j in range(3)]

    rr_h = np.zeros(g.shape, dtype=complex)  # R_j R_k h_jk
    for j in range(3):
        for k in range(3):
            rr_h += R[j] * R[k] * hs[j][k]

    F = 0.5 * (h00 + rr_h)
    Fbar = 0.5 * (h00 - rr_h)

    rho = np.zeros(g.shape, dtype=complex)
    for j in range(3):
        rho += R[j] * h0[j]

    omega = np.zeros((3,) + g.shape, dtype=complex)
    Omega = np.zeros((3,) + g.shape, dtype=complex)
    for j in range(3):
        for k in range(3):
            for l in range(3):
                if EPS3[j, k, l] != 0.0:
                    omega[j] += EPS3[j, k, l] * R[k] * h0[l]
            for m in range(3):
                if EPS3[j, k, m] == 0.0:
                    continue
                for l in range(3):
                    Omega[j] += EPS3[j, k, m] * R[k] * R[l] * hs[m][l]

    theta = np.zeros((6,) + g.shape, dtype=complex)
    for idx, (a, b) in enumerate(SPATIAL_PAIRS):
        j, k = a - 1, b - 1
        acc = np.zeros(g.shape, dtype=complex)
        for m in range(3):
            for p in range(3):
                if EPS3[j, m, p] == 0.0:
                    continue
                for n in range(3):
                    for q in range(3):
                        if EPS3[k, n, q] == 0.0:
                            continue
                        acc += EPS3[j, m, p] * EPS3[k, n, q] * R[m] * R[n] * hs[p][q]
        theta[idx] = acc

    # zero-mode conventions
    zm = h.zero_modes()
    F[0, 0, 0] = 0.5 * zm[COMP_INDEX[(0, 0)]]
    Fbar[0, 0, 0] = 0.5 * zm[COMP_INDEX[(0, 0)]]
    zero_0j = np.array([zm[COMP_INDEX[(0, j + 1)]] for j in range(3)])
    for idx, (a, b) in enumerate(SPATIAL_PAIRS):
        theta[idx][0, 0, 0] = -zm[COMP_INDEX[(a, b)]]

    return MetricComponents(g, F, Fbar, rho, omega, Omega, theta, zero_0j)


def component_invariant_residuals(c: MetricComponents) -> dict:
    """Sup-norm residuals of the structural constraints of the split."""
    g = c.grid
    R = [_riesz_sym(g, j) for j in range(3)]
    div_omega = sum(R[j] * c.omega[j] for j in range(3))
    div_Omega = sum(R[j] * c.Omega[j] for j in range(3))
    div_theta = np.zeros((3,) + g.shape, dtype=complex)
    for k in range(3):
        for j in range(3):
            div_theta[k] += R[j] * c.theta[SPATIAL_INDEX[(j + 1, k + 1)]]
    # tau from the trace vs tau from (1/2)[delta h + RR h] is checked by the
    # caller against the originating h; here only intrinsic constraints.
    sup = lambda a: float(np.max(np.abs(g.inverse(a))))
    return {
        "div_omega": sup(div_omega),
        "div_Omega": sup(div_Omega),
        "div_theta": max(sup(div_theta[k]) for k in range(3)),
    }


def reconstruct(c: MetricComponents, tol: float = 1e-6) -> MetricPerturbation:
    """Rebuild h from its Hodge components (inverse of ``decompose``).

    Raises if the components violate their divergence-free/trace constraints
    beyond ``tol`` (they would not come from any symmetric tensor).
    """
    res = component_invariant_residuals(c)
    worst = max(res.values())
    if worst > tol:
        raise ValueError(f"inconsistent Hodge components (residual {worst:.3e})")

    g = c.grid
    R = [_riesz_sym(g, j) for j in range(3)]
    out = np.zeros((10,) + g.shape, dtype=complex)

    out[COMP_INDEX[(0, 0)]] = c.F + c.Fbar

    for j in range(3):
        acc = -R[j] * c.rho
        for k in range(3):
            for l in range(3):
                if EPS3[j, k, l] != 0.0:
                    acc = acc + EPS3[j, k, l] * R[k] * c.omega[l]
        acc[0, 0, 0] = c.zero_mode_0j[j]
        out[COMP_INDEX[(0, j + 1)]] = acc

    FmFbar = c.F - c.Fbar
    for a, b in SPATIAL_PAIRS:
        j, k = a - 1, b - 1
        acc = R[j] * R[k] * FmFbar
        for l in range(3):
            for m in range(3):
                coef = EPS3[k, l, m] * R[j] + EPS3[j, l, m] * R[k]
                acc = acc - coef * R[l] * c.Omega[m]
        for p in range(3):
            for m in range(3):
                if EPS3[j, p, m] == 0.0:
                    continue
                for q in range(3):
                    for n in range(3):
                        if EPS3[k, q, n] == 0.0:
                            continue
                        acc = acc + (
                            EPS3[j, p, m] * EPS3[k, q, n] * R[p] * R[q]
                            * c.theta[SPATIAL_INDEX[(m + 1, n + 1)]]
                        )
        acc[0, 0, 0] = -c.theta[SPATIAL_INDEX[(a, b)]][0, 0, 0]
        out[COMP_INDEX[(a, b)]] = acc

    return MetricPerturbation(g, out)


def tau_of(h: MetricPerturbation) -> SpectralScalar:
    """tau = (1/2)[delta_jk h_jk + R_j R_k h_jk] including the zero mode."""
    g = h.grid
    R = [_riesz_sym(g, j) for j in range(3)]
    acc = np.zeros(g.shape, dtype=complex)
    for j in range(3):
        acc += h.coeffs[COMP_INDEX[(j + 1, j + 1)]]
        for k in range(3):
            acc += R[j] * R[k] * h.coeffs[COMP_INDEX[(j + 1, k + 1)]]
    return SpectralScalar(g, 0.5 * acc, is_real=True)


# ----------------------------------------------------------------------
# inverse metric
# ----------------------------------------------------------------------


@dataclass
class InverseMetricExpansion:
    """Pointwise expansion of the inverse metric about the background.

    ``g1`` is the exact linear part (index raising with the background with
    a sign), ``g_ge2`` the quadratic-and-higher remainder from the Neumann
    series; ``g1 + g_ge2`` added to the background inverts the full metric.
    """

    grid: Grid
    g1: np.ndarray      # (4, 4, n, n, n) physical samples
    g_ge2: np.ndarray   # (4, 4, n, n, n)

    def g_ge1(self) -> np.ndarray:
        return self.g1 + self.g_ge2

    def full_inverse(self) -> np.ndarray:
        return MINKOWSKI[:, :, None, None, None] + self.g_ge1()

    def identity_residual(self, h_values_full: np.ndarray) -> float:
        g_lower = MINKOWSKI[:, :, None, None, None] + h_values_full
        prod = np.einsum("ar...,br...->ab...", self.full_inverse(), g_lower)
        eye = np.eye(4)[:, :, None, None, None]
        return float(np.max(np.abs(prod - eye)))


def linear_inverse_part(h_full_values: np.ndarray) -> np.ndarray:
    """The exact first-order inverse: flip sign of time-time and
    space-space blocks, keep time-space."""
    g1 = -h_full_values.copy()
    g1[0, 1:] *= -1.0
    g1[1:, 0] *= -1.0
    return g1


def inverse_metric(h: MetricPerturbation, order: int = 40,
                   tol: float = 1e-14) -> InverseMetricExpansion:
    """Pointwise Neumann expansion of the inverse metric.

    The remainder is summed as g_{k+1} = -g1 (m h) ... i.e. each extra term
    multiplies by the mixed perturbation M^a_b = m^{ac} h_{cb}; truncation
    when the increment sup-norm drops below ``tol`` or after ``order`` terms.
    """
    hv = h.full_values()
    sup = float(np.max(np.abs(hv)))
    if sup >= 0.5:
        raise ValueError(f"perturbation too large for the Neumann series (sup {sup:.3f})")
    g1 = linear_inverse_part(hv)
    # mixed tensor M^a_b = m^{ac} h_{cb}; (m + h)^{-1} = (sum (-M)^k) m^{-1}
    M = np.einsum("ac,cb...->ab...", MINKOWSKI, hv)
    term = np.einsum("ac...,cb...->ab...", M, M)  # (-M)^2
    acc = term.copy()
    for k in range(3, order + 1):
        term = -np.einsum("ac...,cb...->ab...", M, term)
        acc += term
        if float(np.max(np.abs(term))) < tol:
            break
    g_ge2 = np.einsum("ac...,cb->ab...", acc, MINKOWSKI)
    return InverseMetricExpansion(h.grid, g1, g_ge2)


# ----------------------------------------------------------------------
# harmonic-gauge residuals
# ----------------------------------------------------------------------


@dataclass
class GaugeResidual:
    """Gauge one-form Gamma_mu and the quadratic tail E_mu of the linear
    gauge identity, as physical samples on the grid."""

    grid: Grid
    Gamma: np.ndarray   # (4, n, n, n)
    E_ge2: np.ndarray   # (4, n, n, n)

    def sup(self) -> float:
        return float(np.max(np.abs(self.Gamma)))


def _first_derivative_values(h: MetricPerturbation, dth: MetricPerturbation):
    """dg[mu][a][b] physical samples of d_mu h_ab, mu = 0..3."""
    g = h.grid
    dg = np.zeros((4, 4, 4) + g.shape)
    dg[0] = dth.full_values()
    for j in range(3):
        dj = g.inverse(1j * g.xi[j] * h.coeffs).real
        dg[j + 1] = expand_sym10(dj)
    return dg


def gauge_residual(h: MetricPerturbation, dth: MetricPerturbation) -> GaugeResidual:
    """Harmonic-gauge one-form Gamma_mu (with the full inverse metric) and
    the quadratic remainder E_mu of the linearised gauge identity.

    The exact algebraic identity

        m^{ab} d_a h_{b mu} - (1/2) m^{ab} d_mu h_{ab} = Gamma_mu + E_mu

    holds pointwise and is what tests assert.
    """
    g = h.grid
    inv = inverse_metric(h)
    ginv = inv.full_inverse()
    dg = _first_derivative_values(h, dth)  # indexed (mu, a, b, ...) = d_mu h_ab

    # Gamma_mu = g^{ab} d_a g_{b mu} - (1/2) g^{ab} d_mu g_{ab};  dg[a, b, mu]
    # with leading derivative index already reads as d_a h_{b mu}.
    term1 = np.einsum("ab...,abm...->m...", ginv, dg)
    term2 = 0.5 * np.einsum("ab...,mab...->m...", ginv, dg)
    Gamma = term1 - term2

    g1plus = inv.g_ge1()
    e1 = np.einsum("ab...,abm...->m...", g1plus, dg)
    e2 = 0.5 * np.einsum("ab...,mab...->m...", g1plus, dg)
    E_ge2 = -(e1 - e2)

    return GaugeResidual(g, Gamma, E_ge2)


def linear_gauge_identity_residual(h, dth, gr: GaugeResidual) -> float:
    """Sup-norm of m^{ab} d_a h_{b mu} - (1/2) m^{ab} d_mu h_{ab}
    - (Gamma_mu + E_mu); an exact identity up to dealiasing/roundoff."""
    dg = _first_derivative_values(h, dth)
    lin1 = np.einsum("ab,abm...->m...", MINKOWSKI, dg)
    lin2 = 0.5 * np.einsum("ab,mab...->m...", MINKOWSKI, dg)
    lhs = lin1 - lin2
    return float(np.max(np.abs(lhs - gr.Gamma - gr.E_ge2)))


def elliptic_identities_check(c: MetricComponents, dt_c: MetricComponents,
                              gr: GaugeResidual) -> dict:
    """Residuals of the gauge-implied elliptic relations for rho and Omega.

    With R_0 f := |grad|^{-1} d_t f evaluated from the stored time
    derivatives, the relations are

        rho   = R_0 Fbar + R_0 tau + |grad|^{-1} E_0,
        Omega_j = R_0 omega_j + |grad|^{-1} eps_{jlk} R_l E_k,

    and the returned table holds the L2 norms of both defects (zero-mean
    parts; the zero modes of rho and Omega vanish by convention).
    """
    g = c.grid
    inv_grad = g.xi_abs_inv.astype(complex)
    R = [_riesz_sym(g, j) for j in range(3)]

    E_hat = g.forward(gr.E_ge2)

    rho_pred = inv_grad * (dt_c.Fbar + dt_c.tau()) + inv_grad * E_hat[0]
    res_rho = SpectralScalar(g, c.rho - rho_pred).l2_norm()

    res_Omega = 0.0
    for j in range(3):
        curl = np.zeros(g.shape, dtype=complex)
        for l in range(3):
            for k in range(3):
                if EPS3[j, l, k] != 0.0:
                    curl += EPS3[j, l, k] * R[l] * E_hat[k + 1]
        pred = inv_grad * dt_c.omega[j] + inv_grad * curl
        res_Omega = max(res_Omega, SpectralScalar(g, c.Omega[j] - pred).l2_norm())

    return {"rho": res_rho, "Omega": res_Omega}
