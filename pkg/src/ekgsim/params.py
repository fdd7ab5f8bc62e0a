"""Global analysis parameters and the norm-weight bookkeeping built on them.

All constants live in one place so that every diagnostic (Z-norms, bootstrap
ratios, smallness norms) is evaluated with the same conventions, and so a run
manifest can record them.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class NormParameters:
    """Parameter pack for the weighted norms and phase corrections.

    The defaults are the canonical choices; ``sobolev_index`` returns N(n),
    the Sobolev regularity tracked at vector-field order n, and
    ``growth_exponent`` returns the H(q, n) hierarchy exponent that scales the
    admissible slow growth of each energy level.
    """

    n0: int = 40
    d: int = 10
    kappa: float = 1.0e-3
    delta: float = 1.0e-10
    delta_prime: float = field(default=2000 * 1.0e-10)
    gamma: float = field(default=1.0e-10 / 4)
    p0: float = 0.68  # low-frequency cutoff exponent for phase corrections

    def sobolev_index(self, n: int) -> int:
        """N(n): derivatives under control at vector-field order n."""
        if n < 0:
            raise ValueError(f"vector-field order must be >= 0, got {n}")
        if n == 0:
            return self.n0 + 16 * self.d
        return self.n0 - self.d * n

    def growth_exponent(self, q: int, n: int) -> int:
        """H(q, n): hierarchy exponent for q Lorentz boosts among n fields."""
        if not 0 <= q <= n:
            raise ValueError(f"need 0 <= q <= n, got q={q}, n={n}")
        if q == 0 and n == 0:
            return 1
        if q == 0:
            return 60 * (n - 1) + 20
        if q == 1:
            return 200 * (n - 1) + 30
        return 100 * (q + 1) * (n - 1)


DEFAULT_PARAMS = NormParameters()
