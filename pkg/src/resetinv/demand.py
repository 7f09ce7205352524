"""Demand laws with nonnegative support and bounded Lipschitz densities.

Two families are supported: the exponential law and the normal law truncated
below at zero. Everything the cost formulas need (density, CDF, loss function,
partial expectations, sampling and density bounds) is available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

FAMILIES = ("truncated_normal", "exponential")

_SQRT2PI = math.sqrt(2.0 * math.pi)
_PHI_AT_ONE = math.exp(-0.5) / _SQRT2PI


def _phi(a):
    return np.exp(-0.5 * np.square(a)) / _SQRT2PI


@dataclass(frozen=True)
class DemandModel:
    """An i.i.d. per-epoch demand law.

    Use :meth:`exponential` or :meth:`truncated_normal` to build one.
    ``mu``/``sigma`` are the parameters of the untruncated normal, not the
    moments of the truncated law.
    """

    family: str
    mu: float = 0.0
    sigma: float = 1.0
    rate: float = 1.0
    _tail_mass: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown demand family {self.family!r}")
        if self.family == "exponential":
            if not self.rate > 0:
                raise ValueError("exponential rate must be > 0")
            tail = 1.0
        else:
            if not self.sigma > 0:
                raise ValueError("truncated normal sigma must be > 0")
            # mass of the parent normal on [0, inf)
            tail = float(special.ndtr(self.mu / self.sigma))
            if tail <= 0.0:
                raise ValueError("truncated normal has no mass on [0, inf)")
        object.__setattr__(self, "_tail_mass", tail)

    @classmethod
    def exponential(cls, rate: float) -> "DemandModel":
        return cls("exponential", rate=float(rate))

    @classmethod
    def truncated_normal(cls, mu: float, sigma: float) -> "DemandModel":
        return cls("truncated_normal", mu=float(mu), sigma=float(sigma))

    @classmethod
    def from_dict(cls, d: dict) -> "DemandModel":
        family = d["family"]
        if family == "exponential":
            return cls.exponential(d["lambda"])
        return cls.truncated_normal(d["mu"], d["sigma"])

    def to_dict(self) -> dict:
        if self.family == "exponential":
            return {"family": "exponential", "lambda": self.rate}
        return {"family": "truncated_normal", "mu": self.mu, "sigma": self.sigma}

    # ------------------------------------------------------------------
    # point functions; all accept scalars or arrays

    def density(self, w):
        w = np.asarray(w, dtype=float)
        if self.family == "exponential":
            out = self.rate * np.exp(-self.rate * np.maximum(w, 0.0))
        else:
            a = (w - self.mu) / self.sigma
            out = _phi(a) / (self.sigma * self._tail_mass)
        out = np.where(w < 0.0, 0.0, out)
        return out if out.ndim else float(out)

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        if self.family == "exponential":
            out = -np.expm1(-self.rate * zp)
        else:
            # 1 - (upper tail beyond z) / (upper tail beyond 0)
            upper = special.ndtr((self.mu - zp) / self.sigma)
            out = 1.0 - upper / self._tail_mass
        out = np.clip(np.where(z <= 0.0, 0.0, out), 0.0, 1.0)
        return out if out.ndim else float(out)

    def sf(self, z):
        """Survival function 1 - cdf, computed without cancellation."""
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        if self.family == "exponential":
            out = np.exp(-self.rate * zp)
        else:
            out = special.ndtr((self.mu - zp) / self.sigma) / self._tail_mass
        out = np.minimum(out, 1.0)
        return out if out.ndim else float(out)

    def loss(self, z):
        """Expected unmet demand ``E[(w - z)^+]``."""
        z = np.asarray(z, dtype=float)
        zp = np.maximum(z, 0.0)
        if self.family == "exponential":
            out = np.exp(-self.rate * zp) / self.rate
        else:
            a = (zp - self.mu) / self.sigma
            out = (self.sigma * _phi(a) + (self.mu - zp) * special.ndtr(-a)) / self._tail_mass
        # below the support (w - z)^+ = w - z
        out = np.where(z < 0.0, self.mean - z, np.maximum(out, 0.0))
        return out if out.ndim else float(out)

    def partial_mean(self, w):
        """``E[W; W <= w]``, the first moment of the law restricted to [0, w]."""
        w = np.maximum(np.asarray(w, dtype=float), 0.0)
        out = self.mean - self.loss(w) - w * self.sf(w)
        return out if np.ndim(out) else float(out)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "exponential":
            out = -np.log1p(-u) / self.rate
        else:
            # invert the upper tail: P(W > w) = (1 - u)
            upper = (1.0 - u) * self._tail_mass
            out = self.mu - self.sigma * special.ndtri(upper)
            out = np.maximum(out, 0.0)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw i.i.d. demands by inversion of one uniform per draw."""
        return self.ppf(rng.random(size))

    # ------------------------------------------------------------------
    # cached summaries

    @property
    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.rate
        a0 = -self.mu / self.sigma
        return self.mu + self.sigma * float(_phi(a0)) / self._tail_mass

    @property
    def scale(self) -> float:
        """A spread measure: standard deviation of the parent law."""
        return 1.0 / self.rate if self.family == "exponential" else self.sigma

    def upper_support(self, tail: float = 1e-10) -> float:
        """Smallest ``w_hi`` with ``cdf(w_hi) >= 1 - tail``."""
        return float(self.ppf(1.0 - tail))

    def density_bounds(self) -> tuple[float, float]:
        """Return ``(P, L)``: sup of the density and its Lipschitz constant on [0, inf)."""
        if self.family == "exponential":
            return self.rate, self.rate**2
        norm = self.sigma * self._tail_mass
        a0 = -self.mu / self.sigma
        # density is a normal bump restricted to a >= a0
        peak = _phi(max(a0, 0.0)) / norm
        # |phi'(a)| = |a| phi(a) peaks at |a| = 1
        if a0 <= 1.0:
            slope = _PHI_AT_ONE
        else:
            slope = a0 * float(_phi(a0))
        return float(peak), float(slope / (norm * self.sigma))

    def min_density(self, lo: float, hi: float, n: int = 2001) -> float:
        """Minimum of the density over ``[lo, hi]`` on a uniform mesh."""
        return float(np.min(self.density(np.linspace(lo, hi, n))))
