"""Standard normal CDF, Hermite-Chebyshev polynomials and Gaussian moments."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

SQRT_2PI = math.sqrt(2 * math.pi)


def std_normal_cdf(u):
    """Phi(u); ``ndtr`` switches to erfc in the tails, so no cancellation for large |u|."""
    out = special.ndtr(u)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_sf(u):
    """1 - Phi(u) without cancellation."""
    out = special.ndtr(-np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf(u):
    u = np.asarray(u, dtype=float)
    out = np.exp(-0.5 * u * u) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def hermite_coefficients(v: int) -> tuple[int, ...]:
    """Integer coefficients (lowest degree first) of H_v, H_{v+1} = u H_v - v H_{v-1}."""
    if v < 0:
        raise ValueError("Hermite order must be non-negative")
    if v == 0:
        return (1,)
    if v == 1:
        return (0, 1)
    prev, cur = [1], [0, 1]
    for k in range(1, v):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= k * c
        prev, cur = cur, nxt
    return tuple(cur)


def hermite(v: int, u):
    """H_v(u), probabilists' normalization (H_2 = u^2 - 1)."""
    coeffs = hermite_coefficients(v)
    u = np.asarray(u, dtype=float)
    acc = np.zeros_like(u)
    for c in reversed(coeffs):
        acc = acc * u + c
    return float(acc) if acc.ndim == 0 else acc


def gaussian_moment(k: int) -> int:
    """E tau^k for tau ~ N(0, 1): 0 for odd k, (k-1)!! for even k."""
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if k % 2:
        return 0
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def substitution_term(v: int, u):
    """CDF image of ``(it)^v exp(-t^2/2)``: ``-phi(u) H_{v-1}(u)`` for v >= 1, Phi(u) for v = 0."""
    if v == 0:
        return std_normal_cdf(u)
    return -std_normal_pdf(u) * hermite(v - 1, u)
