"""Edgeworth approximants for the standardized sample sum.

The integrand of the inversion integral is the ch.f. of a sum of independent
pairs ``(Z~_m, xi~_m)``; its cumulant polynomials ``N^{-m/2} P_{m,N}(t, tau)``
are built explicitly, ``tau`` is integrated out against the standard normal
weight (Gaussian moments, no quadrature) and the result is normalized by its
value at ``t = 0``.  The closed-form approximants ``W_j`` / ``WW_j`` use the
scalar moments ``Lambda_1``, ``Lambda_2``, ``alpha_02``.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotScorePopulation, UnsupportedOrder
from .population import Design, MomentSummary, Population, ScoreSummary, score_summary
from .special import gaussian_moment, hermite, std_normal_cdf, std_normal_pdf, substitution_term


class BivariatePolynomial:
    """Sum of ``c_ab t^a tau^b`` with complex coefficients."""

    def __init__(self, coeffs=None):
        self.coeffs: dict[tuple[int, int], complex] = {}
        for key, c in (coeffs or {}).items():
            if c != 0:
                self.coeffs[key] = self.coeffs.get(key, 0) + complex(c)

    @classmethod
    def constant(cls, c=1.0):
        return cls({(0, 0): c})

    def __add__(self, other):
        out = defaultdict(complex, self.coeffs)
        for key, c in other.coeffs.items():
            out[key] += c
        return BivariatePolynomial(out)

    def __mul__(self, other):
        if isinstance(other, BivariatePolynomial):
            out = defaultdict(complex)
            for (a1, b1), c1 in self.coeffs.items():
                for (a2, b2), c2 in other.coeffs.items():
                    out[(a1 + a2, b1 + b2)] += c1 * c2
            return BivariatePolynomial(out)
        return BivariatePolynomial({k: c * other for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    @property
    def degree(self) -> int:
        return max((a + b for a, b in self.coeffs), default=0)

    @property
    def min_degree(self) -> int:
        return min((a + b for a, b in self.coeffs), default=0)

    def __call__(self, t, tau):
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        acc = np.zeros(np.broadcast(t, tau).shape, dtype=complex)
        for (a, b), c in self.coeffs.items():
            acc = acc + c * t**a * tau**b
        return complex(acc) if acc.ndim == 0 else acc

    def __repr__(self):
        terms = " + ".join(f"({c:.6g}) t^{a} tau^{b}" for (a, b), c in sorted(self.coeffs.items()))
        return f"BivariatePolynomial({terms or '0'})"


@dataclass(frozen=True)
class Polynomial:
    """Univariate polynomial in ``t``; ``coeffs[k]`` multiplies ``t^k``."""

    coeffs: tuple[complex, ...]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros(t.shape, dtype=complex)
        for c in reversed(self.coeffs):
            acc = acc * t + c
        return complex(acc) if acc.ndim == 0 else acc

    def __add__(self, other):
        m = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0j] * (m - len(self.coeffs))
        b = list(other.coeffs) + [0j] * (m - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    def coefficient(self, k: int) -> complex:
        return self.coeffs[k] if k < len(self.coeffs) else 0j

    def it_coefficient(self, v: int) -> complex:
        """Coefficient of ``(it)^v``."""
        return self.coefficient(v) / (1j) ** v


def _power_poly(mixed_m: np.ndarray, k: int) -> BivariatePolynomial:
    """``E (t Z~ + tau xi~)^k`` as a polynomial, from one element's (or summed) mixed moments."""
    return BivariatePolynomial(
        {(a, k - a): math.comb(k, a) * mixed_m[a, k - a] for a in range(k + 1)}
    )


def cumulant_poly(summary: MomentSummary, m: int) -> BivariatePolynomial:
    """``N^{-m/2} P_{m,N}(t, tau)`` for ``m`` in {0, 1, 2}."""
    if m == 0:
        return BivariatePolynomial.constant(1.0)
    if m not in (1, 2):
        raise UnsupportedOrder(f"cumulant polynomial of order {m} is not constructed")
    total = summary.mixed.sum(axis=0)
    p1 = (1j**3 / 6) * _power_poly(total, 3)
    if m == 1:
        return p1
    squares = defaultdict(complex)
    for a1 in range(3):
        for a2 in range(3):
            c = math.comb(2, a1) * math.comb(2, a2) * math.fsum(
                summary.mixed[:, a1, 2 - a1] * summary.mixed[:, a2, 2 - a2]
            )
            squares[(a1 + a2, 4 - a1 - a2)] += c
    fourth = _power_poly(total, 4) + BivariatePolynomial(squares) * -3.0
    return (1j**4 / 24) * fourth + 0.5 * (p1 * p1)


def integrate_out_tau(poly: BivariatePolynomial) -> Polynomial:
    """Replace ``tau^b`` by the standard normal moment ``E tau^b``."""
    deg = max((a for a, _ in poly.coeffs), default=0)
    out = [0j] * (deg + 1)
    for (a, b), c in poly.coeffs.items():
        out[a] += c * gaussian_moment(b)
    return Polynomial(tuple(out))


@dataclass(frozen=True)
class QSeries:
    """``Q_k(t) = exp(-t^2/2) sum_{m<=k} N^{-m/2} G_m(t)``."""

    k: int
    G: tuple[Polynomial, ...]

    @property
    def poly(self) -> Polynomial:
        out = self.G[0]
        for g in self.G[1:]:
            out = out + g
        return out

    def __call__(self, t):
        return np.exp(-0.5 * np.asarray(t, dtype=float) ** 2) * self.poly(t)

    def at_zero(self) -> complex:
        return self.poly(0.0)

    def normalized(self, t):
        """Q_k(t) / Q_k(0), the exact ratio."""
        return self(t) / self.at_zero()

    def first_order_poly(self) -> Polynomial:
        """Polynomial factor of the normalization expanded to first order in 1/N."""
        out = list(self.poly.coeffs)
        if self.k >= 2:
            out[0] -= self.G[2](0.0)
        return Polynomial(tuple(out))

    def first_order(self, t):
        return np.exp(-0.5 * np.asarray(t, dtype=float) ** 2) * self.first_order_poly()(t)


def q_series(summary: MomentSummary, k: int) -> QSeries:
    if k not in (0, 1, 2):
        raise UnsupportedOrder(f"q_series of order {k} is not constructed")
    return QSeries(k, tuple(integrate_out_tau(cumulant_poly(summary, m)) for m in range(k + 1)))


@dataclass(frozen=True)
class EdgeworthApproximant:
    """Order-``j`` approximant: ch.f. ``W_j(t)`` and CDF ``WW_j(u)``.

    Both are driven by ``terms``, the coefficients of ``(it)^v exp(-t^2/2)``;
    the CDF applies ``(it)^v exp(-t^2/2) -> -phi(u) H_{v-1}(u)``.
    """

    order: int
    terms: dict = field(default_factory=dict)
    lambda1: float = 0.0
    lambda2: float = 0.0
    alpha02: float = 0.0
    sigma2: float = 1.0
    n: int = 1
    p: float = 0.0
    q: float = 1.0

    def chf(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros(t.shape, dtype=complex)
        for v, c in self.terms.items():
            acc = acc + c * (1j * t) ** v
        out = np.exp(-0.5 * t * t) * acc
        return complex(out) if out.ndim == 0 else out

    def cdf(self, u):
        u = np.asarray(u, dtype=float)
        acc = np.zeros(u.shape)
        for v, c in sorted(self.terms.items()):
            acc = acc + c * substitution_term(v, u)
        return float(acc) if acc.ndim == 0 else acc

    __call__ = cdf


def edgeworth(summary: MomentSummary, j: int) -> EdgeworthApproximant:
    if j not in (1, 2, 3):
        raise UnsupportedOrder(f"approximant order {j} is not constructed")
    n, s2 = summary.n, summary.sigma2
    lam1, lam2, a02 = summary.lambda1, summary.lambda2, summary.a(0, 2)
    terms = {0: 1.0}
    if j >= 2:
        terms[3] = lam1 / (6 * math.sqrt(n) * s2**1.5)
    if j == 3:
        terms[6] = lam1**2 / (72 * n * s2**3)
        terms[4] = lam2 / (24 * n * s2**2)
        terms[2] = summary.p * summary.q * a02 / (2 * n * s2)
    return EdgeworthApproximant(j, terms, lam1, lam2, a02, s2, n, summary.p, summary.q)


def chf_approximant(summary: MomentSummary, j: int) -> Callable:
    return edgeworth(summary, j).chf


def cdf_approximant(summary: MomentSummary, j: int) -> Callable:
    return edgeworth(summary, j).cdf


def score_cdf_approximant(scores: ScoreSummary | Population, design: Design) -> Callable:
    """Three-term CDF approximant written through the standardized score moments A_3, A_4."""
    if isinstance(scores, Population):
        scores = score_summary(scores)
    elif not isinstance(scores, ScoreSummary):
        raise NotScorePopulation("expected a ScoreSummary or score Population")
    design.require_nondegenerate()
    n, p, q = design.n, design.p, design.q
    pq = p * q
    A3, A4 = scores.A3, scores.A4

    def cdf(u):
        u = np.asarray(u, dtype=float)
        bracket = (
            hermite(2, u) * (1 - 2 * p) / (6 * math.sqrt(n * q)) * A3
            + hermite(5, u) * (1 - 4 * pq) / (72 * n * q) * A3**2
            + hermite(3, u) / (24 * n * q) * ((1 - 6 * pq) * A4 - 3 * (1 - 4 * pq))
            + hermite(1, u) * p / (2 * n)
        )
        out = std_normal_cdf(u) - std_normal_pdf(u) * bracket
        return float(out) if np.ndim(out) == 0 else out

    return cdf
