"""Cramer-type tail-ratio approximants.

For ``P_N(x) = P{S < x sigma sqrt(n) + n gamma}`` the upper and lower tail ratios
are approximated by

    (1 - P_N(x)) / (1 - Phi(x)) ~ exp{ x^3 L(x / sqrt(N)) / sqrt(N)}
    P_N(-x) / Phi(-x)           ~ exp{-x^3 L(-x / sqrt(N)) / sqrt(N)}

with ``L(v) = l0 + l1 v``.  The coefficients are dimensionless: the sums over
``Z~_m`` are scaled by ``sqrt(N)`` (``l0``) and ``N`` (``l1``).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotScorePopulation, RangeWarning
from .oracle import ExactDistribution
from .population import Design, MomentSummary, Population, ScoreSummary, score_summary
from .special import std_normal_cdf, std_normal_sf

RANGE_CONST = 0.5

# ``square_of_sum`` uses (sum E Z~^3)^2, the term that the score-case reduction needs;
# ``sum_of_squares`` uses sum (E Z~^3)^2, which vanishes at the dimensionless scale.
L1_VARIANTS = ("square_of_sum", "sum_of_squares")


@dataclass(frozen=True)
class TailRatioModel:
    l0: float
    l1: float
    N: int
    terms: int = 2  # 1: L = l0, 2: L = l0 + l1 v
    verified: bool = True  # False when l1 comes from the general path on a non-score population

    def L(self, v):
        v = np.asarray(v, dtype=float)
        return self.l0 + (self.l1 * v if self.terms >= 2 else 0.0 * v)

    def exponent(self, x, side: str = "upper"):
        """``x^3 L(x/sqrt(N)) / sqrt(N)`` (upper) or its mirror (lower)."""
        x = np.asarray(x, dtype=float)
        rn = math.sqrt(self.N)
        if side == "upper":
            return x**3 * self.L(x / rn) / rn
        if side == "lower":
            return -(x**3) * self.L(-x / rn) / rn
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def ld_coefficients_general(summary: MomentSummary, l1_variant: str = "square_of_sum") -> tuple[float, float]:
    """``(l0, l1)`` from the mixed moments of ``(Z~_m, xi~_m)``."""
    if l1_variant not in L1_VARIANTS:
        raise ValueError(f"l1_variant must be one of {L1_VARIANTS}")
    N = summary.N
    s = summary
    l0 = math.sqrt(N) * s.sum_z3 / 6
    last = s.sum_z3**2 if l1_variant == "square_of_sum" else s.sum_z3_sq
    l1 = N / 8 * (s.sum_z4 / 3 - s.sum_z2_sq - s.sum_z2xi**2 - last)
    return l0, l1


def ld_coefficients_scores(scores: ScoreSummary | Population, design: Design) -> tuple[float, float]:
    """Closed-form ``(l0, l1)`` for non-random elements, in the standardized scores ``A_3``, ``A_4``."""
    if isinstance(scores, Population):
        scores = score_summary(scores)
    elif not isinstance(scores, ScoreSummary):
        raise NotScorePopulation("expected a ScoreSummary or score Population")
    design.require_nondegenerate()
    p, q = design.p, design.q
    pq = p * q
    l0 = (1 - 2 * p) * scores.A3 / (6 * math.sqrt(pq))
    l1 = (1 - 6 * pq) / (24 * pq) * scores.A4 - (1 - 2 * p) ** 2 / (8 * pq) - scores.A3**2 / (8 * pq)
    return l0, l1


def tail_model(summary: MomentSummary, terms: int = 2, is_score: bool = False,
               l1_variant: str = "square_of_sum") -> TailRatioModel:
    l0, l1 = ld_coefficients_general(summary, l1_variant)
    return TailRatioModel(l0, l1, summary.N, terms, verified=is_score)


def tail_ratio(model: TailRatioModel, x, side: str = "upper"):
    """Approximate ``(1 - P_N(x)) / (1 - Phi(x))`` or ``P_N(-x) / Phi(-x)`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be non-negative; pick the side instead")
    limit = RANGE_CONST * math.sqrt(model.N)
    if np.any(x > limit):
        warnings.warn(f"x beyond {limit:.4g} = {RANGE_CONST} sqrt(N); the expansion is not meaningful there",
                      RangeWarning, stacklevel=2)
    out = np.exp(model.exponent(x, side))
    return float(out) if out.ndim == 0 else out


def exact_tail_ratio(exact: ExactDistribution, summary: MomentSummary, x, side: str = "upper"):
    """The same ratios from the exact law."""
    x = np.asarray(x, dtype=float)
    scale = summary.sigma * math.sqrt(summary.n)
    shift = summary.n * summary.gamma
    if side == "upper":
        out = exact.sf(x * scale + shift) / std_normal_sf(x)
    elif side == "lower":
        out = exact.cdf(-x * scale + shift) / std_normal_cdf(-x)
    else:
        raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out
