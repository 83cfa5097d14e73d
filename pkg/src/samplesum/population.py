"""Populations of independent lattice random elements and their moment summaries.

A population is a sequence of ``N`` independent elements, each a finite-support
lattice law (a single atom encodes a non-random score).  A sample of size ``n``
is drawn without replacement; the summaries below are the scalar moments,
Lyapunov ratios and thresholds that drive the normal and Edgeworth
approximations of the sample sum.

Expectations over ``(Z_m, xi_m)`` are exact finite sums over
``support(Y_m) x {0, 1}`` with ``xi_m ~ Bernoulli(p)`` independent of ``Y_m``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateDesign,
    NotScorePopulation,
    SpecError,
    ZeroSpread,
    ZeroVariance,
)

PROB_TOL = 1e-12
# sigma^2 below this fraction of alpha_20 is treated as zero
ZERO_VARIANCE_RTOL = 1e-14
# threshold constant in T_{j,N}; 0.01 is a common alternative
THRESHOLD_CONST = 0.0126
THRESHOLD_CONST_ALT = 0.01
TILDE_THRESHOLD_CONST = 0.115


def to_fraction(x) -> Fraction:
    """Parse a score or support value into an exact rational."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise SpecError(f"boolean is not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise SpecError(f"non-finite value {x!r}")
        # decimal reading of the float, not its binary expansion
        return Fraction(repr(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"cannot parse {x!r} as a rational") from exc
    raise SpecError(f"unsupported value type {type(x).__name__}")


def _to_prob(x) -> float:
    if isinstance(x, str):
        return float(to_fraction(x))
    if isinstance(x, bool) or not isinstance(x, (int, float, Fraction)):
        raise SpecError(f"probability must be numeric, got {x!r}")
    return float(x)


def fraction_gcd(values: Iterable[Fraction]) -> Fraction:
    """Greatest common divisor of non-negative rationals (0 if all are zero)."""
    values = [abs(Fraction(v)) for v in values if v != 0]
    if not values:
        return Fraction(0)
    den = reduce(math.lcm, (v.denominator for v in values), 1)
    g = reduce(math.gcd, (int(v * den) for v in values), 0)
    return Fraction(g, den)


@dataclass(frozen=True)
class LatticeDistribution:
    """Law on ``offset + k * step``, ``k = 0..len(probs)-1``."""

    offset: Fraction
    step: Fraction
    probs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "offset", Fraction(self.offset))
        object.__setattr__(self, "step", Fraction(self.step))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if self.step <= 0:
            raise SpecError("lattice step must be positive")
        if not self.probs:
            raise SpecError("empty probability vector")
        if any(p < 0 or not math.isfinite(p) for p in self.probs):
            raise SpecError("probabilities must be finite and non-negative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_TOL:
            raise SpecError(f"probabilities sum to {total!r}, not 1")
        if not any(p > 0 for p in self.probs):
            raise SpecError("no positive probability")

    @classmethod
    def from_support(cls, support: Sequence, probs: Sequence) -> "LatticeDistribution":
        if len(support) != len(probs):
            raise SpecError("support and probs differ in length")
        if not support:
            raise SpecError("empty support")
        merged: dict[Fraction, float] = {}
        for x, p in zip(support, probs):
            fx = to_fraction(x)
            merged[fx] = merged.get(fx, 0.0) + _to_prob(p)
        pts = sorted(merged)
        offset = pts[0]
        step = fraction_gcd(x - offset for x in pts) or Fraction(1)
        out = [0.0] * (int((pts[-1] - offset) / step) + 1)
        for x in pts:
            out[int((x - offset) / step)] += merged[x]
        return cls(offset, step, tuple(out))

    @classmethod
    def point(cls, x) -> "LatticeDistribution":
        return cls(to_fraction(x), Fraction(1), (1.0,))

    @cached_property
    def atoms(self) -> list[tuple[Fraction, float]]:
        """Support points with positive mass."""
        return [(self.offset + k * self.step, p) for k, p in enumerate(self.probs) if p > 0]

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([float(x) for x, _ in self.atoms])

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    @property
    def is_degenerate(self) -> bool:
        return len(self.atoms) == 1

    def mean(self) -> float:
        return math.fsum(self.values * self.weights)

    def chf(self, t) -> np.ndarray:
        """E exp(i t Y), vectorized over ``t``."""
        t = np.asarray(t, dtype=float)
        return np.exp(1j * np.multiply.outer(t, self.values)) @ self.weights


@dataclass(frozen=True)
class PopulationElement:
    law: LatticeDistribution

    @classmethod
    def score(cls, x) -> "PopulationElement":
        return cls(LatticeDistribution.point(x))

    @classmethod
    def random(cls, support: Sequence, probs: Sequence) -> "PopulationElement":
        return cls(LatticeDistribution.from_support(support, probs))

    @property
    def is_degenerate(self) -> bool:
        return self.law.is_degenerate


@dataclass(frozen=True)
class CommonLattice:
    """All element values written as ``offset + k * step`` with integer ``k``."""

    offset: Fraction
    step: Fraction
    indices: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]

    @property
    def span(self) -> int:
        return int(max(int(ix.max()) for ix in self.indices)) + 1


@dataclass(frozen=True)
class Population:
    elements: tuple[PopulationElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        if len(self.elements) < 2:
            raise SpecError("a population needs at least two elements")

    @classmethod
    def from_scores(cls, scores: Iterable) -> "Population":
        return cls(tuple(PopulationElement.score(a) for a in scores))

    @property
    def N(self) -> int:
        return len(self.elements)

    @property
    def is_score(self) -> bool:
        return all(e.is_degenerate for e in self.elements)

    @cached_property
    def lattice(self) -> CommonLattice:
        pts = [x for e in self.elements for x, _ in e.law.atoms]
        offset = min(pts)
        step = fraction_gcd(x - offset for x in pts) or Fraction(1)
        indices, weights = [], []
        for e in self.elements:
            indices.append(np.array([int((x - offset) / step) for x, _ in e.law.atoms], dtype=np.int64))
            weights.append(e.law.weights)
        return CommonLattice(offset, step, tuple(indices), tuple(weights))

    def standardized(self, gamma: float, scale: float) -> list[tuple[np.ndarray, np.ndarray]]:
        """Atoms of ``(Y_m - gamma) / scale`` per element, as float arrays."""
        return [((e.law.values - gamma) / scale, e.law.weights) for e in self.elements]

    def chf(self, t) -> np.ndarray:
        """Matrix of ``E exp(i t Y_m)``, shape ``(len(t), N)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([e.law.chf(t) for e in self.elements], axis=-1)

    def to_spec(self) -> list[dict]:
        out = []
        for e in self.elements:
            if e.is_degenerate:
                out.append({"score": _fraction_str(e.law.atoms[0][0])})
            else:
                out.append({
                    "support": [_fraction_str(x) for x, _ in e.law.atoms],
                    "probs": [p for _, p in e.law.atoms],
                })
        return out


def _fraction_str(x: Fraction) -> str:
    """Exact decimal string when the expansion terminates, else ``p/q``."""
    den = x.denominator
    k2 = k5 = 0
    while den % 2 == 0:
        den //= 2
        k2 += 1
    while den % 5 == 0:
        den //= 5
        k5 += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(k2, k5)
    scaled = x * 10**digits
    assert scaled.denominator == 1
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    body = s if digits == 0 else f"{s[:-digits]}.{s[-digits:]}"
    return ("-" if x < 0 else "") + body


@dataclass(frozen=True)
class Design:
    """Simple random sampling of ``n`` out of ``N`` without replacement."""

    n: int
    N: int

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise SpecError("sample size n must be an integer")
        if not 1 <= self.n <= self.N:
            raise SpecError(f"need 1 <= n <= N, got n={self.n}, N={self.N}")

    @property
    def p(self) -> float:
        return self.n / self.N

    @property
    def q(self) -> float:
        return (self.N - self.n) / self.N

    def require_nondegenerate(self):
        if self.n == self.N:
            raise DegenerateDesign("n = N (q = 0) is excluded here")


def population_from_spec(spec: dict) -> tuple[Population, Design]:
    """Build ``(Population, Design)`` from the JSON population-spec mapping."""
    if not isinstance(spec, dict):
        raise SpecError("population spec must be a JSON object")
    try:
        raw = spec["elements"]
        n = spec["n"]
    except KeyError as exc:
        raise SpecError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(raw, list):
        raise SpecError("field 'elements' must be a list")
    elements = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise SpecError(f"elements[{i}] must be an object")
        if "score" in item:
            elements.append(PopulationElement.score(item["score"]))
        elif "support" in item and "probs" in item:
            elements.append(PopulationElement.random(item["support"], item["probs"]))
        else:
            raise SpecError(f"elements[{i}] needs 'score' or 'support'+'probs'")
    pop = Population(tuple(elements))
    return pop, Design(n, pop.N)


def load_spec(path) -> tuple[Population, Design]:
    with open(Path(path)) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError(f"malformed JSON: {exc}") from exc
    return population_from_spec(spec)


# ---------------------------------------------------------------------------
# moments


@dataclass(frozen=True)
class JointLaw:
    """Atoms of ``(Z~_m, xi~_m)`` for one element."""

    z: np.ndarray
    xi: np.ndarray
    w: np.ndarray

    def moment(self, a: int, b: int) -> float:
        return math.fsum(self.w * self.z**a * self.xi**b)

    def abs_moment(self, k: float) -> float:
        return math.fsum(self.w * np.abs(self.z) ** k)


def _centered(pop: Population) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    N = pop.N
    gamma = math.fsum(e.law.mean() for e in pop.elements) / N
    vals = [e.law.values - gamma for e in pop.elements]
    ws = [e.law.weights for e in pop.elements]
    return gamma, vals, ws


def joint_laws(pop: Population, design: Design, gamma: float, sigma: float) -> list[JointLaw]:
    """Joint atoms of the standardized pair ``(Z_m / sigma sqrt(n), (xi_m - p) / sqrt(nq))``."""
    n, p, q = design.n, design.p, design.q
    s = sigma * math.sqrt(n)
    r = math.sqrt(n * q)
    out = []
    for e in pop.elements:
        y = e.law.values - gamma
        w = e.law.weights
        e1 = math.fsum(y * w)
        z = np.concatenate(([-p * e1], y - p * e1)) / s
        xi = np.concatenate(([-p / r], np.full(len(y), q / r)))
        ww = np.concatenate(([q], p * w))
        out.append(JointLaw(z, xi, ww))
    return out


@dataclass(frozen=True)
class MomentSummary:
    N: int
    n: int
    p: float
    q: float
    gamma: float
    sigma2: float
    # alpha[(k, l, i)] = N^-1 sum (E(Y-gamma)^k)^i (E(Y-gamma))^l
    alpha: dict
    lambda1: float
    lambda2: float
    # mixed[m, a, b] = E Z~_m^a xi~_m^b, a + b <= 4
    mixed: np.ndarray = field(repr=False)
    V: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def a(self, k: int, l: int, i: int = 1) -> float:
        return self.alpha[(k, l, i)]

    def mixed_sum(self, a: int, b: int) -> float:
        return math.fsum(self.mixed[:, a, b])

    @property
    def sum_z2(self) -> float:
        return self.mixed_sum(2, 0)

    @property
    def sum_z3(self) -> float:
        return self.mixed_sum(3, 0)

    @property
    def sum_z4(self) -> float:
        return self.mixed_sum(4, 0)

    @property
    def sum_z2_sq(self) -> float:
        return math.fsum(self.mixed[:, 2, 0] ** 2)

    @property
    def sum_z2xi(self) -> float:
        return self.mixed_sum(2, 1)

    @property
    def sum_z3_sq(self) -> float:
        return math.fsum(self.mixed[:, 3, 0] ** 2)

    @property
    def cov_sum(self) -> float:
        return self.mixed_sum(1, 1)

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "gamma": self.gamma,
            "sigma2": self.sigma2,
            "alpha": {f"{k}{l}" + (f"^({i})" if i != 1 else ""): v for (k, l, i), v in sorted(self.alpha.items())},
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "sum_EZ2": self.sum_z2,
            "sum_EZ3": self.sum_z3,
            "sum_EZ4": self.sum_z4,
            "sum_EZ2_squared": self.sum_z2_sq,
            "sum_EZ2xi": self.sum_z2xi,
            "sum_EZ3_squared": self.sum_z3_sq,
            "sum_cov_Z_xi": self.cov_sum,
            "V": {str(k): v for k, v in sorted(self.V.items())},
        }


ALPHA_INDEX = [
    (2, 0, 1), (0, 2, 1), (3, 0, 1), (2, 1, 1), (0, 3, 1),
    (4, 0, 1), (3, 1, 1), (2, 2, 1), (0, 4, 1), (2, 0, 2), (1, 0, 1),
]


def _check_variance(sigma2: float, alpha20: float):
    if alpha20 <= 0 or sigma2 <= ZERO_VARIANCE_RTOL * alpha20:
        raise ZeroVariance(f"sigma^2 = {sigma2!r} is numerically zero (alpha_20 = {alpha20!r})")


def moment_summary(pop: Population, design: Design) -> MomentSummary:
    """Centralized population moments, Lambda_1, Lambda_2 and mixed moments of (Z~, xi~)."""
    design.require_nondegenerate()
    N, n, p, q = pop.N, design.n, design.p, design.q
    gamma, ys, ws = _centered(pop)
    ek = {k: np.array([math.fsum(w * y**k) for y, w in zip(ys, ws)]) for k in range(1, 5)}
    e1 = ek[1]

    def alpha(k, l, i=1):
        base = ek[k] ** i if k > 0 else np.ones(N)
        return math.fsum(base * e1**l) / N

    al = {key: alpha(*key) for key in ALPHA_INDEX}
    sigma2 = al[(2, 0, 1)] - p * al[(0, 2, 1)]
    _check_variance(sigma2, al[(2, 0, 1)])
    lam1 = al[(3, 0, 1)] - 3 * p * al[(2, 1, 1)] + 2 * p**2 * al[(0, 3, 1)]
    lam2 = (
        al[(4, 0, 1)] - 4 * p * al[(3, 1, 1)] + 12 * p**2 * al[(2, 2, 1)]
        - 6 * p**3 * al[(0, 4, 1)] - 3 * p * al[(2, 0, 2)]
        - 3 * q * (al[(2, 0, 1)] - 2 * p * al[(0, 2, 1)]) ** 2
    )
    laws = joint_laws(pop, design, gamma, math.sqrt(sigma2))
    mixed = np.zeros((N, 5, 5))
    for m, jl in enumerate(laws):
        for a in range(5):
            for b in range(5 - a):
                mixed[m, a, b] = jl.moment(a, b)
    V = {k: math.fsum(math.fsum(w * np.abs(y) ** k) for y, w in zip(ys, ws)) / N for k in range(1, 6)}
    return MomentSummary(N, n, p, q, gamma, sigma2, al, lam1, lam2, mixed, V)


def abs_central_moment(pop: Population, k: float) -> float:
    """``V_{k,N} = N^-1 sum E|Y_m - gamma|^k`` for real ``k``."""
    _, ys, ws = _centered(pop)
    return math.fsum(math.fsum(w * np.abs(y) ** k) for y, w in zip(ys, ws)) / pop.N


# ---------------------------------------------------------------------------
# scores


@dataclass(frozen=True)
class ScoreSummary:
    abar: float
    b2: float
    atilde: np.ndarray = field(repr=False)
    A3: float
    A4: float
    B3: float

    @property
    def b(self) -> float:
        return math.sqrt(self.b2)

    def A(self, k: int) -> float:
        return math.fsum(self.atilde**k) / len(self.atilde)


def score_summary(pop: Population) -> ScoreSummary:
    if not pop.is_score:
        raise NotScorePopulation("score_summary needs every element to be non-random")
    a = [e.law.atoms[0][0] for e in pop.elements]
    N = len(a)
    abar = sum(a, Fraction(0)) / N
    b2 = sum(((x - abar) ** 2 for x in a), Fraction(0)) / N
    if b2 == 0:
        raise ZeroSpread("all scores are equal")
    b = math.sqrt(b2)
    at = np.array([float(x - abar) for x in a]) / b
    return ScoreSummary(
        abar=float(abar),
        b2=float(b2),
        atilde=at,
        A3=math.fsum(at**3) / N,
        A4=math.fsum(at**4) / N,
        B3=math.fsum(np.abs(at) ** 3) / N,
    )


# ---------------------------------------------------------------------------
# Lyapunov ratios and thresholds


@dataclass(frozen=True)
class LyapunovRatios:
    k: float
    beta: float
    beta1: float
    beta2: float
    beta_hat: float
    mu: float
    kappa: float


def lyapunov_ratios(pop: Population, design: Design, k: float, summary: MomentSummary | None = None) -> LyapunovRatios:
    """All order-``k`` ratios.

    ``beta_hat`` pairs ``beta^(2)`` with ``sigma^2 / alpha_20`` so it is
    invariant under rescaling of the population.
    """
    s = summary or moment_summary(pop, design)
    N, n, p, q = s.N, s.n, s.p, s.q
    sig = s.sigma
    laws = joint_laws(pop, design, s.gamma, sig)
    beta = math.fsum(jl.abs_moment(k) for jl in laws)
    _, ys, ws = _centered(pop)
    e1 = np.array([math.fsum(w * y) for y, w in zip(ys, ws)])
    norm = n ** ((k - 2) / 2) * sig**k
    b1 = math.fsum(math.fsum(w * np.abs(y - p * m1) ** k) for y, w, m1 in zip(ys, ws, e1)) / N / norm
    b2 = math.fsum(np.abs(e1) ** k) / N / norm
    a20 = s.a(2, 0)
    mu = abs_central_moment(pop, k) / norm
    kappa = (q ** (k - 1) + p ** (k - 1)) * (n * q) ** (-(k - 2) / 2)
    return LyapunovRatios(k, beta, b1, b2, b1 + s.sigma2 / a20 * b2, mu, kappa)


@dataclass(frozen=True)
class RatioSummary:
    delta: float
    ratios: dict  # k -> LyapunovRatios
    T: dict  # j -> T_{j,N}
    T_tilde: dict  # j -> T~_j
    threshold_const: float

    def beta(self, k):
        return self.ratios[k].beta

    def beta_hat(self, k):
        return self.ratios[k].beta_hat

    def mu(self, k):
        return self.ratios[k].mu

    def kappa(self, k):
        return self.ratios[k].kappa

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "threshold_const": self.threshold_const,
            "ratios": {
                f"{k:g}": {
                    "beta": r.beta, "beta1": r.beta1, "beta2": r.beta2,
                    "beta_hat": r.beta_hat, "mu": r.mu, "kappa": r.kappa,
                }
                for k, r in sorted(self.ratios.items())
            },
            "T": {str(j): v for j, v in sorted(self.T.items())},
            "T_tilde": {str(j): v for j, v in sorted(self.T_tilde.items())},
        }


def ratio_orders(delta: float) -> list[float]:
    return sorted({2.0, 2 + delta, 3.0, 3 + delta, 4.0, 4 + delta})


def ratio_summary(pop: Population, design: Design, delta: float = 1.0,
                  threshold_const: float = THRESHOLD_CONST) -> RatioSummary:
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    s = moment_summary(pop, design)
    ratios = {k: lyapunov_ratios(pop, design, k, s) for k in ratio_orders(delta)}
    nq = design.n * design.q
    T, Tt = {}, {}
    for j in (1, 2, 3):
        k = min(3.0, 1 + j + delta)
        r = ratios[k]
        T[j] = threshold_const * max(1 / r.beta_hat, 1 / (r.beta + nq**-0.5))
        Tt[j] = TILDE_THRESHOLD_CONST / r.mu
    return RatioSummary(delta, ratios, T, Tt, threshold_const)


# ---------------------------------------------------------------------------
# Lindeberg


@dataclass(frozen=True)
class LindebergResult:
    eps: float
    value: float
    cond_i: float
    cond_ii: float
    D: tuple[int, ...]


def lindeberg(pop: Population, design: Design, eps: float) -> LindebergResult:
    """``L_2N(eps) = sum_m E Z~_m^2 I{|Z~_m| >= eps}`` with the two sufficient conditions.

    The conditions use ``Y_m - gamma`` in place of ``Y_m`` so they are
    shift invariant, like ``L_2N`` itself.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    s = moment_summary(pop, design)
    p, q, n = s.p, s.q, s.n
    scale = s.sigma * math.sqrt(n)
    laws = joint_laws(pop, design, s.gamma, s.sigma)
    value = math.fsum(math.fsum(jl.w * jl.z**2 * (np.abs(jl.z) >= eps)) for jl in laws)
    _, ys, ws = _centered(pop)
    ci, D, cii = [], [], []
    for m, (y, w) in enumerate(zip(ys, ws)):
        m1 = math.fsum(w * y)
        d = y - p * m1
        ci.append(math.fsum(w * d**2 * (np.abs(d) > eps * scale)))
        if p * abs(m1) > eps * scale:
            D.append(m)
            cii.append(m1**2)
    denom = n * s.sigma2
    return LindebergResult(eps, value, math.fsum(ci) / denom, q * p * math.fsum(cii) / denom, tuple(D))
