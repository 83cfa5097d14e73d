"""Exact law of the sample sum, by dynamic programming and by subset enumeration,
plus a seeded Monte Carlo sampler.

All sums live on the common lattice of the population: ``S = n * offset + k * step``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import BudgetExceeded, TooLarge
from .population import Design, MomentSummary, Population, _fraction_str

DP_BUDGET = 10**8
ENUMERATION_MAX_N = 20


@dataclass(frozen=True)
class ExactDistribution:
    """Lattice pmf of ``S_n``: ``P{S = offset + k * step} = probs[k]``."""

    offset: Fraction
    step: Fraction
    probs: np.ndarray
    design: Design

    @cached_property
    def values(self) -> np.ndarray:
        return float(self.offset) + float(self.step) * np.arange(len(self.probs))

    @cached_property
    def _cum(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.probs)))

    @cached_property
    def _tail(self) -> np.ndarray:
        # _tail[k] = P{S >= value_k}, summed from the top to keep small tails accurate
        return np.concatenate((np.cumsum(self.probs[::-1])[::-1], [0.0]))

    def _count_below(self, x) -> np.ndarray:
        """Number of lattice points strictly below ``x``."""
        x = np.asarray(x, dtype=float)
        k = np.ceil((x - float(self.offset)) / float(self.step) - 1e-9)
        return np.clip(k, 0, len(self.probs)).astype(np.int64)

    def cdf(self, x):
        """Left-continuous ``P{S < x}``."""
        out = self._cum[self._count_below(x)]
        return float(out) if np.ndim(out) == 0 else out

    def cdf_right(self, x):
        """``P{S <= x}``."""
        x = np.asarray(x, dtype=float)
        k = np.floor((x - float(self.offset)) / float(self.step) + 1e-9) + 1
        out = self._cum[np.clip(k, 0, len(self.probs)).astype(np.int64)]
        return float(out) if np.ndim(out) == 0 else out

    def sf(self, x):
        """``P{S >= x}`` without cancellation."""
        out = self._tail[self._count_below(x)]
        return float(out) if np.ndim(out) == 0 else out

    def mean(self) -> float:
        return math.fsum(self.values * self.probs)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        keep = self.probs > 0
        return self.values[keep], self.probs[keep]

    def standardized_atoms(self, gamma: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
        """Atoms of ``(S - n gamma) / sigma sqrt(n)``."""
        n = self.design.n
        v, w = self.atoms()
        return (v - n * gamma) / (sigma * math.sqrt(n)), w

    def standardized_cdf(self, summary: MomentSummary):
        """``u -> P{S < u sigma sqrt(n) + n gamma}``."""
        scale = summary.sigma * math.sqrt(summary.n)
        shift = summary.n * summary.gamma
        return lambda u: self.cdf(np.asarray(u, dtype=float) * scale + shift)

    def chf(self, t, gamma: float, sigma: float):
        """``E exp(i t (S - n gamma) / sigma sqrt(n))``."""
        u, w = self.standardized_atoms(gamma, sigma)
        t = np.asarray(t, dtype=float)
        out = np.exp(1j * np.multiply.outer(t, u)) @ w
        return complex(out) if np.ndim(out) == 0 else out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["value", "probability"])
        for k, p in enumerate(self.probs):
            if p > 0:
                writer.writerow([_fraction_str(self.offset + k * self.step), f"{p:.17g}"])
        return buf.getvalue()


def exact_moments(dist: ExactDistribution, r: int) -> float:
    """Central moment ``E (S - ES)^r``."""
    if not 1 <= r <= 8:
        raise ValueError("moment order must be in 1..8")
    v, w = dist.atoms()
    mu = math.fsum(v * w)
    return math.fsum(w * (v - mu) ** r)


def _trimmed(offset: Fraction, step: Fraction, probs: np.ndarray, design: Design) -> ExactDistribution:
    nz = np.flatnonzero(probs)
    lo, hi = nz[0], nz[-1] + 1
    return ExactDistribution(offset + lo * step, step, probs[lo:hi].copy(), design)


def dp_cells(pop: Population, design: Design) -> int:
    return (pop.N + 1) * (design.n + 1) * pop.lattice.span


def exact_distribution(pop: Population, design: Design, budget: int = DP_BUDGET) -> ExactDistribution:
    """Exact pmf of the sample sum.

    ``g[j]`` is the law of the lattice index of the sum of a uniformly chosen
    ``j``-subset of the elements seen so far; adding element ``m`` mixes
    "not chosen" and "chosen" with weights ``1 - j/m`` and ``j/m``, so every
    array stays a probability vector (no binomial-coefficient overflow).
    """
    cells = dp_cells(pop, design)
    if cells > budget:
        raise BudgetExceeded(cells, budget)
    lat = pop.lattice
    n, N = design.n, pop.N
    width = n * (lat.span - 1) + 1
    g = np.zeros((n + 1, width))
    g[0, 0] = 1.0
    for m, (idx, w) in enumerate(zip(lat.indices, lat.weights), start=1):
        jmax = min(m, n)
        jmin = max(0, n - (N - m))
        new = np.zeros_like(g)
        j = np.arange(jmin, jmax + 1)
        keep = j[j < m]
        new[keep] = (1 - keep / m)[:, None] * g[keep]
        take = j[j >= 1]
        if len(take):
            conv = np.zeros((len(take), width))
            src = g[take - 1]
            for k, wk in zip(idx, w):
                conv[:, k:] += wk * src[:, : width - k]
            new[take] += (take / m)[:, None] * conv
        g = new
    return _trimmed(n * lat.offset, lat.step, g[n], design)


def enumerate_subsets(pop: Population, design: Design) -> ExactDistribution:
    """Exact pmf by averaging the independent-sum law over every ``n``-subset."""
    N, n = pop.N, design.n
    if N > ENUMERATION_MAX_N:
        raise TooLarge(f"enumeration is limited to N <= {ENUMERATION_MAX_N}, got {N}")
    lat = pop.lattice
    pmfs = []
    for idx, w in zip(lat.indices, lat.weights):
        v = np.zeros(int(idx.max()) + 1)
        np.add.at(v, idx, w)
        pmfs.append(v)
    width = n * (lat.span - 1) + 1
    acc = np.zeros(width)
    count = 0
    for subset in itertools.combinations(range(N), n):
        law = np.ones(1)
        for m in subset:
            law = np.convolve(law, pmfs[m])
        acc[: len(law)] += law
        count += 1
    return _trimmed(n * lat.offset, lat.step, acc / count, design)


# ---------------------------------------------------------------------------
# Monte Carlo


def make_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, replicate)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(replicate)])))


@dataclass(frozen=True)
class MonteCarloSample:
    """Sampled sums as common-lattice indices: ``S = offset + k * step``."""

    offset: Fraction
    step: Fraction
    indices: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return float(self.offset) + float(self.step) * self.indices

    def ecdf(self, x):
        """Empirical left-continuous CDF ``#{S < x} / count``."""
        s = np.sort(self.values)
        out = np.searchsorted(s, np.asarray(x, dtype=float), side="left") / len(s)
        return float(out) if np.ndim(out) == 0 else out


def sample_srswor(pop: Population, design: Design, count: int, seed: int,
                  replicate: int = 0, chunk: int = 2**20) -> MonteCarloSample:
    """Draw ``count`` sample sums: partial Fisher-Yates for the indices, then one
    inverse-CDF draw from each chosen element's law."""
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = make_rng(seed, replicate)
    lat = pop.lattice
    N, n = pop.N, design.n
    width = max(len(ix) for ix in lat.indices)
    cum = np.ones((N, width))
    vals = np.zeros((N, width), dtype=np.int64)
    for m, (idx, w) in enumerate(zip(lat.indices, lat.weights)):
        cum[m, : len(w)] = np.cumsum(w)
        cum[m, len(w) - 1:] = 1.0
        vals[m, : len(idx)] = idx
        vals[m, len(idx):] = idx[-1]
    per = max(1, chunk // max(n * width, 1))
    out = []
    done = 0
    while done < count:
        c = min(per, count - done)
        perm = np.tile(np.arange(N), (c, 1))
        rows = np.arange(c)
        for i in range(n):
            j = i + (rng.random(c) * (N - i)).astype(np.int64)
            perm[rows, i], perm[rows, j] = perm[rows, j], perm[rows, i].copy()
        chosen = perm[:, :n]
        u = rng.random((c, n))
        k = (u[..., None] >= cum[chosen]).sum(axis=-1)
        k = np.minimum(k, width - 1)
        out.append(vals[chosen, k].sum(axis=1))
        done += c
    return MonteCarloSample(n * lat.offset, lat.step, np.concatenate(out))


def ecdf_sup_distance(sample: MonteCarloSample, exact: ExactDistribution) -> float:
    """``sup_x |F_emp(x) - F(x)|``; both are step functions on the same lattice,
    so the sup is attained on lattice points."""
    base = int((exact.offset - sample.offset) / sample.step)
    lo = min(int(sample.indices.min()), base)
    hi = max(int(sample.indices.max()), base + len(exact.probs) - 1)
    emp = np.bincount(sample.indices - lo, minlength=hi - lo + 1) / len(sample.indices)
    ex = np.zeros(hi - lo + 1)
    ex[base - lo: base - lo + len(exact.probs)] = exact.probs
    return float(np.abs(np.cumsum(emp) - np.cumsum(ex)).max())


def dkw_epsilon(count: int, alpha: float = 0.01) -> float:
    """Half-width of the two-sided DKW band at confidence ``1 - alpha``."""
    return math.sqrt(math.log(2 / alpha) / (2 * count))
