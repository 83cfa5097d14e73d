"""Error functionals against the exact law: sup-distances, rate terms of the
Berry-Esseen type bounds, oscillation bounds ``chi`` and moment residuals.

The bounds involve unknown universal constants, so nothing here asserts that a
bound holds; the functions report the bracketed rate expressions and the
measured errors so that constants can be fitted empirically.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .charfn import ChfEvaluator
from .expansion import edgeworth
from .oracle import DP_BUDGET, ExactDistribution, exact_distribution, exact_moments
from .population import (
    Design,
    MomentSummary,
    Population,
    RatioSummary,
    lindeberg,
    moment_summary,
    ratio_summary,
)

CHI_GRID_CONST = 0.01
CHI_REFINE_ROUNDS = 3
CHI_CHUNK = 4096
D0_CONST = 0.04
# numerators below this fraction of E|S - ES|^r are treated as rounding noise
MOMENT_NOISE_RTOL = 1e-10


# ---------------------------------------------------------------------------
# sup distances


def sup_distance(exact: ExactDistribution, approx: Callable, summary: MomentSummary,
                 gap_points: int = 8, tail_span: float = 10.0,
                 approx_right: Callable | None = None) -> float:
    """``sup_u |P{S < u sigma sqrt(n) + n gamma} - approx(u)|``.

    Both one-sided limits of the exact CDF are compared at every atom of the
    standardized law.  Edgeworth approximants are not monotone, so each gap
    between atoms (and a stretch beyond each end) is also sampled.
    ``approx`` is taken as continuous unless its right limits are supplied
    through ``approx_right``.
    """
    u, w = exact.standardized_atoms(summary.gamma, summary.sigma)
    right = np.cumsum(w)
    left = right - w
    A = np.asarray(approx(u), dtype=float)
    Ar = A if approx_right is None else np.asarray(approx_right(u), dtype=float)
    best = max(np.abs(left - A).max(), np.abs(right - Ar).max())
    if gap_points > 0:
        frac = np.arange(1, gap_points + 1) / (gap_points + 1)
        if len(u) > 1:
            g = u[:-1, None] + np.diff(u)[:, None] * frac[None, :]
            best = max(best, np.abs(right[:-1, None] - approx(g.ravel()).reshape(g.shape)).max())
        below = u[0] - tail_span * (1 - frac)
        above = u[-1] + tail_span * frac
        best = max(best, np.abs(approx(below)).max(), np.abs(1 - approx(above)).max())
    return float(min(max(best, 0.0), 1.0))


def chf_error(evaluator: ChfEvaluator, j: int, t_max: float = 3.0, points: int = 121) -> float:
    """``max_{|t| <= t_max} |phi_n(t) - W_j(t)|`` on a uniform grid."""
    t = np.linspace(-t_max, t_max, points)
    W = edgeworth(evaluator.summary, j).chf(t)
    return float(np.abs(evaluator.phi_n(t) - W).max())


# ---------------------------------------------------------------------------
# oscillation bounds


@dataclass(frozen=True)
class ChiBounds:
    d0: float
    d1: float
    chi1: float
    chi2: float
    sup1: float  # sup (1/N) sum |E e^{itY}|
    sup2: float  # sup (1/N) |sum E e^{itY}|

    @property
    def chi(self) -> float:
        return min(self.chi1, self.chi2)


def _chf_moduli(pop: Population, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out1, out2 = [], []
    for lo in range(0, len(t), CHI_CHUNK):
        c = pop.chf(t[lo:lo + CHI_CHUNK])
        out1.append(np.abs(c).mean(axis=1))
        out2.append(np.abs(c.mean(axis=1)))
    return np.concatenate(out1), np.concatenate(out2)


def _sup(fn: Callable, t: np.ndarray, vals: np.ndarray, rounds: int) -> float:
    best = float(vals.max())
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    top = interior[np.argsort(vals[interior])[::-1][:rounds]]
    for i in top:
        res = optimize.minimize_scalar(lambda x: -fn(x), bounds=(t[i - 1], t[i + 1]),
                                       method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return min(best, 1.0)


def chi_bounds(pop: Population, design: Design, d0: float, d1: float) -> ChiBounds:
    """``chi_1N``, ``chi_2N`` on ``d0 <= |t| <= d1`` (raw ``t`` units of ``Y``).

    The ch.f. moduli are even in ``t`` and periodic with period ``2 pi / h``
    (``h`` the common lattice step), so the search covers at most one period.
    An empty range contributes 0.  ``ln d1`` is clipped at 0 so the bounds stay
    non-negative when ``d1 < 1``.
    """
    if not d0 < d1:
        return ChiBounds(d0, d1, 0.0, 0.0, 0.0, 0.0)
    n, q = design.n, design.q
    period = 2 * math.pi / float(pop.lattice.step)
    hi = min(d1, d0 + period)
    gamma = math.fsum(e.law.mean() for e in pop.elements) / pop.N
    radius = max(float(np.abs(e.law.values - gamma).max()) for e in pop.elements)
    step = CHI_GRID_CONST / radius if radius > 0 else hi - d0
    t = np.linspace(d0, hi, max(3, int(math.ceil((hi - d0) / step)) + 1))
    v1, v2 = _chf_moduli(pop, t)
    s1 = _sup(lambda x: _chf_moduli(pop, np.array([x]))[0][0], t, v1, CHI_REFINE_ROUNDS)
    s2 = _sup(lambda x: _chf_moduli(pop, np.array([x]))[1][0], t, v2, CHI_REFINE_ROUNDS)
    lead = math.sqrt(n * q) * max(math.log(d1), 0.0)
    chi1 = lead * math.exp(-n * (1 - s1))
    chi2 = lead * math.exp(-2 * n * q * (1 - s2))
    return ChiBounds(d0, d1, chi1, chi2, s1, s2)


# ---------------------------------------------------------------------------
# rate terms


def rate_terms(pop: Population, design: Design, delta: float = 1.0, j: int = 1,
               ratios: RatioSummary | None = None, with_chi: bool = False) -> dict:
    """Bracketed rate expressions of the order-``j`` bounds, constants omitted.

    Keys: ``beta`` (Lyapunov-ratio form), ``beta_hat`` (``j >= 2``), ``mu``,
    and for ``j >= 2`` the ``chi`` argument pairs ``chi_args_beta`` /
    ``chi_args_mu`` in raw ``t`` units.  ``mu_bound`` is the factor
    ``2^{k-1}(1 + p^{k-1})`` with ``beta_k <= mu_bound * mu_k``.
    """
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    r = ratios or ratio_summary(pop, design, delta)
    s = moment_summary(pop, design)
    n, p, q = s.n, s.p, s.q
    nq = n * q
    k = j + 1 + delta
    out: dict = {"j": j, "delta": delta, "k": k, "nq_term": nq ** (-(j - 1 + delta) / 2)}
    out["beta"] = r.beta(k) + out["nq_term"]
    out["mu"] = r.mu(k)
    out["mu_bound"] = 2 ** (k - 1) * (1 + p ** (k - 1))
    out["beta_le_mu_bound"] = bool(r.beta(k) <= out["mu_bound"] * r.mu(k) * (1 + 1e-12))
    if j >= 2:
        out["beta_hat"] = r.beta_hat(k) + out["nq_term"]
        d0 = D0_CONST * s.sigma2 / s.V[3]
        out["chi_args_beta"] = (d0, 1 / (r.beta(k) * s.sigma * math.sqrt(n)))
        # the upper limit is not scale free: evaluate it for (Y - gamma) / sqrt(alpha_20)
        # and map back to raw t units
        a20 = s.a(2, 0)
        sig = math.sqrt(s.sigma2 / a20)
        upper = 2 ** (-(j - 1 + delta)) * math.sqrt(n ** (j - 2 + delta) * sig ** (j - 1 + delta))
        out["chi_args_mu"] = (d0, upper / math.sqrt(a20))
        if with_chi:
            cb = chi_bounds(pop, design, *out["chi_args_beta"])
            cm = chi_bounds(pop, design, *out["chi_args_mu"])
            out["chi_beta"] = cb.chi
            out["chi_mu"] = cm.chi
            out["beta"] += cb.chi
            out["beta_hat"] += cm.chi
            out["mu"] += cm.chi
    return out


# ---------------------------------------------------------------------------
# moment residuals


@dataclass(frozen=True)
class MomentResiduals:
    m3_exact: float
    m3_expansion: float
    r3: float
    m4_exact: float
    m4_expansion: float
    r4: float


def moment_expansion_check(pop: Population, design: Design, delta: float = 1.0,
                           exact: ExactDistribution | None = None, budget: int = DP_BUDGET) -> MomentResiduals:
    """Normalized residuals of the third and fourth central moments of ``S``
    against their expansions in ``Lambda_1``, ``Lambda_2``, ``alpha_02``."""
    s = moment_summary(pop, design)
    r = ratio_summary(pop, design, delta)
    ex = exact if exact is not None else exact_distribution(pop, design, budget)
    n, p, q = s.n, s.p, s.q
    nq = n * q
    v, w = ex.atoms()
    c = v - math.fsum(v * w)
    m3 = exact_moments(ex, 3)
    m4 = exact_moments(ex, 4)
    m3_exp = n * s.lambda1
    num3 = m3 - m3_exp
    if abs(num3) <= MOMENT_NOISE_RTOL * math.fsum(w * np.abs(c) ** 3):
        num3 = 0.0
    r3 = abs(num3) / (n**1.5 * s.sigma**3 * (r.beta(3 + delta) + nq ** (-(1 + delta / 2))))
    s4 = n * n * s.sigma2**2
    m4_exp = s4 * (3 + s.lambda2 / (n * s.sigma2**2) + 4 * p * q * s.a(0, 2) / (n * s.sigma2))
    num4 = m4 - m4_exp
    if abs(num4) <= MOMENT_NOISE_RTOL * m4:
        num4 = 0.0
    r4 = abs(num4) / s4 / (r.beta(4 + delta) + nq ** (-(1 + delta / 2)))
    return MomentResiduals(m3, m3_exp, r3, m4, m4_exp, r4)


# ---------------------------------------------------------------------------
# report


@dataclass
class DiagnosticsReport:
    N: int
    n: int
    delta: float
    Delta: dict = field(default_factory=dict)  # j -> sup distance
    chf_error: dict = field(default_factory=dict)  # j -> max |phi_n - W_j| on |t| <= 3
    lindeberg: list = field(default_factory=list)
    rates: dict = field(default_factory=dict)
    chi: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["Delta"] = {str(k): v for k, v in self.Delta.items()}
        out["chf_error"] = {str(k): v for k, v in self.chf_error.items()}
        out["rates"] = {str(k): v for k, v in self.rates.items()}
        return out


def diagnostics_report(pop: Population, design: Design, delta: float = 1.0,
                       eps_grid: Sequence[float] = (0.1, 0.5, 1.0),
                       exact: ExactDistribution | None = None, budget: int = DP_BUDGET,
                       with_chf: bool = True) -> DiagnosticsReport:
    s = moment_summary(pop, design)
    r = ratio_summary(pop, design, delta)
    ex = exact if exact is not None else exact_distribution(pop, design, budget)
    rep = DiagnosticsReport(pop.N, design.n, delta)
    ev = ChfEvaluator(pop, design, s) if with_chf else None
    for j in (1, 2, 3):
        rep.Delta[j] = sup_distance(ex, edgeworth(s, j).cdf, s)
        if ev is not None:
            rep.chf_error[j] = chf_error(ev, j)
        rep.rates[j] = rate_terms(pop, design, delta, j, r)
    for eps in eps_grid:
        lr = lindeberg(pop, design, eps)
        rep.lindeberg.append({"eps": eps, "L2N": lr.value, "cond_i": lr.cond_i,
                              "cond_ii": lr.cond_ii, "D": list(lr.D)})
    d0, d1 = rep.rates[2]["chi_args_beta"]
    cb = chi_bounds(pop, design, d0, d1)
    rep.chi = {"d0": d0, "d1": d1, "chi1": cb.chi1, "chi2": cb.chi2, "chi": cb.chi}
    rep.residuals = asdict(moment_expansion_check(pop, design, delta, ex))
    rep.thresholds = {"T": {str(k): v for k, v in r.T.items()},
                      "T_tilde": {str(k): v for k, v in r.T_tilde.items()},
                      "threshold_const": r.threshold_const}
    return rep


SWEEP_COLUMNS = ("N", "n", "j", "Delta", "chf_error", "rate", "Delta_over_rate")


def sweep_rows(cases: Sequence[tuple[Population, Design]], delta: float = 1.0) -> list[dict]:
    rows = []
    for pop, design in cases:
        rep = diagnostics_report(pop, design, delta)
        for j in (1, 2, 3):
            rate = rep.rates[j]["beta"]
            rows.append({"N": pop.N, "n": design.n, "j": j, "Delta": rep.Delta[j],
                         "chf_error": rep.chf_error.get(j, float("nan")), "rate": rate,
                         "Delta_over_rate": rep.Delta[j] / rate})
    return rows


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
