"""Exact characteristic function of the standardized sample sum.

Two independent routes are provided:

* the inversion integral over ``tau`` of ``prod_m psi_m(t, tau)``, the joint
  ch.f. of independent pairs ``(Z~_m, xi~_m)``, evaluated by adaptive
  Gauss-Legendre panels, and normalized by its value at ``t = 0``;
* von Bahr's multi-index series in the power sums of
  ``b_m(t) = exp(t^2 alpha_20 / 2 n sigma^2) E exp(i t Y_m / sigma sqrt(n)) - 1``.

A CDF is recovered by Gil-Pelaez inversion, truncated where the leading
truncation error vanishes at lattice midpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import CombinatorialOverflow, DegenerateDesign, QuadratureFailure, ZeroVariance
from .population import Design, MomentSummary, Population, joint_laws, moment_summary

MULTI_INDEX_CAP = 10**7
_T_CHUNK = 512


def hypergeometric_factor(n: int, N: int, r: int) -> float:
    """``C(N-r, n-r) / (p^r C(N, n))`` with ``p = n/N``; zero for ``r > n``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if r > n:
        return 0.0
    p = Fraction(n, N)
    return float(Fraction(math.comb(N - r, n - r)) / (p**r * math.comb(N, n)))


def partition_count(R: int) -> int:
    """Number of multi-indices ``(i_1, i_2, ...)`` with ``sum j i_j <= R``."""
    counts = [1] + [0] * R
    for part in range(1, R + 1):
        for total in range(part, R + 1):
            counts[total] += counts[total - part]
    return sum(counts)


def _partitions(r: int, largest: int | None = None):
    """Partitions of ``r`` as lists of ``(part, multiplicity)``, parts decreasing."""
    if largest is None:
        largest = r
    if r == 0:
        yield []
        return
    for part in range(min(r, largest), 0, -1):
        for mult in range(r // part, 0, -1):
            for rest in _partitions(r - part * mult, part - 1):
                yield [(part, mult)] + rest


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


@dataclass(frozen=True)
class InversionResult:
    u: np.ndarray
    cdf: np.ndarray
    error: np.ndarray
    T: float


class ChfEvaluator:
    """ch.f. of ``(S_nN - n gamma) / sigma sqrt(n)`` for one population and design.

    ``order`` is the Gauss-Legendre order per panel; panels start at one per
    population element (the integrand in ``tau / sqrt(nq)`` is a trigonometric
    polynomial with at most ``N`` frequencies) and are bisected until the
    panel-wise estimate is below ``rtol`` times the integral of the modulus.
    """

    def __init__(self, pop: Population, design: Design, summary: MomentSummary | None = None,
                 order: int = 20, rtol: float = 1e-10, max_rounds: int = 10):
        self.pop = pop
        self.design = design
        self.order = order
        self.rtol = rtol
        self.max_rounds = max_rounds
        self._summary = summary

    # -- moments -----------------------------------------------------------

    @cached_property
    def summary(self) -> MomentSummary:
        return self._summary or moment_summary(self.pop, self.design)

    @cached_property
    def _standardization(self) -> tuple[float, float, float]:
        """``(gamma, alpha_20, sigma^2)``, valid also for ``n = N``."""
        N, p = self.pop.N, self.design.p
        means = np.array([e.law.mean() for e in self.pop.elements])
        gamma = math.fsum(means) / N
        a20 = math.fsum(
            math.fsum(e.law.weights * (e.law.values - gamma) ** 2) for e in self.pop.elements
        ) / N
        a02 = math.fsum((means - gamma) ** 2) / N
        sigma2 = a20 - p * a02
        if a20 <= 0 or sigma2 <= 1e-14 * a20:
            raise ZeroVariance(f"sigma^2 = {sigma2!r} is numerically zero")
        return gamma, a20, sigma2

    # -- inversion-integral route -------------------------------------------

    @cached_property
    def _joint(self):
        self.design.require_nondegenerate()
        s = self.summary
        laws = joint_laws(self.pop, self.design, s.gamma, s.sigma)
        n, p, q = self.design.n, self.design.p, self.design.q
        r = math.sqrt(n * q)
        return laws, -p / r, q / r

    def psi(self, m: int, t, tau):
        """``psi_m(t, tau) = E exp(i t Z~_m + i tau xi~_m)`` as an exact finite sum."""
        laws, _, _ = self._joint
        jl = laws[m]
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        phase = np.multiply.outer(t, jl.z) + np.multiply.outer(tau, jl.xi)
        out = np.exp(1j * phase) @ jl.w
        return complex(out) if out.ndim == 0 else out

    def psi_alternative(self, m: int, t, tau):
        """The same ``psi_m`` through the mixture form valid for ``gamma = 0``, ``alpha_20 = 1``.

        The population is standardized to ``(Y - gamma) / sqrt(alpha_20)`` first,
        which leaves ``psi_m`` unchanged.
        """
        self.design.require_nondegenerate()
        gamma, a20, sigma2 = self._standardization
        n, p, q = self.design.n, self.design.p, self.design.q
        sig = math.sqrt(sigma2 / a20)
        law = self.pop.elements[m].law
        y = (law.values - gamma) / math.sqrt(a20)
        ey = math.fsum(law.weights * y)
        t = np.asarray(t, dtype=float)
        tau = np.asarray(tau, dtype=float)
        rn, rq = math.sqrt(n), math.sqrt(n * q)
        first = q * np.exp(-1j * t * p * ey / (rn * sig) - 1j * tau * p / rq)
        inner = np.exp(1j * np.multiply.outer(t, y - p * ey) / (rn * sig)) @ law.weights
        out = first + p * inner * np.exp(1j * tau * q / rq)
        return complex(out) if np.ndim(out) == 0 else out

    def _factors(self, t: np.ndarray):
        """Split ``psi_m = A_m(t) e^{i tau x0} + B_m(t) e^{i tau x1}``; shapes ``(T, N)``."""
        laws, x0, x1 = self._joint
        A = np.empty((len(t), len(laws)), dtype=complex)
        B = np.empty_like(A)
        for m, jl in enumerate(laws):
            A[:, m] = jl.w[0] * np.exp(1j * t * jl.z[0])
            B[:, m] = np.exp(1j * np.multiply.outer(t, jl.z[1:])) @ jl.w[1:]
        return A, B, x0, x1

    def integrand(self, t, tau):
        """``prod_m psi_m(t, tau)``, shape ``(len(t), len(tau))``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        A, B, x0, x1 = self._factors(t)
        return self._product(A, B, x0, x1, tau)

    @staticmethod
    def _product(A, B, x0, x1, tau):
        N = A.shape[1]
        rot = np.exp(1j * tau * (x1 - x0))  # (K,)
        out = np.ones((A.shape[0], len(tau)), dtype=complex)
        for m in range(N):
            out *= A[:, m, None] + B[:, m, None] * rot[None, :]
        return out * np.exp(1j * N * x0 * tau)[None, :]

    def _panel_integrals(self, A, B, x0, x1, lo, hi):
        """Gauss-Legendre integral per panel, whole and as two halves; shapes ``(T, P)``."""
        x, w = gauss_legendre(self.order)
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        f = self._product(A, B, x0, x1, nodes).reshape(A.shape[0], len(lo), len(x))
        coarse = (f * w).sum(-1) * half
        quarter = half / 2
        fine = np.zeros_like(coarse)
        absint = np.zeros_like(coarse, dtype=float)
        for sign in (-1.0, 1.0):
            c = mid + sign * quarter
            nd = (c[:, None] + quarter[:, None] * x[None, :]).ravel()
            g = self._product(A, B, x0, x1, nd).reshape(A.shape[0], len(lo), len(x))
            fine += (g * w).sum(-1) * quarter
            absint += (np.abs(g) * w).sum(-1) * quarter
        return coarse, fine, absint

    def _theta_batch(self, t: np.ndarray) -> np.ndarray:
        A, B, x0, x1 = self._factors(t)
        L = math.pi * math.sqrt(self.design.n * self.design.q)
        edges = np.linspace(-L, L, max(4, self.pop.N) + 1)
        lo, hi = edges[:-1], edges[1:]
        total = np.zeros(len(t), dtype=complex)
        scale = None
        for _ in range(self.max_rounds):
            coarse, fine, absint = self._panel_integrals(A, B, x0, x1, lo, hi)
            if scale is None:
                # integral of |integrand| per t, fixed from the first full sweep
                scale = np.maximum(absint.sum(axis=1), 1e-300)
            tol = self.rtol * scale[:, None] * (hi - lo)[None, :] / (2 * L)
            good = (np.abs(fine - coarse) <= tol).all(axis=0)
            total += fine[:, good].sum(axis=1)
            if good.all():
                return total
            lo, hi = lo[~good], hi[~good]
            mid = (lo + hi) / 2
            lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        raise QuadratureFailure(
            f"tau quadrature missed rtol={self.rtol} after {self.max_rounds} rounds "
            f"({len(lo)} panels unresolved)"
        )

    def theta(self, t):
        """``Theta_N(t) = (2 pi)^{-1/2} int_{|tau| <= pi sqrt(nq)} prod_m psi_m(t, tau) d tau``."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.concatenate([self._theta_batch(t_arr[i:i + _T_CHUNK])
                              for i in range(0, len(t_arr), _T_CHUNK)]) / math.sqrt(2 * math.pi)
        return complex(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))

    @cached_property
    def theta0(self) -> float:
        return self.theta(0.0).real

    def phi_n(self, t):
        return self.theta(t) / self.theta0

    __call__ = phi_n

    # -- von Bahr route -----------------------------------------------------

    @cached_property
    def _vb_laws(self):
        """Atoms of ``(Y_m - gamma) / sqrt(alpha_20)`` and the matching ``sigma``."""
        gamma, a20, sigma2 = self._standardization
        scale = math.sqrt(a20)
        laws = [((e.law.values - gamma) / scale, e.law.weights) for e in self.pop.elements]
        return laws, math.sqrt(sigma2 / a20)

    def vonbahr_b(self, m: int, t):
        """``b_m(t) = exp(t^2 / 2 n sigma^2) E exp(i t Y_m / sigma sqrt(n)) - 1`` (standardized)."""
        laws, sig = self._vb_laws
        n = self.design.n
        y, w = laws[m]
        t = np.asarray(t, dtype=float)
        chf = np.exp(1j * np.multiply.outer(t, y) / (sig * math.sqrt(n))) @ w
        out = np.exp(t * t / (2 * n * sig * sig)) * chf - 1
        return complex(out) if np.ndim(out) == 0 else out

    def vonbahr_b_all(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([self.vonbahr_b(m, t) for m in range(self.pop.N)], axis=-1)

    def vonbahr_B(self, j: int, t, b: np.ndarray | None = None):
        """``B_j(t) = (-1)^{j+1} / j * sum_m b_m(t)^j``."""
        if b is None:
            b = self.vonbahr_b_all(t)
        out = (-1) ** (j + 1) / j * (b**j).sum(axis=-1)
        return complex(out[0]) if np.ndim(t) == 0 else out

    def vonbahr_chf(self, t, truncation_r: int | None = None, cap: int = MULTI_INDEX_CAP):
        """``exp(t^2 alpha_20 / 2 sigma^2) phi_n(t)`` as von Bahr's multi-index series.

        Terms are ``prod_j (p^j B_j)^{i_j} / i_j! * C(n, N, sum_j j i_j)`` over
        multi-indices with ``sum_j j i_j <= truncation_r`` (default ``n``, the
        full series, since ``C(n, N, r) = 0`` for ``r > n``).
        """
        n, N, p = self.design.n, self.pop.N, self.design.p
        R = n if truncation_r is None else min(int(truncation_r), n)
        if R < 0:
            raise ValueError("truncation_r must be non-negative")
        count = partition_count(R)
        if count > cap:
            raise CombinatorialOverflow(f"{count} multi-indices exceed the cap {cap}")
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        b = self.vonbahr_b_all(t_arr)
        pB = {j: p**j * self.vonbahr_B(j, t_arr, b) for j in range(1, R + 1)}
        total = np.zeros(len(t_arr), dtype=complex)
        for r in range(R + 1):
            c = hypergeometric_factor(n, N, r)
            if c == 0:
                continue
            acc = np.zeros(len(t_arr), dtype=complex)
            for parts in _partitions(r):
                term = np.ones(len(t_arr), dtype=complex)
                for j, mult in parts:
                    term = term * pB[j] ** mult / math.factorial(mult)
                acc += term
            total += c * acc
        return complex(total[0]) if np.ndim(t) == 0 else total.reshape(np.shape(t))

    def phi_vonbahr(self, t, truncation_r: int | None = None):
        """``phi_n(t)`` through the von Bahr series; works for ``n = N`` too."""
        gamma, a20, sigma2 = self._standardization
        t = np.asarray(t, dtype=float)
        return np.exp(-t * t * a20 / (2 * sigma2)) * self.vonbahr_chf(t, truncation_r)

    # -- CDF by inversion ---------------------------------------------------

    def _standardized_lattice(self) -> tuple[float, float, float, float]:
        """Offset, step and range of the standardized sum's lattice."""
        s = self.summary
        lat = self.pop.lattice
        n = self.design.n
        scale = s.sigma * math.sqrt(n)
        step = float(lat.step) / scale
        offset = (n * float(lat.offset) - n * s.gamma) / scale
        mins = sorted(float(e.law.atoms[0][0]) for e in self.pop.elements)
        maxs = sorted((float(e.law.atoms[-1][0]) for e in self.pop.elements), reverse=True)
        lo = (math.fsum(mins[:n]) - n * s.gamma) / scale
        hi = (math.fsum(maxs[:n]) - n * s.gamma) / scale
        return offset, step, lo, hi

    def cdf_by_inversion(self, u_grid, target: float = 1e-5, order: int = 16) -> InversionResult:
        """``P{(S - n gamma) / sigma sqrt(n) < u}`` by Gil-Pelaez inversion of ``phi_n``.

        The integral ``int_0^T Im(e^{-itu} phi_n(t)) / t dt`` is truncated at an odd
        multiple of ``pi / h`` (``h`` the standardized lattice step), where the
        leading tail term ``cos(aT) / aT`` vanishes for every atom when ``u`` is a
        lattice midpoint.  The returned error combines the tail bound for the
        distance from ``u`` to the nearest lattice point with a quadrature
        estimate; it is infinite on lattice points, where the inversion
        converges to the midpoint of the jump instead.
        """
        u = np.atleast_1d(np.asarray(u_grid, dtype=float))
        offset, h, lo, hi = self._standardized_lattice()
        # tail bound at midpoints: 8 / (pi^3 (2M+1)^2)
        odd = math.ceil(math.sqrt(8 / (math.pi**3 * target)))
        odd += 1 - odd % 2
        T = odd * math.pi / h
        freq = max(abs(lo), abs(hi)) + np.abs(u).max()
        n_panels = max(1, math.ceil(T * freq / math.pi))
        edges = np.linspace(0.0, T, n_panels + 1)
        x, w = gauss_legendre(order)
        xc, wc = gauss_legendre(order // 2)
        mid, half = (edges[:-1] + edges[1:]) / 2, np.diff(edges) / 2

        def integrate(xn, wn):
            nodes = (mid[:, None] + half[:, None] * xn[None, :]).ravel()
            weights = (half[:, None] * wn[None, :]).ravel()
            phi = self.phi_n(nodes)
            g = np.imag(np.exp(-1j * np.multiply.outer(u, nodes)) * phi[None, :]) / nodes[None, :]
            return g @ weights

        fine = integrate(x, w)
        coarse = integrate(xc, wc)
        cdf = 0.5 - fine / math.pi
        frac = (u - offset) / h
        d = np.abs(frac - np.round(frac)) * h
        with np.errstate(divide="ignore"):
            at_mid = np.isclose(np.abs(frac - np.floor(frac) - 0.5), 0.0, atol=1e-9)
            tail = np.where(
                at_mid,
                2 / (math.pi * (d * T) ** 2),
                1 / (math.pi * d * T) + 2 / (math.pi * (d * T) ** 2),
            )
        err = tail + np.abs(fine - coarse) / math.pi
        return InversionResult(u, cdf, err, T)
