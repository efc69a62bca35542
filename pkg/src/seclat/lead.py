"""Stationary adversarial lead of the reflected per-jumper random walk.

The walk ``W <- max(W + Z, 0)`` has increments ``Z = C_alpha + C_delta - 1``
(plus ``C_b0`` when honest miners idle for HP transactions). Its transition
matrix is skip-free to the left, so the stationary law follows from a forward
recursion that only ever adds non-negative terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .delays import ModelParams, c_alpha_pmf, c_b0_pmf, c_delta_pmf, expected_count, window
from .errors import NonConvergence, StabilityViolation
from .pmf import EPS_TAIL, Pmf, _trimmed, convolve, convolve_all, mean, shift

EPS_RESIDUAL = 1e-18
MAX_STATES = 100_000


@dataclass(frozen=True)
class ZIncrement:
    pmf: Pmf
    mean: float

    def __post_init__(self):
        if self.pmf.offset != -1 or self.pmf.masses[0] <= 0:
            raise ValueError("Z must have offset -1 with positive mass there")
        if self.mean >= 0:
            raise StabilityViolation(f"E[Z] = {self.mean:.6g} >= 0")

    @property
    def z_minus1(self) -> float:
        return float(self.pmf.masses[0])

    @classmethod
    def from_counts(cls, *counts: Pmf, eps_tail: float = EPS_TAIL) -> ZIncrement:
        """Z = (sum of the independent counts) - 1."""
        z = shift(convolve_all(counts, eps_tail), -1)
        if z.offset != -1:
            raise StabilityViolation("Z never decreases; the lead grows without bound")
        return cls(z, mean(z))


@dataclass(frozen=True)
class StationaryLead:
    pi: Pmf
    residual: float


def expected_cycle_count(params: ModelParams, with_b0: bool = False, tightened: bool = False) -> float:
    """E[C_alpha + C_delta (+ C_b0)] computed from closed-form means."""
    load = params.beta / params.alpha + expected_count(window(params, tightened), params.adversary_rate)
    if with_b0 and params.b0 > 0:
        load += params.b0 * params.adversary_rate / params.lambda_h
    return load


def build_z(params: ModelParams, with_b0: bool = False, eps_tail: float = EPS_TAIL,
            tightened: bool = False) -> ZIncrement:
    """Per-cycle lead increment.

    ``with_b0`` adds the idle-time count ``C_b0`` (upper-bound construction);
    ``tightened`` instead widens the delay window to ``max(delay, Erlang(b0, lambda_h))``
    (lower-bound construction). Both are no-ops when ``b0 == 0``.
    """
    if with_b0 and tightened:
        raise ValueError("with_b0 and tightened are alternative constructions")
    load = expected_cycle_count(params, with_b0, tightened)
    if load >= 1.0:
        raise StabilityViolation(
            f"expected adversarial blocks per jumper cycle is {load:.6g} >= 1; "
            "honest jumpers under maximal delay do not outpace the adversary"
        )
    counts = [c_alpha_pmf(params.alpha, eps_tail), c_delta_pmf(params, tightened=tightened, eps_tail=eps_tail)]
    if with_b0 and params.b0 > 0:
        counts.append(c_b0_pmf(params, eps_tail))
    return ZIncrement.from_counts(*counts, eps_tail=eps_tail)


def ramaswami_stationary(z: ZIncrement, eps_residual: float = EPS_RESIDUAL,
                         max_states: int = MAX_STATES) -> StationaryLead:
    """Stationary distribution of the reflected walk.

    pi_0 = -E[Z] / z_{-1};  pi_i = sum_{j<i} pi_j P(Z >= i - j) / z_{-1}.

    The truncated tail of Z is folded into its last stored point so the
    recursion runs on a proper distribution (``mean`` already places it there).
    """
    zm = np.array(z.pmf.masses)
    zm[-1] += z.pmf.tail_mass
    z1 = zm[0]
    neg_mean = -z.mean
    # geq[l-1] = P(Z >= l) for l = 1..max(Z); hsum[m-1] = sum_{l >= m} P(Z >= l)
    geq = np.cumsum(zm[::-1])[::-1][2:]
    hsum = np.cumsum(geq[::-1])[::-1]
    s = geq.size
    pi = np.zeros(1024)
    pi[0] = neg_mean / z1

    def residual(n):
        # mass above state n, from positive terms only:
        # (-E[Z]) * sum_{i>n} pi_i = sum_{j<=n} pi_j * hsum[n-j]
        m = min(n + 1, s)
        if m == 0:
            return 0.0
        return float(np.dot(pi[n + 1 - m : n + 1][::-1], hsum[:m])) / neg_mean

    i = 0
    res = residual(0)
    while res > eps_residual:
        i += 1
        if i >= max_states:
            raise NonConvergence(f"residual {res:.3g} after {max_states} states (E[Z] = {z.mean:.4g})")
        if i >= pi.size:
            pi = np.concatenate([pi, np.zeros(pi.size)])
        m = min(i, s)
        pi[i] = np.dot(pi[i - m : i][::-1], geq[:m]) / z1
        res = residual(i)
    pi = pi[: i + 1]
    return StationaryLead(Pmf(0, pi, res), res)


def lead_upper(z: ZIncrement, st: StationaryLead) -> Pmf:
    """Bound on the pre-mining lead, 1 + Z + Pi, via its closed form.

    P(L=0) = -E[Z], P(L=1) = pi_0 + E[Z], P(L=i) = pi_{i-1} for i >= 2.
    """
    pi = st.pi.masses
    masses = np.empty(pi.size + 1)
    masses[0] = -z.mean
    masses[1] = pi[0] + z.mean
    masses[2:] = pi[1:]
    # rounding can leave P(L=1) a hair below zero; _trimmed clips it
    return _trimmed(0, masses, st.pi.tail_mass, 0.0)


def lead_upper_by_convolution(z: ZIncrement, st: StationaryLead, eps_tail: float = 0.0) -> Pmf:
    """1 + Z + Pi computed directly; cross-checks :func:`lead_upper`."""
    return shift(convolve(z.pmf, st.pi, eps_tail), 1)


def lead_lower(z: ZIncrement, st: StationaryLead, c_delta: Pmf, eps_tail: float = EPS_TAIL) -> Pmf:
    """Lead left to the adversary right after a jumper is mined: Pi + C_delta."""
    return convolve(st.pi, c_delta, eps_tail)
