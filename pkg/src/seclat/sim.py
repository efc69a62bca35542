"""Monte Carlo simulator of the private double-spend attack.

The adversary mines privately from genesis and withholds every honest jumper
for its full delay window. A trial has three phases:

1. pre-mining: the lead after ``premine_cycles`` jumper cycles of the
   reflected walk ``W <- max(W + C_alpha + C_delta - 1, 0)``, started from
   ``(C_alpha - 1)^+``; at tx arrival the adversary also holds the blocks of
   the current cycle (``C_alpha`` before the jumper, ``C_delta`` during its
   withheld window);
2. confirmation: ``k`` jumpers, each preceded by ``C_alpha`` adversarial
   blocks and withheld for one window;
3. race: if the adversary is still short, it keeps mining against the pacer
   chain until it catches up (violation) or falls ``race_cutoff`` behind.

Counts come from competing exponentials: every block is adversarial with
probability ``beta``, and arrivals inside a window of length ``t`` are
exponential gaps at rate ``beta * mu_m``. With ``b0 > 0`` honest miners idle
until ``b0`` HP transactions arrive, so windows become ``max(delay,
Erlang(b0, lambda_h))`` (all pre-mining windows and the first ``k - 1``
confirmation windows; the race is run on plain windows).

The walk in phase 1 is evaluated backwards from tx arrival: its value equals
the largest suffix sum of the increments, and the scan stops once the suffix
sum is ``race_cutoff`` below the running maximum. The probability that either
cutoff changes a trial is bounded by ``cutoff_truncation_bound``.

Each trial draws from its own splitmix64 stream keyed by ``(seed, trial)``, so
results do not depend on thread scheduling.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import optimize
from statsmodels.stats.proportion import proportion_confint

from .delays import DelaySpec, ModelParams
from .pmf import Pmf

COUNT_NAMES = ("C_alpha", "C_delta", "C_bar_delta", "C_b0", "Z")

_KIND_CODES = {"deterministic": 0, "exponential": 1, "erlang": 2, "gamma": 2, "empirical": 3}


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    trials: int = 1_000_000
    seed: int = 0
    premine_cycles: int = 1000
    race_cutoff: int = 64
    record_phases: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.premine_cycles < 1:
            raise ValueError("premine_cycles must be >= 1")
        if self.race_cutoff < self.params.k:
            raise ValueError("race_cutoff must be >= k")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class SimOutcome:
    violations: int
    trials: int
    frequency: float
    wilson_ci_95: tuple[float, float]
    cutoff_truncation_bound: float
    phase_stats: dict[str, np.ndarray] | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        """Standard error read off the Wilson interval."""
        lo, hi = self.wilson_ci_95
        return (hi - lo) / (2 * 1.959963984540054)

    def to_dict(self) -> dict:
        d = {
            "violations": self.violations,
            "trials": self.trials,
            "frequency": self.frequency,
            "wilson_ci_95": list(self.wilson_ci_95),
            "cutoff_truncation_bound": self.cutoff_truncation_bound,
        }
        if self.phase_stats is not None:
            d["phase_stats"] = {k: v.tolist() for k, v in self.phase_stats.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_histograms(self, path) -> None:
        """Phase histograms as CSV: value, then one count column per phase."""
        if self.phase_stats is None:
            raise ValueError("simulation was run without record_phases")
        names = list(self.phase_stats)
        n = max(len(h) for h in self.phase_stats.values())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", *names])
            for v in range(n):
                w.writerow([v, *(int(h[v]) if v < len(h) else 0 for h in self.phase_stats.values())])


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=0.05, method="wilson")
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# numba kernels

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always")
def _uniform(state):
    """Next state and a uniform draw in (0, 1]."""
    state = state + _GOLDEN
    return state, (float(_mix(state) >> _S11) + 1.0) * _INV53


@nb.njit(inline="always")
def _stream(seed, index):
    return _mix(_mix(np.uint64(seed)) ^ _mix(np.uint64(index) * _GOLDEN + np.uint64(1)))


@nb.njit
def _normal(state):
    state, u1 = _uniform(state)
    state, u2 = _uniform(state)
    return state, math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@nb.njit
def _gamma(state, shape, rate):
    if shape == 1.0:
        state, u = _uniform(state)
        return state, -math.log(u) / rate
    if shape == 2.0:
        state, u1 = _uniform(state)
        state, u2 = _uniform(state)
        return state, -math.log(u1 * u2) / rate
    boost = 1.0
    a = shape
    if a < 1.0:
        state, u = _uniform(state)
        boost = u ** (1.0 / a)
        a += 1.0
    # Marsaglia-Tsang
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        state, x = _normal(state)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        state, u = _uniform(state)
        if math.log(u) < 0.5 * x * x + d - d * v + d * math.log(v):
            return state, boost * d * v / rate


@nb.njit
def _delay(state, kind, p0, p1, samples):
    if kind == 0:
        return state, p0
    if kind == 1:
        state, u = _uniform(state)
        return state, -math.log(u) / p0
    if kind == 2:
        return _gamma(state, p0, p1)
    state, u = _uniform(state)
    i = min(int((u - _INV53) * samples.size), samples.size - 1)
    return state, samples[i]


@nb.njit
def _window(state, kind, p0, p1, samples, b0, lam):
    state, t = _delay(state, kind, p0, p1, samples)
    if b0 > 0:
        state, idle = _gamma(state, float(b0), lam)
        if idle > t:
            t = idle
    return state, t


@nb.njit
def _arrivals(state, t, rate):
    """Number of rate-``rate`` exponential arrivals within a window of length t."""
    n = 0
    if rate <= 0.0 or t <= 0.0:
        return state, n
    state, u = _uniform(state)
    clock = -math.log(u) / rate
    while clock < t:
        n += 1
        state, u = _uniform(state)
        clock += -math.log(u) / rate
    return state, n


@nb.njit
def _window_count(state, kind, p0, p1, samples, b0, lam, rate):
    """Arrivals during one (possibly widened) delay window.

    Exponential and Erlang windows are walked phase by phase: a phase of rate
    ``nu`` ends before the next arrival with probability nu / (nu + rate).
    """
    if rate <= 0.0:
        return state, 0
    if b0 == 0 and (kind == 1 or (kind == 2 and p0 == math.floor(p0) and p0 <= 64.0)):
        nu = p0 if kind == 1 else p1
        phases = 1 if kind == 1 else int(p0)
        stay = rate / (rate + nu)
        n = 0
        for _ in range(phases):
            while True:
                state, u = _uniform(state)
                if u > stay:
                    break
                n += 1
        return state, n
    state, t = _window(state, kind, p0, p1, samples, b0, lam)
    return _arrivals(state, t, rate)


@nb.njit
def _c_alpha(state, alpha):
    """Adversarial blocks before the next honest one (competing exponentials)."""
    n = 0
    while True:
        state, u = _uniform(state)
        if u <= alpha:
            return state, n
        n += 1


@nb.njit
def _trial(state, alpha, adv, k, n_pre, cutoff, kind, p0, p1, samples, b0, lam, out):
    # phase 1, backwards from tx arrival
    walk = 0
    best = 0
    m = 0
    while m < n_pre:
        state, ca = _c_alpha(state, alpha)
        state, cd = _window_count(state, kind, p0, p1, samples, b0, lam, adv)
        walk += ca + cd - 1
        m += 1
        if walk > best:
            best = walk
        if walk <= best - cutoff:
            break
    if m == n_pre:
        state, ca = _c_alpha(state, alpha)
        if ca - 1 + walk > best:
            best = ca - 1 + walk
    state, ca = _c_alpha(state, alpha)
    state, cd = _window_count(state, kind, p0, p1, samples, b0, lam, adv)
    lead = best + ca + cd

    # phase 2
    conf = 0
    for j in range(k):
        state, ca = _c_alpha(state, alpha)
        state, cd = _window_count(state, kind, p0, p1, samples, b0 if j < k - 1 else 0, lam, adv)
        conf += ca + cd
    out[0] = lead
    out[1] = conf
    out[2] = 0
    if lead + conf >= k:
        return 1

    # phase 3
    deficit = k - lead - conf
    gain = 0
    while True:
        state, ca = _c_alpha(state, alpha)
        state, cd = _window_count(state, kind, p0, p1, samples, 0, lam, adv)
        gain += ca + cd
        if gain > out[2]:
            out[2] = gain
        if gain >= deficit:
            return 1
        gain -= 1
        if deficit - gain >= cutoff:
            return 0


@nb.njit(parallel=True, cache=True)
def _run(seed, trials, alpha, adv, k, n_pre, cutoff, kind, p0, p1, samples, b0, lam, record):
    hits = np.zeros(trials, dtype=np.uint8)
    n_rec = trials if record else 1
    phases = np.zeros((n_rec, 3), dtype=np.int64)
    for i in nb.prange(trials):
        out = np.zeros(3, dtype=np.int64)
        hits[i] = _trial(_stream(seed, i), alpha, adv, k, n_pre, cutoff, kind, p0, p1, samples, b0, lam, out)
        if record:
            phases[i, :] = out
    return hits, phases


@nb.njit(cache=True)
def _sample_counts(seed, n, which, alpha, adv, mu, kind, p0, p1, samples, b0, lam):
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        state = _stream(seed, i)
        if which == 0:
            state, out[i] = _c_alpha(state, alpha)
        elif which == 1:
            state, out[i] = _window_count(state, kind, p0, p1, samples, 0, lam, adv)
        elif which == 2:
            state, t = _delay(state, kind, p0, p1, samples)
            state, out[i] = _arrivals(state, t, mu)
        elif which == 3:
            if b0 > 0:
                state, t = _gamma(state, float(b0), lam)
                state, out[i] = _arrivals(state, t, adv)
        else:
            state, ca = _c_alpha(state, alpha)
            state, cd = _window_count(state, kind, p0, p1, samples, 0, lam, adv)
            cb = 0
            if b0 > 0:
                state, t = _gamma(state, float(b0), lam)
                state, cb = _arrivals(state, t, adv)
            out[i] = ca + cd + cb - 1
    return out


# ---------------------------------------------------------------------------


def _delay_args(delay: DelaySpec):
    kind = _KIND_CODES[delay.kind]
    samples = np.asarray(delay.samples if delay.kind == "empirical" else (0.0,), dtype=np.float64)
    if delay.kind == "deterministic":
        return kind, delay.d, 0.0, samples
    if delay.kind == "exponential":
        return kind, delay.rate, 0.0, samples
    if delay.kind == "empirical":
        return kind, 0.0, 0.0, samples
    return kind, float(delay.shape), delay.rate, samples


def _lundberg_ratio(alpha: float, adv: float, windows: np.ndarray) -> float:
    """Per-step decay ratio 1/s of P(walk ever climbs x) <= s**-x.

    ``s > 1`` solves E[s^(C_alpha + C_delta)] = s, with the window law taken
    from simulated windows. Returns 1.0 when no such root exists.
    """
    beta = 1.0 - alpha
    if adv == 0.0 or windows.max() == 0.0:
        if beta == 0.0:
            return 0.0
        return beta / alpha if beta < alpha else 1.0
    if beta == 0.0:
        # walk only moves up through C_delta; E[exp(adv*t*(s-1))] = s
        def f(s):
            return np.mean(np.exp(np.minimum(adv * windows * (s - 1.0), 700.0))) - s
        hi = 2.0
    else:
        def f(s):
            return alpha / (1.0 - beta * s) * np.mean(np.exp(np.minimum(adv * windows * (s - 1.0), 700.0))) - s
        hi = 1.0 / beta
    lo = 1.0 + 1e-9
    if f(lo) >= 0:
        return 1.0
    if beta == 0.0:
        while f(hi) < 0 and hi < 1e12:
            hi *= 2.0
    else:
        hi = hi * (1.0 - 1e-12)
        if f(hi) < 0:
            return 1.0
    s = optimize.brentq(f, lo, hi, xtol=1e-12)
    return 1.0 / s


def cutoff_bound(config: SimConfig, n_windows: int = 1 << 16) -> float:
    """Bound on the probability that a cutoff changes a trial's outcome."""
    p = config.params
    rng = np.random.default_rng(config.seed)
    plain = p.delay.sample(rng, n_windows)
    wide = plain
    if p.b0 > 0:
        wide = np.maximum(plain, rng.gamma(p.b0, 1.0 / p.lambda_h, n_windows))
    c = config.race_cutoff
    r_pre = _lundberg_ratio(p.alpha, p.adversary_rate, wide)
    r_race = _lundberg_ratio(p.alpha, p.adversary_rate, plain)
    return min(1.0, r_pre**c + r_race ** (c - 1))


def simulate(config: SimConfig) -> SimOutcome:
    """Run the attack ``config.trials`` times and report the violation frequency."""
    p = config.params
    kind, p0, p1, samples = _delay_args(p.delay)
    hits, phases = _run(
        np.uint64(config.seed), config.trials, p.alpha, p.adversary_rate, p.k,
        config.premine_cycles, config.race_cutoff, kind, p0, p1, samples,
        p.b0, float(p.lambda_h or 1.0), config.record_phases,
    )
    v = int(hits.sum(dtype=np.int64))
    stats = None
    if config.record_phases:
        stats = {
            "lead_at_tx": np.bincount(phases[:, 0]),
            "confirmation_blocks": np.bincount(phases[:, 1]),
            "race_max_gain": np.bincount(phases[:, 2]),
        }
    return SimOutcome(
        violations=v,
        trials=config.trials,
        frequency=v / config.trials,
        wilson_ci_95=wilson_interval(v, config.trials),
        cutoff_truncation_bound=cutoff_bound(config),
        phase_stats=stats,
    )


def sample_count_distributions(config: SimConfig, which: str) -> Pmf:
    """Empirical law of one per-cycle count, from ``config.trials`` draws."""
    try:
        code = COUNT_NAMES.index(which)
    except ValueError:
        raise ValueError(f"unknown count {which!r}; expected one of {COUNT_NAMES}") from None
    p = config.params
    kind, p0, p1, samples = _delay_args(p.delay)
    draws = _sample_counts(
        np.uint64(config.seed), config.trials, code, p.alpha, p.adversary_rate, p.mu_m,
        kind, p0, p1, samples, p.b0, float(p.lambda_h or 1.0),
    )
    lo = int(draws.min())
    counts = np.bincount(draws - lo)
    return Pmf(lo, counts / config.trials, 0.0)
