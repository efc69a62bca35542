"""Network-delay distributions and the mixed-Poisson counts they induce.

Time is in seconds throughout. ``erlang(n, rate)`` is the sum of ``n``
independent exponentials of the given rate (mean ``n / rate``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import integrate, special, stats

from .pmf import EPS_TAIL, Pmf, delta

KINDS = ("deterministic", "exponential", "erlang", "gamma", "empirical")
QUANTILE_CAP = 1e-13
_TINY = np.finfo(float).tiny  # eps_tail = 0 means "until the masses underflow"


def _number(x) -> float:
    """Accept plain numbers or fraction strings such as ``"1/600"``."""
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


@dataclass(frozen=True)
class DelaySpec:
    kind: str
    d: float = 0.0
    rate: float = 0.0
    shape: float = 0.0
    samples: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}")
        if self.kind == "deterministic":
            if not self.d >= 0 or not math.isfinite(self.d):
                raise ValueError("deterministic delay must be finite and >= 0")
        elif self.kind == "empirical":
            s = tuple(float(x) for x in self.samples)
            if not s or any(not (x >= 0 and math.isfinite(x)) for x in s):
                raise ValueError("empirical samples must be non-empty, finite and >= 0")
            object.__setattr__(self, "samples", s)
        else:
            if not self.rate > 0:
                raise ValueError("rate must be > 0")
            if self.kind == "erlang" and (self.shape < 1 or self.shape != int(self.shape)):
                raise ValueError("erlang shape must be a positive integer")
            if self.kind == "gamma" and not self.shape > 0:
                raise ValueError("gamma shape must be > 0")

    # constructors -----------------------------------------------------------

    @classmethod
    def deterministic(cls, d: float) -> DelaySpec:
        return cls("deterministic", d=float(d))

    @classmethod
    def exponential(cls, rate: float) -> DelaySpec:
        return cls("exponential", rate=float(rate))

    @classmethod
    def erlang(cls, shape: int, rate: float) -> DelaySpec:
        return cls("erlang", shape=int(shape), rate=float(rate))

    @classmethod
    def gamma(cls, shape: float, rate: float) -> DelaySpec:
        return cls("gamma", shape=float(shape), rate=float(rate))

    @classmethod
    def empirical(cls, samples) -> DelaySpec:
        return cls("empirical", samples=tuple(samples))

    @classmethod
    def from_dict(cls, d: dict) -> DelaySpec:
        d = dict(d)
        kind = d.pop("kind")
        if kind == "deterministic":
            return cls.deterministic(_number(d.get("d", d.get("value", 0.0))))
        if kind == "exponential":
            return cls.exponential(_number(d["rate"]))
        if kind == "erlang":
            return cls.erlang(int(d["shape"]), _number(d["rate"]))
        if kind == "gamma":
            return cls.gamma(_number(d["shape"]), _number(d["rate"]))
        if kind == "empirical":
            return cls.empirical([_number(x) for x in d["samples"]])
        raise ValueError(f"unknown delay kind {kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "deterministic":
            return {"kind": "deterministic", "d": self.d}
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        if self.kind == "empirical":
            return {"kind": "empirical", "samples": list(self.samples)}
        shape = int(self.shape) if self.kind == "erlang" else self.shape
        return {"kind": self.kind, "shape": shape, "rate": self.rate}

    # distribution queries ---------------------------------------------------

    def _scipy(self):
        if self.kind == "exponential":
            return stats.expon(scale=1.0 / self.rate)
        if self.kind in ("erlang", "gamma"):
            return stats.gamma(self.shape, scale=1.0 / self.rate)
        return None

    def mean(self) -> float:
        if self.kind == "deterministic":
            return self.d
        if self.kind == "empirical":
            return float(np.mean(self.samples))
        if self.kind == "exponential":
            return 1.0 / self.rate
        return self.shape / self.rate

    def survival(self, t):
        """P(delay > t)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "deterministic":
            return (t < self.d).astype(float)
        if self.kind == "empirical":
            s = np.sort(np.asarray(self.samples))
            return 1.0 - np.searchsorted(s, t, side="right") / s.size
        if self.kind == "exponential":
            return np.exp(-self.rate * np.maximum(t, 0.0))
        return special.gammaincc(self.shape, self.rate * np.maximum(t, 0.0))

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def atoms(self) -> list[float]:
        if self.kind == "deterministic":
            return [self.d]
        if self.kind == "empirical":
            return sorted(set(self.samples))
        return []

    def landmarks(self) -> list[float]:
        """Points where quadrature should split the delay axis."""
        if self.kind in ("deterministic", "empirical"):
            return self.atoms()
        m = self.mean()
        sd = math.sqrt(self.shape) / self.rate if self.kind != "exponential" else m
        return [x for x in (m - 2 * sd, m - sd, m, m + sd, m + 2 * sd) if x > 0]

    def cap(self, q: float = QUANTILE_CAP) -> float:
        """Delay beyond which the survival function is below ``q``."""
        if self.kind == "deterministic":
            return self.d
        if self.kind == "empirical":
            return max(self.samples)
        return float(self._scipy().isf(q))

    def scaled(self, factor: float) -> DelaySpec:
        """Same shape, time axis multiplied by ``factor``."""
        if factor <= 0:
            raise ValueError("scale factor must be > 0")
        if self.kind == "deterministic":
            return replace(self, d=self.d * factor)
        if self.kind == "empirical":
            return replace(self, samples=tuple(x * factor for x in self.samples))
        return replace(self, rate=self.rate / factor)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "deterministic":
            return np.full(size, self.d)
        if self.kind == "empirical":
            return rng.choice(np.asarray(self.samples), size=size)
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size)
        return rng.gamma(self.shape, 1.0 / self.rate, size)


@dataclass(frozen=True)
class MaxDelay:
    """Delay ``max(base, Erlang(b0, lambda_h))``: a jumper's delay window extended
    until ``b0`` high-priority transactions have arrived."""

    base: DelaySpec
    b0: int
    lambda_h: float
    _idle: DelaySpec = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.b0 < 1:
            raise ValueError("MaxDelay needs b0 >= 1; use the base delay directly for b0 = 0")
        if not self.lambda_h > 0:
            raise ValueError("lambda_h must be > 0")
        object.__setattr__(self, "_idle", DelaySpec.erlang(self.b0, self.lambda_h))

    kind = "max"

    @property
    def idle(self) -> DelaySpec:
        return self._idle

    def survival(self, t):
        return 1.0 - self.base.cdf(t) * self.idle.cdf(t)

    def cdf(self, t):
        return self.base.cdf(t) * self.idle.cdf(t)

    def atoms(self) -> list[float]:
        return self.base.atoms()

    def landmarks(self) -> list[float]:
        return sorted(set(self.base.landmarks()) | set(self.idle.landmarks()))

    def cap(self, q: float = QUANTILE_CAP) -> float:
        return max(self.base.cap(q), self.idle.cap(q))

    def mean(self) -> float:
        return _integrate_axis(lambda t: self.survival(t), self.landmarks(), self.cap())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.maximum(self.base.sample(rng, size), self.idle.sample(rng, size))


def _integrate_axis(f, points, cap, epsabs=1e-14):
    """Integrate ``f`` over [0, cap] piecewise between the given points."""
    knots = sorted({0.0, cap, *(p for p in points if 0.0 < p < cap)})
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-12, limit=200)
        total += val
    return total


def max_delay_spec(delay: DelaySpec, b0: int, lambda_h: float) -> MaxDelay:
    """Delay window stretched to at least the wait for ``b0`` HP transactions."""
    return MaxDelay(delay, int(b0), float(lambda_h))


# mixed-Poisson counts -------------------------------------------------------


def _tail_index(sf, mean: float, eps_tail: float) -> int:
    """Smallest n with sf(n) = P(N > n) <= eps_tail (isf is unreliable this deep)."""
    eps_tail = max(eps_tail, _TINY)
    n = max(int(mean), 0)
    step = max(int(math.sqrt(mean)), 1)
    while sf(n) > eps_tail:
        n += step
        step *= 2
    lo, hi = -1, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sf(mid) > eps_tail:
            lo = mid
        else:
            hi = mid
    return hi


def _discrete_pmf(dist, mean: float, eps_tail: float) -> Pmf:
    n = _tail_index(dist.sf, mean, eps_tail)
    ks = np.arange(n + 1)
    return Pmf(0, dist.pmf(ks), float(dist.sf(n)))


def _poisson_mixture(means: np.ndarray, eps_tail: float) -> Pmf:
    means = np.asarray(means, dtype=float)
    if np.all(means == 0):
        return delta(0)
    n = _tail_index(lambda j: stats.poisson.sf(j, means.max()), means.max(), eps_tail)
    ks = np.arange(n + 1)
    masses = stats.poisson.pmf(ks[None, :], means[:, None]).mean(axis=0)
    tail = float(stats.poisson.sf(n, means).mean())
    return Pmf(0, masses, tail)


def quadrature_mixed_poisson(delay, arrival_rate: float, eps_tail: float = EPS_TAIL) -> Pmf:
    """Mixed-Poisson counts by integrating against the delay's survival function.

    With ``p_i(t)`` the Poisson(rt) mass at ``i``, ``P(N > i)`` equals
    ``r * int_0^inf p_i(t) S(t) dt``; atoms of the delay need no special care.
    All tails are integrated together as one vector-valued integrand.
    """
    r = float(arrival_rate)
    if r == 0:
        return delta(0)
    cap = delay.cap()
    if cap == 0:
        return delta(0)
    n = _tail_index(lambda j: stats.poisson.sf(j, r * cap), r * cap, eps_tail) + 1
    ks = np.arange(n + 1)
    log_fact = special.gammaln(ks + 1.0)

    def integrand(t):
        rt = r * t
        pois = np.exp(special.xlogy(ks, rt) - rt - log_fact)
        return r * pois * delay.survival(t)

    knots = sorted({0.0, cap, *(x for x in delay.landmarks() if 0.0 < x < cap)})
    tails = np.zeros(n + 1)
    for a, b in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad_vec(integrand, a, b, epsabs=1e-15, epsrel=1e-12, norm="max", limit=400)
        tails += val
    tails = np.clip(tails, 0.0, None)
    # first index whose tail is within budget
    stop = int(np.argmax(tails <= eps_tail)) if np.any(tails <= eps_tail) else n
    tails = tails[: stop + 1]
    masses = np.empty(tails.size)
    masses[0] = 1.0 - tails[0]
    masses[1:] = tails[:-1] - tails[1:]
    return Pmf(0, np.clip(masses, 0.0, None), float(tails[-1]))


def mixed_poisson_pmf(delay, arrival_rate: float, eps_tail: float = EPS_TAIL) -> Pmf:
    """Number of Poisson(``arrival_rate``) arrivals during a random delay."""
    if arrival_rate < 0:
        raise ValueError("arrival rate must be >= 0")
    r = float(arrival_rate)
    if r == 0:
        return delta(0)
    if isinstance(delay, MaxDelay):
        return quadrature_mixed_poisson(delay, r, eps_tail)
    kind = delay.kind
    if kind == "deterministic":
        return delta(0) if delay.d == 0 else _discrete_pmf(stats.poisson(r * delay.d), r * delay.d, eps_tail)
    if kind == "empirical":
        return _poisson_mixture(r * np.asarray(delay.samples), eps_tail)
    shape = 1.0 if kind == "exponential" else delay.shape
    return _discrete_pmf(stats.nbinom(shape, delay.rate / (delay.rate + r)), shape * r / delay.rate, eps_tail)


def expected_count(delay, arrival_rate: float) -> float:
    return arrival_rate * delay.mean()


def c_alpha_pmf(alpha: float, eps_tail: float = EPS_TAIL) -> Pmf:
    """Adversarial blocks mined before the next honest block: Geometric(alpha) failures."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if alpha == 1:
        return delta(0)
    beta = 1.0 - alpha
    eps_tail = max(eps_tail, _TINY)
    n = max(int(math.ceil(math.log(eps_tail) / math.log(beta))) - 1, 0)
    ks = np.arange(n + 1)
    return Pmf(0, alpha * beta**ks, beta ** (n + 1))


# model parameters -------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    mu_m: float
    alpha: float
    k: int
    b0: int = 0
    lambda_h: float | None = None
    b: int | None = None
    delay: DelaySpec = DelaySpec.deterministic(0.0)

    def __post_init__(self):
        if not self.mu_m > 0:
            raise ValueError("mu_m must be > 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.k < 1 or int(self.k) != self.k:
            raise ValueError("k must be a positive integer")
        if self.b0 < 0 or int(self.b0) != self.b0:
            raise ValueError("b0 must be a non-negative integer")
        if self.b0 > 0 and not (self.lambda_h is not None and self.lambda_h > 0):
            raise ValueError("lambda_h > 0 is required when b0 > 0")
        if self.b is not None and self.b < 1:
            raise ValueError("b must be a positive block size")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "b0", int(self.b0))

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha

    @property
    def adversary_rate(self) -> float:
        return self.beta * self.mu_m

    def replace(self, **changes) -> ModelParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "mu_m": self.mu_m,
            "alpha": self.alpha,
            "k": self.k,
            "b0": self.b0,
            "lambda_h": self.lambda_h,
            "b": self.b,
            "delay": self.delay.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelParams:
        d = dict(d)
        delay = d.pop("delay", {"kind": "deterministic", "d": 0.0})
        lam = d.pop("lambda_h", None)
        b = d.pop("b", None)
        unknown = set(d) - {"mu_m", "alpha", "k", "b0"}
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(
            mu_m=_number(d["mu_m"]),
            alpha=_number(d["alpha"]),
            k=int(d["k"]),
            b0=int(d.get("b0", 0)),
            lambda_h=None if lam is None else _number(lam),
            b=None if b is None else int(b),
            delay=delay if isinstance(delay, DelaySpec) else DelaySpec.from_dict(delay),
        )


def c_delta_pmf(params: ModelParams, total_rate: bool = False, tightened: bool = False,
                eps_tail: float = EPS_TAIL) -> Pmf:
    """Blocks mined during one jumper's delay window.

    ``total_rate`` counts all blocks (rate mu_m) instead of adversarial ones;
    ``tightened`` stretches the window to ``max(delay, Erlang(b0, lambda_h))``.
    """
    rate = params.mu_m if total_rate else params.adversary_rate
    return mixed_poisson_pmf(window(params, tightened), rate, eps_tail)


def window(params: ModelParams, tightened: bool = False):
    if tightened and params.b0 > 0:
        return max_delay_spec(params.delay, params.b0, params.lambda_h)
    return params.delay


def c_b0_pmf(params: ModelParams, eps_tail: float = EPS_TAIL) -> Pmf:
    """Adversarial blocks mined while honest miners wait for b0 HP transactions."""
    if params.b0 == 0:
        return delta(0)
    return mixed_poisson_pmf(DelaySpec.erlang(params.b0, params.lambda_h), params.adversary_rate, eps_tail)
