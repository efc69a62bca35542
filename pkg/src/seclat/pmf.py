"""Truncated integer-valued probability mass functions.

Every distribution in the analytic pipeline is a :class:`Pmf`: a contiguous
block of masses starting at ``offset`` plus a ``tail_mass`` that lives
somewhere strictly above the last stored point. Operations propagate the tail
so that the final bounds can be certified (tail counted as "reaches any
threshold" for upper bounds and as "reaches none" for lower bounds).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

EPS_TAIL = 1e-18
NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Pmf:
    offset: int
    masses: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        m = np.array(self.masses, dtype=np.float64).ravel()
        if m.size == 0:
            raise ValueError("masses must be non-empty")
        if np.any(m < 0) or self.tail_mass < 0:
            raise ValueError("masses and tail_mass must be non-negative")
        m += 0.0  # turns -0.0 into 0.0
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "tail_mass", float(self.tail_mass) + 0.0)
        total = m.sum() + self.tail_mass
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"pmf not normalised: sum(masses) + tail = {total!r}")

    @property
    def last(self) -> int:
        return self.offset + self.masses.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.last + 1)

    def __len__(self):
        return self.masses.size

    def __getitem__(self, x: int) -> float:
        """P(X = x) for a stored point, 0 outside the stored range."""
        i = x - self.offset
        if 0 <= i < self.masses.size:
            return float(self.masses[i])
        return 0.0

    def __repr__(self):
        head = np.array2string(self.masses[:6], precision=4)
        more = "..." if self.masses.size > 6 else ""
        return f"Pmf(offset={self.offset}, n={self.masses.size}, masses={head}{more}, tail={self.tail_mass:.3g})"

    def to_dict(self) -> dict:
        return {"offset": self.offset, "masses": self.masses.tolist(), "tail_mass": self.tail_mass}

    @classmethod
    def from_dict(cls, d: dict) -> Pmf:
        return cls(d["offset"], np.asarray(d["masses"], dtype=float), d["tail_mass"])


def _trimmed(offset: int, masses: np.ndarray, tail: float, eps_tail: float) -> Pmf:
    """Move trailing masses whose cumulative sum stays within ``eps_tail`` into the tail.

    Exact zeros at either end are always removed.
    """
    masses = np.clip(masses, 0.0, None)
    nz = np.flatnonzero(masses)
    if nz.size == 0:
        return Pmf(offset, np.zeros(1), tail)
    lo, hi = nz[0], nz[-1] + 1
    offset += int(lo)
    masses = masses[lo:hi]
    if eps_tail > 0 and masses.size > 1:
        rev = np.cumsum(masses[::-1])
        # trailing entries whose total stays within eps_tail; at least one point is kept
        n_drop = int(np.searchsorted(rev, eps_tail, side="right"))
        n_drop = min(n_drop, masses.size - 1)
        if n_drop:
            tail += float(rev[n_drop - 1])
            masses = masses[:-n_drop]
    return Pmf(offset, masses, tail)


def pmf_from_masses(offset: int, masses, eps_tail: float = 0.0) -> Pmf:
    """Build a pmf from explicit masses; the missing probability becomes tail mass."""
    m = np.asarray(masses, dtype=np.float64).ravel()
    if m.size == 0:
        raise ValueError("masses must be non-empty")
    if np.any(m < 0):
        raise ValueError("negative mass")
    s = float(m.sum())
    if s > 1.0 + NORM_TOL:
        raise ValueError(f"masses sum to {s} > 1")
    tail = max(0.0, 1.0 - s)
    if eps_tail:
        return _trimmed(int(offset), m, tail, eps_tail)
    return Pmf(int(offset), m + 0.0, tail)


def delta(x: int = 0) -> Pmf:
    """Point mass at ``x``."""
    return Pmf(x, np.ones(1), 0.0)


def truncate(p: Pmf, eps_tail: float = EPS_TAIL) -> Pmf:
    return _trimmed(p.offset, p.masses.copy(), p.tail_mass, eps_tail)


def shift(p: Pmf, by: int) -> Pmf:
    return Pmf(p.offset + by, p.masses, p.tail_mass)


def convolve(a: Pmf, b: Pmf, eps_tail: float = EPS_TAIL) -> Pmf:
    """Distribution of the sum of two independent variables.

    A stored point plus a tail point is itself somewhere above the stored
    range, so the result tail is ``ta + tb - ta*tb`` before re-truncation.
    """
    masses = np.convolve(a.masses, b.masses)
    tail = a.tail_mass + b.tail_mass - a.tail_mass * b.tail_mass
    return _trimmed(a.offset + b.offset, masses, tail, eps_tail)


def power_convolve(p: Pmf, n: int, eps_tail: float = EPS_TAIL) -> Pmf:
    """n-fold self-convolution by binary exponentiation."""
    if n < 0:
        raise ValueError("n must be non-negative")
    result = delta(0)
    base = p
    while n:
        if n & 1:
            result = convolve(result, base, eps_tail)
        n >>= 1
        if n:
            base = convolve(base, base, eps_tail)
    return result


def convolve_all(pmfs, eps_tail: float = EPS_TAIL) -> Pmf:
    result = delta(0)
    for p in pmfs:
        result = convolve(result, p, eps_tail)
    return result


def ccdf(p: Pmf, x: int) -> float:
    """P(X >= x), counting the truncated tail as reaching every threshold."""
    if x <= p.offset:
        return 1.0
    i = x - p.offset
    return float(p.masses[i:].sum()) + p.tail_mass


def cdf(p: Pmf, x: int) -> float:
    """P(X <= x) over stored points only."""
    i = x - p.offset + 1
    if i <= 0:
        return 0.0
    return float(p.masses[:i].sum())


def mean(p: Pmf) -> float:
    """Expectation with the tail mass placed at the last stored point."""
    if p.tail_mass > 1e-6:
        warnings.warn(f"tail mass {p.tail_mass:.3g} makes the mean unreliable", RuntimeWarning, stacklevel=2)
    return float(np.dot(p.support, p.masses)) + p.tail_mass * p.last


def mean_interval(p: Pmf, cap: float) -> tuple[float, float]:
    """Range of the mean when the tail mass may sit anywhere in (last, cap]."""
    m = mean(p)
    return m, m + p.tail_mass * max(0.0, cap - p.last)


def tv_distance(p: Pmf, q: Pmf) -> float:
    """Total-variation distance over stored points (tails compared as one atom)."""
    lo = min(p.offset, q.offset)
    hi = max(p.last, q.last)
    a = np.zeros(hi - lo + 1)
    b = np.zeros(hi - lo + 1)
    a[p.offset - lo : p.last - lo + 1] = p.masses
    b[q.offset - lo : q.last - lo + 1] = q.masses
    return 0.5 * (np.abs(a - b).sum() + abs(p.tail_mass - q.tail_mass))


def dense(p: Pmf, lo: int, hi: int) -> np.ndarray:
    """Masses on the integer range [lo, hi] as a dense array."""
    out = np.zeros(hi - lo + 1)
    a, b = max(lo, p.offset), min(hi, p.last)
    if a <= b:
        out[a - lo : b - lo + 1] = p.masses[a - p.offset : b - p.offset + 1]
    return out
