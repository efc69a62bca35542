"""Upper and lower bounds on the probability that a k-deep transaction is reverted.

Both bounds are a threshold probability ``P(lead + confirmation + race >= k)``
of three independent counts:

* upper: lead and race both follow ``L = 1 + Z + Pi`` (Z with the ``C_b0``
  idle count when ``b0 > 0``); the confirmation phase counts every block mined
  during a delay window as adversarial (total rate ``mu_m``) and adds ``k - 1``
  idle counts.
* lower: the explicit private attack. The lead is ``Pi + C_delta`` plus the
  ``C_alpha`` blocks the adversary mines before the first confirming jumper,
  with windows widened to ``max(delay, Erlang(b0, lambda_h))``; ``k`` jumpers
  each cost ``C_alpha`` plus one delay window (the first ``k - 1`` widened);
  the race uses the plain ``b0 = 0`` lead law.

Ties go to the adversary, hence ``>= k``. The truncated tail is counted as
success in the upper bound and as failure in the lower bound.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

from .delays import ModelParams, c_alpha_pmf, c_b0_pmf, c_delta_pmf
from .lead import (
    EPS_RESIDUAL,
    build_z,
    lead_lower,
    lead_upper,
    ramaswami_stationary,
)
from .pmf import EPS_TAIL, Pmf, ccdf, convolve, convolve_all, power_convolve


class Certified(NamedTuple):
    value: float
    error: float


@dataclass
class BoundReport:
    params: ModelParams
    upper: float
    lower: float
    upper_error: float
    lower_error: float
    intermediates: dict[str, Pmf] = field(default_factory=dict)

    def to_dict(self, intermediates: bool = False) -> dict:
        d = {
            "params": self.params.to_dict(),
            "upper": self.upper,
            "upper_error": self.upper_error,
            "lower": self.lower,
            "lower_error": self.lower_error,
        }
        if intermediates:
            d["intermediates"] = {name: p.to_dict() for name, p in self.intermediates.items()}
        return d


def confirmation_pmf_upper(params: ModelParams, eps_tail: float = EPS_TAIL) -> Pmf:
    """Adversarial blocks (rigged ones included) while tx becomes k-deep."""
    cycle = convolve(c_alpha_pmf(params.alpha, eps_tail), c_delta_pmf(params, total_rate=True, eps_tail=eps_tail), eps_tail)
    s = power_convolve(cycle, params.k, eps_tail)
    if params.b0 > 0:
        s = convolve(s, power_convolve(c_b0_pmf(params, eps_tail), params.k - 1, eps_tail), eps_tail)
    return s


def confirmation_pmf_lower(params: ModelParams, eps_tail: float = EPS_TAIL) -> Pmf:
    """Adversarial blocks under the private attack while tx becomes k-deep.

    Every jumper is preceded by ``C_alpha`` blocks and withheld for one delay
    window; honest miners idle for HP transactions after the first ``k - 1``
    windows only, matching the ``k - 1`` idle counts of the upper bound.
    """
    k = params.k
    ca = c_alpha_pmf(params.alpha, eps_tail)
    plain = c_delta_pmf(params, eps_tail=eps_tail)
    wide = c_delta_pmf(params, tightened=True, eps_tail=eps_tail) if params.b0 > 0 else plain
    return convolve_all(
        [power_convolve(ca, k, eps_tail), power_convolve(wide, k - 1, eps_tail), plain], eps_tail
    )


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def _upper_parts(params, eps_tail, eps_residual):
    z = build_z(params, with_b0=params.b0 > 0, eps_tail=eps_tail)
    st = ramaswami_stationary(z, eps_residual)
    lead = lead_upper(z, st)
    conf = confirmation_pmf_upper(params, eps_tail)
    total = convolve_all([lead, conf, lead], eps_tail)
    return z, st, lead, conf, total


def _lower_parts(params, eps_tail, eps_residual):
    z_wide = build_z(params, tightened=True, eps_tail=eps_tail)
    st_wide = ramaswami_stationary(z_wide, eps_residual)
    c_wide = c_delta_pmf(params, tightened=True, eps_tail=eps_tail)
    lead = convolve(lead_lower(z_wide, st_wide, c_wide, eps_tail), c_alpha_pmf(params.alpha, eps_tail), eps_tail)
    conf = confirmation_pmf_lower(params, eps_tail)
    if params.b0 > 0:
        z_race = build_z(params, eps_tail=eps_tail)
        st_race = ramaswami_stationary(z_race, eps_residual)
    else:
        z_race, st_race = z_wide, st_wide
    race = lead_upper(z_race, st_race)
    total = convolve_all([lead, conf, race], eps_tail)
    lumped = z_wide.pmf.tail_mass + (z_race.pmf.tail_mass if z_race is not z_wide else 0.0)
    return st_wide, lead, conf, race, total, lumped


def violation_upper(params: ModelParams, eps_tail: float = EPS_TAIL,
                    eps_residual: float = EPS_RESIDUAL) -> Certified:
    """Certified upper bound on the safety-violation probability."""
    z, _, _, _, total = _upper_parts(params, eps_tail, eps_residual)
    # Z's own truncated tail was folded into its last point before the recursion
    slack = total.tail_mass + 2 * z.pmf.tail_mass
    return Certified(_clamp(ccdf(total, params.k) + 2 * z.pmf.tail_mass), slack)


def violation_lower(params: ModelParams, eps_tail: float = EPS_TAIL,
                    eps_residual: float = EPS_RESIDUAL) -> Certified:
    """Certified lower bound: probability that the private attack succeeds."""
    *_, total, lumped = _lower_parts(params, eps_tail, eps_residual)
    slack = total.tail_mass + 2 * lumped
    return Certified(_clamp(ccdf(total, params.k) - slack), slack)


def compute_bounds(params: ModelParams, eps_tail: float = EPS_TAIL,
                   eps_residual: float = EPS_RESIDUAL) -> BoundReport:
    """Both bounds for one parameter point, with the intermediate laws."""
    z, st, lbar, s_up, total_up = _upper_parts(params, eps_tail, eps_residual)
    up_slack = total_up.tail_mass + 2 * z.pmf.tail_mass
    upper = _clamp(ccdf(total_up, params.k) + 2 * z.pmf.tail_mass)

    st_w, lead_lo, s_lo, race, total_lo, lumped = _lower_parts(params, eps_tail, eps_residual)
    lo_slack = total_lo.tail_mass + 2 * lumped
    lower = _clamp(ccdf(total_lo, params.k) - lo_slack)

    return BoundReport(
        params=params,
        upper=upper,
        lower=min(lower, upper),
        upper_error=up_slack,
        lower_error=lo_slack,
        intermediates={
            "Z": z.pmf,
            "Pi": st.pi,
            "L_bar": lbar,
            "S_upper": s_up,
            "Pi_lower": st_w.pi,
            "lead_lower": lead_lo,
            "S_lower": s_lo,
            "M_bar_lower": race,
        },
    )


def mempool_sanity(params: ModelParams, factor: float = 10.0) -> list[str]:
    """Warnings when the HP mempool assumptions look shaky.

    ``b / lambda_h`` should dwarf a block cycle ``1/mu_m + E[delay]`` and
    ``b0 / lambda_h`` should dwarf ``E[delay]``; "dwarf" means a factor of ``factor``.
    """
    out = []
    if params.b0 == 0 or params.lambda_h is None:
        return out
    ed = params.delay.mean()
    if params.b is not None:
        fill = params.b / params.lambda_h
        cycle = 1.0 / params.mu_m + ed
        if fill < factor * cycle:
            out.append(
                f"b/lambda_h = {fill:.4g}s is not >> 1/mu_m + E[delay] = {cycle:.4g}s; "
                "the HP mempool may overflow a block"
            )
    wait = params.b0 / params.lambda_h
    if wait < factor * ed:
        out.append(
            f"b0/lambda_h = {wait:.4g}s is not >> E[delay] = {ed:.4g}s; "
            "the HP threshold has little effect on security"
        )
    for msg in out:
        warnings.warn(msg, UserWarning, stacklevel=2)
    return out

