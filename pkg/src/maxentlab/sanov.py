"""Exact small-sample large-deviations laboratory.

Events are sets of empirical measures defined by moment constraints.  For
sample size ``n`` over ``D`` outcomes all ``C(n+D-1, D-1)`` histograms are
enumerated (microstates are grouped by histogram, which is exact by
exchangeability), giving the event probability, the projection rate term,
and the conditional-law residual of the finite-sample identity

    (1/n) log Pr(event) + D(P*||P) + residual = 0.

The residual splits into the grouped conditional divergence
``(1/n) D(mu_A || P*^n)`` plus the Pythagorean gap
``E_{mu_bar}[log(P*/P)] - D(P*||P)``.  The gap vanishes when the active
constraints are equalities (every histogram in the event then shares the
projected moments, which is the textbook setting); for half-space events
it is non-negative, and the three-term identity above closes exactly for
*any* reference distribution, which is what makes it an identity rather
than a bound.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from ._rng import substream
from .dist import ConstraintKind, ConstraintSet, FiniteDistribution
from .errors import DomainError, EmptyEvent, EnumerationCapExceeded
from .identities import IdentityReport
from .projection import ProjectionResult, SolverOptions, Status, project_inequality

DEFAULT_ENUMERATION_CAP = 2_000_000
_WILSON_Z = 1.959963984540054  # 97.5% normal quantile
_MC_CHUNK = 1 << 16


class Method(str, enum.Enum):
    EXACT = "exact-enumeration"
    MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class SanovReport:
    """Event probability, rate, and residual for one (P, A, n) instance.

    For exact enumeration ``(1/n) log_prob + rate + residual == 0`` up to
    float roundoff and ``residual >= 0`` (the event sets are convex).  For
    Monte Carlo the residual is the identity-implied estimate, and the
    Wilson 95% interval for the hit probability is attached.
    """

    n: int
    log_prob: float
    rate: float
    residual: float
    num_histograms_in_event: int
    method: Method
    projection: ProjectionResult
    conditional_divergence: float = math.nan
    pythagorean_gap: float = math.nan
    boundary_projection: bool = False
    empty_event: bool = False
    hits: int | None = None
    trials: int | None = None
    wilson_low: float | None = None
    wilson_high: float | None = None

    def identity_defect(self) -> float:
        """``(1/n) log_prob + rate + residual``; zero for exact reports."""
        return self.log_prob / self.n + self.rate + self.residual

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "log_prob": self.log_prob,
            "rate": self.rate,
            "residual": self.residual,
            "num_histograms_in_event": self.num_histograms_in_event,
            "method": self.method.value,
            "conditional_divergence": self.conditional_divergence,
            "pythagorean_gap": self.pythagorean_gap,
            "boundary_projection": self.boundary_projection,
            "empty_event": self.empty_event,
            "projection": self.projection.to_json(),
        }
        if self.method is Method.MONTE_CARLO:
            out.update(
                hits=self.hits,
                trials=self.trials,
                wilson_low=self.wilson_low,
                wilson_high=self.wilson_high,
            )
        return out


@dataclass(frozen=True)
class ConditionalLaw:
    """The sampling law conditioned on the event, grouped by histogram.

    ``masses[j]`` is the conditional probability of observing histogram
    ``histograms[j]``; per-microstate masses follow by dividing out the
    multinomial count of each histogram.
    """

    histograms: np.ndarray
    masses: np.ndarray
    n: int


def num_compositions(n: int, parts: int) -> int:
    return math.comb(n + parts - 1, parts - 1)


def compositions(n: int, parts: int, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """All vectors of ``parts`` non-negative integers summing to ``n``.

    Raises :class:`EnumerationCapExceeded` when the count would pass ``cap``.
    """
    if parts < 1:
        raise DomainError("need at least one part")
    total = num_compositions(n, parts)
    if total > cap:
        raise EnumerationCapExceeded(
            f"{total} histograms exceed the cap of {cap}"
        )
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n + 1):
        rest = compositions(n - first, parts - 1, cap)
        col = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([col, rest]))
    return np.vstack(blocks)


def _event_mask(
    comps: np.ndarray, constraints: ConstraintSet, n: int, tol: float
) -> np.ndarray:
    if constraints.dim == 0:
        return np.ones(comps.shape[0], dtype=bool)
    emp = comps.T / n  # (D, M)
    vals = constraints.features.matrix @ emp  # (d, M)
    mask = np.ones(comps.shape[0], dtype=bool)
    for i, kind in enumerate(constraints.kinds):
        diff = vals[i] - constraints.targets[i]
        if kind is ConstraintKind.EQ:
            mask &= np.abs(diff) <= tol
        elif kind is ConstraintKind.GE:
            mask &= diff >= -tol
        else:
            mask &= diff <= tol
    return mask


def _log_histogram_probs(comps: np.ndarray, p: FiniteDistribution) -> np.ndarray:
    """Vectorized exact log-probabilities of each histogram row under p."""
    n = int(comps[0].sum())
    log_w = gammaln(n + 1) - gammaln(comps + 1).sum(axis=1)
    supported = p.support
    out = np.full(comps.shape[0], -math.inf)
    ok = ~(comps[:, ~supported] > 0).any(axis=1)
    if np.any(ok):
        out[ok] = log_w[ok] + comps[np.ix_(ok, supported)] @ p.log_probs[supported]
    return out


def _masked_log_ratio(
    weights: np.ndarray, num_log: np.ndarray, den_log: np.ndarray
) -> float:
    """``sum_i weights[i] * (num_log[i] - den_log[i])`` with 0 * (+-inf) = 0.

    Returns ``inf`` when positive weight meets a ``-inf`` numerator term's
    counterpart (support violation of the denominator distribution).
    """
    total = 0.0
    for w, a, b in zip(weights, num_log, den_log):
        if w == 0.0:
            continue
        term = a - b
        if math.isinf(term):
            return math.inf if (term > 0) == (w > 0) else -math.inf
        total += float(w) * float(term)
    return total


def _enumerate(
    p: FiniteDistribution,
    constraints: ConstraintSet,
    n: int,
    cap: int,
    membership_tol: float,
):
    if constraints.dim:
        constraints.features.check_alphabet(p)
    comps = compositions(n, len(p), cap)
    mask = _event_mask(comps, constraints, n, membership_tol)
    log_probs = _log_histogram_probs(comps, p)
    return comps, mask, log_probs


def enumerate_event(
    p: FiniteDistribution,
    constraints: ConstraintSet,
    n: int,
    opts: SolverOptions | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    membership_tol: float = 1e-9,
) -> SanovReport:
    """Exact event probability and finite-sample identity decomposition.

    The rate term comes from the information projection of ``p`` onto the
    constraints; boundary-nonattained projections are evaluated at the
    capped parameters and flagged.
    """
    if n < 1:
        raise DomainError("sample size must be at least 1")
    comps, mask, lhp = _enumerate(p, constraints, n, cap, membership_tol)
    members = comps[mask]
    member_lhp = lhp[mask]
    finite = member_lhp > -math.inf

    projection = project_inequality(p, constraints, opts)
    if projection.status is Status.INFEASIBLE or not np.any(finite):
        return SanovReport(
            n=n,
            log_prob=-math.inf,
            rate=projection.min_divergence,
            residual=math.nan,
            num_histograms_in_event=int(mask.sum()),
            method=Method.EXACT,
            projection=projection,
            empty_event=True,
            boundary_projection=projection.status is Status.BOUNDARY_NONATTAINED,
        )
    p_star = projection.model.to_distribution()
    rate = projection.min_divergence

    log_prob = float(logsumexp(member_lhp[finite]))
    weights = np.exp(member_lhp[finite] - log_prob)
    sub = members[finite]
    log_w = gammaln(n + 1) - gammaln(sub + 1).sum(axis=1)

    # Grouped conditional divergence (1/n) D(mu_A || P*^n).
    star_scores = np.full(sub.shape[0], -math.inf)
    star_ok = ~(sub[:, ~p_star.support] > 0).any(axis=1)
    if np.any(star_ok):
        star_scores[star_ok] = (
            sub[np.ix_(star_ok, p_star.support)] @ p_star.log_probs[p_star.support]
        )
    if np.any(~star_ok & (weights > 0)):
        # The capped projection has no support on part of the event; the
        # conditional divergence is infinite and the identity cannot close.
        conditional_div = math.inf
        gap = math.nan
        residual = math.inf
    else:
        per_hist = (member_lhp[finite] - log_prob) - log_w - star_scores
        conditional_div = float(np.dot(weights, per_hist)) / n
        # Pythagorean gap: (E_mu_bar - E_P*)[log(P*/P)].
        mu_bar = weights @ (sub / n)
        log_ratio_mu = _masked_log_ratio(mu_bar, p_star.log_probs, p.log_probs)
        log_ratio_star = _masked_log_ratio(
            p_star.probs, p_star.log_probs, p.log_probs
        )
        gap = log_ratio_mu - log_ratio_star
        residual = conditional_div + gap
    return SanovReport(
        n=n,
        log_prob=log_prob,
        rate=rate,
        residual=residual,
        num_histograms_in_event=int(mask.sum()),
        method=Method.EXACT,
        projection=projection,
        conditional_divergence=conditional_div,
        pythagorean_gap=gap,
        boundary_projection=projection.status is Status.BOUNDARY_NONATTAINED,
    )


def conditional_law(
    p: FiniteDistribution,
    constraints: ConstraintSet,
    n: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
    membership_tol: float = 1e-9,
) -> ConditionalLaw:
    """Histogram-level conditional law given the event; masses sum to 1."""
    comps, mask, lhp = _enumerate(p, constraints, n, cap, membership_tol)
    member_lhp = lhp[mask]
    finite = member_lhp > -math.inf
    if not np.any(finite):
        raise EmptyEvent("the event has probability zero at this sample size")
    histograms = comps[mask][finite]
    log_prob = float(logsumexp(member_lhp[finite]))
    masses = np.exp(member_lhp[finite] - log_prob)
    return ConditionalLaw(histograms=histograms, masses=masses, n=n)


def gibbs_conditioning_curve(
    p: FiniteDistribution,
    constraints: ConstraintSet,
    n_list: list[int],
    opts: SolverOptions | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    membership_tol: float = 1e-9,
) -> list[SanovReport]:
    """Per-``n`` identity decompositions along a sample-size schedule.

    The conditional residual tends to zero but is not asserted monotone;
    consumers compare endpoints.
    """
    return [
        enumerate_event(p, constraints, n, opts, cap, membership_tol)
        for n in n_list
    ]


def gibbs_curve_csv(reports: list[SanovReport]) -> str:
    lines = ["n,log_prob,rate,residual"]
    for r in reports:
        lines.append(f"{r.n},{r.log_prob!r},{r.rate!r},{r.residual!r}")
    return "\n".join(lines) + "\n"


def nested_relative_probability(
    p: FiniteDistribution,
    outer: ConstraintSet,
    inner: ConstraintSet,
    n: int,
    opts: SolverOptions | None = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
    membership_tol: float = 1e-9,
) -> IdentityReport:
    """Relative probability of a nested event via the projection of the
    outer one: checks

        log Pr(inner | outer) = -(D(mu_B||P*^n) - D(mu_A||P*^n)) + slack

    where the slack term ``n (E_mu_bar_B - E_mu_bar_A)[log(P/P*)]``
    vanishes for equality-type outer constraints.  Containment of the
    inner event in the outer one is verified by enumeration.
    """
    comps, mask_outer, lhp = _enumerate(p, outer, n, cap, membership_tol)
    mask_inner = _event_mask(comps, inner, n, membership_tol)
    if np.any(mask_inner & ~mask_outer):
        raise DomainError(
            "inner event is not contained in the outer event at this n"
        )
    finite = lhp > -math.inf
    if not np.any(mask_outer & finite) or not np.any(mask_inner & finite):
        raise EmptyEvent("both events must have positive probability")

    projection = project_inequality(p, outer, opts)
    p_star = projection.model.to_distribution()

    def event_stats(mask: np.ndarray):
        sel = mask & finite
        sub = comps[sel]
        log_prob = float(logsumexp(lhp[sel]))
        weights = np.exp(lhp[sel] - log_prob)
        log_w = gammaln(n + 1) - gammaln(sub + 1).sum(axis=1)
        scores = np.full(sub.shape[0], -math.inf)
        ok = ~(sub[:, ~p_star.support] > 0).any(axis=1)
        if np.any(ok):
            scores[ok] = (
                sub[np.ix_(ok, p_star.support)] @ p_star.log_probs[p_star.support]
            )
        div = float(np.dot(weights, (lhp[sel] - log_prob) - log_w - scores))
        mu_bar = weights @ (sub / n)
        return log_prob, div, mu_bar

    log_prob_outer, div_outer, mu_bar_outer = event_stats(mask_outer)
    log_prob_inner, div_inner, mu_bar_inner = event_stats(mask_inner)

    direct = log_prob_inner - log_prob_outer
    slack = n * _masked_log_ratio(
        mu_bar_inner - mu_bar_outer, p.log_probs, p_star.log_probs
    )
    formula = -(div_inner - div_outer) + slack
    residual = direct - formula
    return IdentityReport(
        name="nested_relative_probability",
        lhs=direct,
        rhs=formula,
        residual=residual,
        tol=1e-10,
        passed=bool(abs(residual) <= 1e-10),
        details={
            "divergence_inner": div_inner / n,
            "divergence_outer": div_outer / n,
            "slack": slack,
        },
    )


def _wilson_interval(hits: int, trials: int) -> tuple[float, float]:
    z2 = _WILSON_Z**2
    phat = hits / trials
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = (
        _WILSON_Z
        * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials**2))
        / denom
    )
    return max(0.0, center - half), min(1.0, center + half)


def monte_carlo_event(
    p: FiniteDistribution,
    constraints: ConstraintSet,
    n: int,
    trials: int,
    seed: int = 0,
    opts: SolverOptions | None = None,
    threads: int = 1,
    membership_tol: float = 1e-9,
) -> SanovReport:
    """Monte Carlo estimate of the event probability, for instances past
    the enumeration cap.

    Trials are partitioned into fixed-size chunks with counter-derived
    random streams, so the hit count is independent of thread count.  The
    rate term stays exact (projection); the residual is the
    identity-implied estimate and is flagged by ``method``.
    """
    if trials < 1:
        raise DomainError("need at least one trial")
    if constraints.dim:
        constraints.features.check_alphabet(p)

    num_chunks = (trials + _MC_CHUNK - 1) // _MC_CHUNK

    def run_chunk(idx: int) -> int:
        size = min(_MC_CHUNK, trials - idx * _MC_CHUNK)
        rng = substream(seed, idx)
        counts = rng.multinomial(n, p.probs, size=size)
        if constraints.dim == 0:
            return size
        vals = constraints.features.matrix @ (counts.T / n)
        ok = np.ones(size, dtype=bool)
        for i, kind in enumerate(constraints.kinds):
            diff = vals[i] - constraints.targets[i]
            if kind is ConstraintKind.EQ:
                ok &= np.abs(diff) <= membership_tol
            elif kind is ConstraintKind.GE:
                ok &= diff >= -membership_tol
            else:
                ok &= diff <= membership_tol
        return int(ok.sum())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(run_chunk, range(num_chunks)))
    else:
        hits = sum(run_chunk(i) for i in range(num_chunks))

    projection = project_inequality(p, constraints, opts)
    rate = projection.min_divergence
    low, high = _wilson_interval(hits, trials)
    if hits == 0:
        log_prob = -math.inf
        residual = math.nan
    else:
        log_prob = math.log(hits / trials)
        residual = -log_prob / n - rate
    return SanovReport(
        n=n,
        log_prob=log_prob,
        rate=rate,
        residual=residual,
        num_histograms_in_event=0,
        method=Method.MONTE_CARLO,
        projection=projection,
        boundary_projection=projection.status is Status.BOUNDARY_NONATTAINED,
        empty_event=hits == 0,
        hits=hits,
        trials=trials,
        wilson_low=low,
        wilson_high=high,
    )
