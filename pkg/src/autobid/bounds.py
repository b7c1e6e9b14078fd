"""Closed-form individual welfare lower bounds and their ingredients.

Implements the base VCG bound, the advice-accuracy threshold needed for a
target guarantee, Delta-separation of values, the GSP/GFP bound, exact
enumeration of competitor coverings, and the covering-improved bound.

A covering for bidder i is a set of competitors that can jointly absorb all
of i's potential welfare losses: each member takes exclusive responsibility
for a nonempty group of auctions where i has positive efficient welfare and
the member's value is positive but smaller than i's.  Enumerating coverings
this way keeps every covering no larger than min(M, N-1); a pinned
3-bidder instance in the test suite fixes the intended semantics ({2} and
{2,3} for its first bidder).

Validity caveat: the closed-form guarantees hold for parallel single-slot
auctions, where losing a contested auction is all-or-nothing.  With several
slots per auction a partially displaced bidder keeps a lower slot and pays
her own reserve floor there, a payment the displacing competitor's ROAS
budget never has to cover; small multi-slot instances can then undershoot
the bounds slightly.  The functions compute the formulas for any instance,
but the verification suite asserts them on single-slot pools.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import AuctionResult, InstanceSpec
from .welfare import EfficientOutcome, efficient_outcome, fmt


class DomainError(ValueError):
    """A bound was requested outside its validity region."""


class EnumerationCapError(RuntimeError):
    """Instance too large for exact covering enumeration."""


def vcg_bound(opt: EfficientOutcome, bidder: int, alpha_i: float, beta: float) -> float:
    """1 - (1-beta)/(alpha_i - 1) * OPT_{-i}/OPT_i (may be negative)."""
    if alpha_i <= 1.0:
        raise DomainError("alpha_i must exceed 1")
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)")
    opt_i = opt.opt_per_bidder[bidder]
    if opt_i <= 0:
        raise DomainError("bound undefined for a bidder with zero efficient welfare")
    return 1.0 - (1.0 - beta) / (alpha_i - 1.0) * opt.opt_minus[bidder] / opt_i


def required_beta(delta_target: float, alpha_min: float, opt: EfficientOutcome) -> float:
    """Advice accuracy sufficient for every bidder to retain a delta_target share.

    Returns 1 - (1-delta)*(alpha_min-1)*min_i OPT_i/OPT_{-i}, clamped to
    [0, 1].  Bidders with zero efficient welfare carry no guarantee and are
    skipped; bidders facing no positive-welfare competitor never bind.  A
    return value of 1 means the target is only approached as beta -> 1.
    """
    if not (0.0 <= delta_target <= 1.0):
        raise DomainError("delta_target must lie in [0, 1]")
    if alpha_min <= 1.0:
        raise DomainError("alpha_min must exceed 1")
    opt_i = opt.opt_per_bidder
    active = opt_i > 0
    if not active.any():
        raise DomainError("every bidder has zero efficient welfare")
    ratios = np.where(opt.opt_minus[active] > 0,
                      opt_i[active] / np.maximum(opt.opt_minus[active], 1e-300),
                      np.inf)
    min_ratio = float(ratios.min())
    if not math.isfinite(min_ratio):
        return 0.0
    value = 1.0 - (1.0 - delta_target) * (alpha_min - 1.0) * min_ratio
    return min(max(value, 0.0), 1.0)


def delta_separation(values) -> float:
    """Largest Delta for which the values are Delta-separated.

    Per auction, zero values are ignored and the remaining values sorted;
    the result is the minimum adjacent ratio across all auctions.  Two equal
    positive values in one auction give 1 (not separated); if no auction has
    two positive values the separation is unconstrained and +inf is returned.
    """
    v = np.asarray(values, dtype=np.float64)
    best = math.inf
    for j in range(v.shape[1]):
        col = np.sort(v[v[:, j] > 0, j])[::-1]
        for hi, lo in zip(col, col[1:]):
            best = min(best, hi / lo)
    return best


def gsp_gfp_bound(
    opt: EfficientOutcome, bidder: int, beta: float, delta: float
) -> float:
    """1 - (1-beta)/(beta - delta/(2*delta-1)) * OPT_{-i}/OPT_i.

    Valid for Delta-separated values with beta above the threshold
    delta/(2*delta - 1); undominated bids are assumed (b >= reserve).
    """
    if delta <= 1.0:
        raise DomainError("delta must exceed 1")
    threshold = 0.5 if math.isinf(delta) else delta / (2.0 * delta - 1.0)
    if not (threshold < beta < 1.0):
        raise DomainError(
            f"beta must exceed the separation threshold delta/(2*delta-1) = "
            f"{threshold:.6g} and stay below 1; got beta = {beta}"
        )
    opt_i = opt.opt_per_bidder[bidder]
    if opt_i <= 0:
        raise DomainError("bound undefined for a bidder with zero efficient welfare")
    return 1.0 - (1.0 - beta) / (beta - threshold) * opt.opt_minus[bidder] / opt_i


def valid_multiplier_region(delta: float) -> tuple[float, float]:
    """Half-open interval [1, Delta) of uniform multipliers that keep
    truthful competitors feasible on Delta-separated values (sufficient,
    not necessary)."""
    if delta <= 1.0:
        raise DomainError("delta must exceed 1")
    return (1.0, delta)


@dataclass
class CoveringSet:
    """All coverings of a bidder's positive-OPT auctions by competitors."""

    bidder: int
    li: frozenset[int]  # auctions with OPT_{i,j} > 0
    coverings: tuple[frozenset[int], ...]
    restricted_welfare: np.ndarray  # efficient welfare of each covering alone
    coverable: bool  # False when some auction has no eligible competitor


def _loss_sets(instance: InstanceSpec, opt: EfficientOutcome, bidder: int):
    """L_i and the per-competitor sets B_i(k) of auctions k can take from i."""
    v = instance.values
    li = frozenset(np.flatnonzero(opt.opt_matrix[bidder] > 0).tolist())
    b_sets = {}
    for k in range(instance.n_bidders):
        if k == bidder:
            continue
        mask = (opt.opt_matrix[bidder] > 0) & (v[k] > 0) & (v[k] < v[bidder])
        b_sets[k] = frozenset(np.flatnonzero(mask).tolist())
    return li, b_sets


def _enumerate_owner_images(li: list[int], owners: dict[int, list[int]]):
    """Distinct sets of competitors obtainable by giving each auction an owner."""
    images: set[frozenset[int]] = set()
    seen: set[tuple[int, frozenset[int]]] = set()

    def walk(idx: int, used: frozenset[int]):
        if idx == len(li):
            images.add(used)
            return
        key = (idx, used)
        if key in seen:
            return
        seen.add(key)
        for k in owners[li[idx]]:
            walk(idx + 1, used | {k})

    walk(0, frozenset())
    return images


def enumerate_coverings(
    instance: InstanceSpec,
    bidder: int,
    opt: EfficientOutcome | None = None,
    cap: int = 12,
) -> CoveringSet:
    """Enumerate every covering of bidder i's positive-OPT auctions.

    A subset C of competitors is a covering when the auctions of L_i can be
    split among its members with every member taking at least one auction
    from her set B_i(k) = {j : OPT_{i,j} > 0 and 0 < v_{k,j} < v_{i,j}}.
    Returns the empty covering alone when L_i is empty, and an empty list
    (coverable = False) when some auction of L_i has no eligible competitor.
    """
    if opt is None:
        opt = efficient_outcome(instance)
    if min(instance.n_auctions, instance.n_bidders - 1) > cap:
        raise EnumerationCapError(
            "instance too large for exact covering enumeration "
            f"(min(M, N-1) exceeds the cap of {cap})"
        )
    li, b_sets = _loss_sets(instance, opt, bidder)
    if not li:
        return CoveringSet(bidder, li, (frozenset(),), np.zeros(1), True)
    owners = {j: [k for k, bs in b_sets.items() if j in bs] for j in sorted(li)}
    if any(not cands for cands in owners.values()):
        return CoveringSet(bidder, li, (), np.zeros(0), False)
    images = _enumerate_owner_images(sorted(li), owners)
    coverings = tuple(sorted(images, key=lambda c: (len(c), sorted(c))))
    welfare = np.array(
        [restricted_efficient_welfare(instance, c) for c in coverings]
    )
    return CoveringSet(bidder, li, coverings, welfare, True)


def restricted_efficient_welfare(instance: InstanceSpec, members) -> float:
    """Total efficient welfare when only ``members`` participate (others bid 0)."""
    members = sorted(members)
    if not members:
        return 0.0
    restricted = np.zeros_like(instance.values)
    restricted[members] = instance.values[members]
    sub = InstanceSpec(instance.auctions, restricted)
    return efficient_outcome(sub).opt_total


@dataclass
class ImprovedBound:
    value: float
    max_covering_welfare: float
    n_coverings: int
    coverable: bool  # False -> degenerate, reported as 1, no guarantee attached


def improved_bound(
    instance: InstanceSpec,
    bidder: int,
    alpha_i: float,
    beta: float,
    opt: EfficientOutcome | None = None,
    cap: int = 12,
) -> ImprovedBound:
    """1 - (1-beta)/(alpha_i - beta) * max covering welfare / OPT_i.

    The maximum runs over the restricted efficient welfare of every covering.
    When no covering exists (bidder i uniquely positive somewhere) the bound
    degenerates and is reported as 1 with ``coverable`` set to False.
    """
    if alpha_i <= 1.0 or not (0.0 < beta < 1.0):
        raise DomainError("need alpha_i > 1 > beta > 0")
    if opt is None:
        opt = efficient_outcome(instance)
    opt_i = opt.opt_per_bidder[bidder]
    if opt_i <= 0:
        raise DomainError("bound undefined for a bidder with zero efficient welfare")
    covers = enumerate_coverings(instance, bidder, opt=opt, cap=cap)
    if not covers.coverable:
        return ImprovedBound(1.0, math.nan, 0, False)
    max_welfare = float(covers.restricted_welfare.max()) if covers.coverings else 0.0
    value = 1.0 - (1.0 - beta) / (alpha_i - beta) * max_welfare / opt_i
    return ImprovedBound(value, max_welfare, len(covers.coverings), True)


def outcome_coverings(
    instance: InstanceSpec,
    result: AuctionResult,
    bidder: int,
    opt: EfficientOutcome | None = None,
) -> tuple[frozenset[int], ...]:
    """Coverings of the realized loss auctions for one concrete outcome.

    Same splitting rule as `enumerate_coverings`, but a competitor is only
    eligible for an auction she actually outranked bidder i in: positive
    value below v_{i,j} and a slot at least as good as i's efficient slot
    while i sits strictly below it.
    """
    if opt is None:
        opt = efficient_outcome(instance)
    v = instance.values
    loss_auctions = sorted(
        np.flatnonzero(result.welfare[bidder] < opt.opt_matrix[bidder]).tolist()
    )
    if not loss_auctions:
        return (frozenset(),)
    owners: dict[int, list[int]] = {}
    for j in loss_auctions:
        slot_i_eff = opt.slot_of(bidder, j)
        slot_i = result.slot_of(bidder, j)
        rank_i = slot_i if slot_i >= 0 else instance.n_bidders
        cands = []
        for k in range(instance.n_bidders):
            if k == bidder or not (0 < v[k, j] < v[bidder, j]):
                continue
            slot_k = result.slot_of(k, j)
            if slot_k >= 0 and slot_k <= slot_i_eff < rank_i:
                cands.append(k)
        if not cands:
            return ()
        owners[j] = cands
    images = _enumerate_owner_images(loss_auctions, owners)
    return tuple(sorted(images, key=lambda c: (len(c), sorted(c))))


@dataclass
class BoundReport:
    bidder: int
    alpha: float
    beta: float
    base_bound: float
    improved_bound: float
    gsp_gfp_bound: float  # NaN when the precondition fails
    delta: float
    max_covering_welfare: float


def bound_report(
    instance: InstanceSpec,
    bidder: int,
    alpha_i: float,
    beta: float,
    opt: EfficientOutcome | None = None,
    cap: int = 12,
) -> BoundReport:
    if opt is None:
        opt = efficient_outcome(instance)
    base = vcg_bound(opt, bidder, alpha_i, beta)
    improved = improved_bound(instance, bidder, alpha_i, beta, opt=opt, cap=cap)
    delta = delta_separation(instance.values)
    try:
        gsp = gsp_gfp_bound(opt, bidder, beta, delta)
    except DomainError:
        gsp = math.nan
    return BoundReport(
        bidder=bidder,
        alpha=alpha_i,
        beta=beta,
        base_bound=base,
        improved_bound=improved.value,
        gsp_gfp_bound=gsp,
        delta=delta,
        max_covering_welfare=improved.max_covering_welfare,
    )


def bound_reports_to_csv(reports, stream=None) -> str:
    out = stream or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        [
            "bidder",
            "alpha",
            "beta",
            "base_bound",
            "improved_bound",
            "gsp_gfp_bound",
            "delta",
            "max_covering_welfare",
        ]
    )
    for r in reports:
        writer.writerow(
            [
                r.bidder,
                fmt(r.alpha),
                fmt(r.beta),
                fmt(r.base_bound),
                fmt(r.improved_bound),
                fmt(r.gsp_gfp_bound),
                fmt(r.delta),
                fmt(r.max_covering_welfare),
            ]
        )
    return out.getvalue() if stream is None else ""
