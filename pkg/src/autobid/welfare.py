"""Efficient outcomes, per-bidder welfare, welfare loss and ROAS feasibility.

The efficient outcome ranks bidders by true value in every auction (ties by
lower index) and defines OPT_{i,j}, OPT_i, OPT and OPT_{-i}.  Welfare loss
for a bidder sums only the shortfalls against her efficient welfare; auctions
where she overperforms do not offset the loss.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AuctionResult,
    InstanceSpec,
    Mechanism,
    allocate,
    as_bid_matrix,
    evaluate_bids,
)

ROAS_TOL = 1e-9  # absolute slack tolerance absorbing float noise


@dataclass
class EfficientOutcome:
    assignment: tuple[np.ndarray, ...]  # per auction, slot -> bidder (-1 empty)
    opt_matrix: np.ndarray  # N x M, OPT_{i,j}
    opt_per_bidder: np.ndarray  # OPT_i
    opt_total: float  # OPT
    opt_minus: np.ndarray  # OPT_{-i}

    def slot_of(self, bidder: int, auction: int) -> int:
        slots = np.flatnonzero(self.assignment[auction] == bidder)
        return int(slots[0]) if slots.size else -1


def efficient_outcome(instance: InstanceSpec) -> EfficientOutcome:
    """Rank-by-true-value assignment and the OPT aggregates it induces.

    The total accumulates per-auction welfare in slot order and combines
    auctions with an exactly-rounded sum, which the brute-force assignment
    oracle mirrors term for term.
    """
    n, m = instance.n_bidders, instance.n_auctions
    opt_matrix = np.zeros((n, m))
    per_auction = np.zeros(m)
    assignment = []
    for j, auction in enumerate(instance.auctions):
        slots = allocate(auction, instance.values[:, j])
        assignment.append(slots)
        total_j = 0.0
        for slot, bidder in enumerate(slots):
            if bidder >= 0:
                w = auction.ctr(slot) * instance.values[bidder, j]
                opt_matrix[bidder, j] = w
                total_j += w
        per_auction[j] = total_j
    opt_per_bidder = opt_matrix.sum(axis=1)
    opt_total = math.fsum(per_auction)
    return EfficientOutcome(
        assignment=tuple(assignment),
        opt_matrix=opt_matrix,
        opt_per_bidder=opt_per_bidder,
        opt_total=opt_total,
        opt_minus=opt_total - opt_per_bidder,
    )


def welfare_loss(
    instance: InstanceSpec,
    result: AuctionResult,
    bidder: int,
    opt: EfficientOutcome | None = None,
) -> float:
    """Sum of OPT_{i,j} - W_{i,j} over the auctions where bidder i fell short."""
    if opt is None:
        opt = efficient_outcome(instance)
    gap = opt.opt_matrix[bidder] - result.welfare[bidder]
    return float(gap[gap > 0].sum())


@dataclass
class RoasResult:
    slacks: np.ndarray  # per bidder, total welfare - total payment
    feasible: bool


def roas_check(
    instance: InstanceSpec,
    bids,
    mechanism: Mechanism,
    tolerance: float = ROAS_TOL,
) -> RoasResult:
    """Aggregate ROAS slack per bidder; feasible iff every slack >= -tolerance.

    The all-zero bid profile is reported infeasible by convention.
    """
    b = as_bid_matrix(bids, instance)
    payments, welfare = evaluate_bids(instance, b, mechanism)
    slacks = welfare.sum(axis=-1) - payments.sum(axis=-1)
    feasible = bool(np.all(slacks >= -tolerance)) and bool(np.any(b > 0))
    return RoasResult(slacks=slacks, feasible=feasible)


def batch_feasible(
    instance: InstanceSpec,
    bids,
    mechanism: Mechanism,
    tolerance: float = ROAS_TOL,
):
    """Vectorized feasibility over a batch of bid matrices (..., N, M).

    Returns (feasible mask, per-bidder welfare totals, per-bidder payment totals).
    """
    b = as_bid_matrix(bids, instance)
    payments, welfare = evaluate_bids(instance, b, mechanism)
    w = welfare.sum(axis=-1)
    p = payments.sum(axis=-1)
    feasible = np.all(w - p >= -tolerance, axis=-1) & np.any(b > 0, axis=(-2, -1))
    return feasible, w, p


def loss_to_guarantee(loss_bound: float, opt_i: float) -> float:
    """Turn a welfare-loss upper bound into a W_i/OPT_i lower bound."""
    if opt_i <= 0:
        raise ValueError("ratio undefined: bidder has zero efficient welfare")
    if loss_bound < 0:
        raise ValueError("loss bound must be nonnegative")
    return 1.0 - loss_bound / opt_i


def empirical_cdf(ratios, z: float) -> float:
    """theta(z) = fraction of ratios at most z."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.size == 0:
        raise ValueError("empirical cdf of an empty ratio vector is undefined")
    if not np.all(np.isfinite(r)):
        raise ValueError("ratios must be finite")
    return float(np.mean(r <= z))


@dataclass
class WelfareReport:
    """Per-bidder welfare accounting for one bid profile on one instance."""

    welfare: np.ndarray  # W_i
    opt: np.ndarray  # OPT_i
    loss: np.ndarray  # loss_i
    ratio: np.ndarray  # W_i / OPT_i, NaN where OPT_i = 0
    roas_slack: np.ndarray
    feasible: bool

    def ratio_defined(self) -> np.ndarray:
        return self.opt > 0


def build_report(
    instance: InstanceSpec,
    bids,
    mechanism: Mechanism,
    tolerance: float = ROAS_TOL,
) -> WelfareReport:
    from .core import run_instance

    result = run_instance(instance, bids, mechanism)
    opt = efficient_outcome(instance)
    w = result.welfare_totals()
    p = result.payment_totals()
    gaps = np.where(
        opt.opt_matrix > result.welfare, opt.opt_matrix - result.welfare, 0.0
    )
    loss = gaps.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(opt.opt_per_bidder > 0, w / opt.opt_per_bidder, np.nan)
    slacks = w - p
    feasible = bool(np.all(slacks >= -tolerance)) and bool(np.any(np.asarray(bids) > 0))
    return WelfareReport(
        welfare=w,
        opt=opt.opt_per_bidder,
        loss=loss,
        ratio=ratio,
        roas_slack=slacks,
        feasible=feasible,
    )


def fmt(x: float) -> str:
    """Fixed 12-significant-digit formatting used by every CSV writer."""
    return format(float(x), ".12g")


def report_to_csv(report: WelfareReport, stream=None) -> str:
    out = stream or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["bidder", "W", "OPT", "loss", "ratio", "roas_slack", "feasible"])
    for i in range(report.welfare.size):
        writer.writerow(
            [
                i,
                fmt(report.welfare[i]),
                fmt(report.opt[i]),
                fmt(report.loss[i]),
                fmt(report.ratio[i]) if report.opt[i] > 0 else "nan",
                fmt(report.roas_slack[i]),
                int(report.feasible),
            ]
        )
    return out.getvalue() if stream is None else ""
