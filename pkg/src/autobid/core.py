"""Parallel position auctions with personalized eager reserves.

Allocation and payment engines for VCG, GSP and GFP position auctions.
Each bidder faces a personalized reserve price: bids below the reserve are
zeroed out before ranking (eager implementation), the remaining bidders are
ranked by bid with ties broken by lower bidder index, and every winner's
payment is floored at her CTR-weighted reserve.

Two evaluation paths are provided on purpose: a plain per-auction reference
implementation (`allocate` / `pay`) that mirrors the payment formulas
term by term, and a vectorized engine (`evaluate_bids`) that handles a whole
batch of bid matrices at once.  The test suite cross-checks one against the
other on random instances.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np


class ShapeError(ValueError):
    """Inputs do not have mutually consistent shapes."""


class Mechanism(Enum):
    VCG = "vcg"
    GSP = "gsp"
    GFP = "gfp"

    @classmethod
    def parse(cls, name: str) -> "Mechanism":
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                f"unknown mechanism {name!r}; expected one of vcg, gsp, gfp"
            ) from None


@dataclass(frozen=True)
class AuctionSpec:
    """One position auction: ``slots`` ordered slots with non-increasing CTRs."""

    slots: int
    ctrs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", int(self.slots))
        object.__setattr__(self, "ctrs", tuple(float(c) for c in self.ctrs))
        if self.slots < 1:
            raise ValueError("an auction needs at least one slot")
        if len(self.ctrs) != self.slots:
            raise ValueError(f"expected {self.slots} CTRs, got {len(self.ctrs)}")
        for c in self.ctrs:
            if not (0.0 < c <= 1.0):
                raise ValueError(f"CTRs must lie in (0, 1], got {c}")
        for hi, lo in zip(self.ctrs, self.ctrs[1:]):
            if lo > hi:
                raise ValueError("CTRs must be non-increasing across slots")

    def ctr(self, slot: int) -> float:
        """CTR of a 0-indexed slot; 0 for any slot beyond the last one."""
        return self.ctrs[slot] if 0 <= slot < self.slots else 0.0


class InstanceSpec:
    """N bidders competing in M parallel position auctions.

    Holds the per-auction slot/CTR structure, the N x M matrix of true
    per-click values and the N x M matrix of personalized reserve prices.
    """

    def __init__(self, auctions, values, reserves=None):
        self.auctions: tuple[AuctionSpec, ...] = tuple(auctions)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        if reserves is None:
            reserves = np.zeros_like(self.values)
        self.reserves = np.ascontiguousarray(reserves, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError("values must be an N x M matrix")
        if self.values.shape[1] != len(self.auctions):
            raise ShapeError(
                f"values have {self.values.shape[1]} columns but there are "
                f"{len(self.auctions)} auctions"
            )
        if self.reserves.shape != self.values.shape:
            raise ShapeError("reserves must have the same shape as values")
        for name, mat in (("values", self.values), ("reserves", self.reserves)):
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} must be finite")
            if np.any(mat < 0):
                raise ValueError(f"{name} must be nonnegative")

    @property
    def n_bidders(self) -> int:
        return self.values.shape[0]

    @property
    def n_auctions(self) -> int:
        return self.values.shape[1]

    @property
    def max_slots(self) -> int:
        return max(a.slots for a in self.auctions)

    @cached_property
    def slot_counts(self) -> np.ndarray:
        return np.array([a.slots for a in self.auctions], dtype=np.int64)

    @cached_property
    def mu_pad(self) -> np.ndarray:
        """CTR table of shape (M, max_slots + 1), zero beyond each auction's slots."""
        s = self.max_slots
        mu = np.zeros((self.n_auctions, s + 1))
        for j, a in enumerate(self.auctions):
            mu[j, : a.slots] = a.ctrs
        return mu

    def with_reserves(self, reserves) -> "InstanceSpec":
        return InstanceSpec(self.auctions, self.values, reserves)

    def to_dict(self) -> dict:
        d = {
            "auctions": [{"slots": a.slots, "ctrs": list(a.ctrs)} for a in self.auctions],
            "values": self.values.tolist(),
        }
        if np.any(self.reserves > 0):
            d["reserves"] = self.reserves.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceSpec":
        auctions = [AuctionSpec(a["slots"], tuple(a["ctrs"])) for a in d["auctions"]]
        return cls(auctions, np.asarray(d["values"]), d.get("reserves"))


def save_instance(instance: InstanceSpec, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")


def load_instance(path) -> InstanceSpec:
    return InstanceSpec.from_dict(json.loads(Path(path).read_text()))


def as_bid_matrix(bids, instance: InstanceSpec) -> np.ndarray:
    """Validate and coerce a bid matrix against an instance."""
    b = np.asarray(bids, dtype=np.float64)
    if b.shape[-2:] != instance.values.shape:
        raise ShapeError(
            f"bid matrix shape {b.shape} does not match instance "
            f"{instance.values.shape}"
        )
    if not np.all(np.isfinite(b)):
        raise ValueError("bids must be finite")
    if np.any(b < 0):
        raise ValueError("bids must be nonnegative")
    return b


def clear_bids(instance: InstanceSpec, bids) -> np.ndarray:
    """Zero out every bid below its personalized reserve (b >= r clears)."""
    b = as_bid_matrix(bids, instance)
    return np.where(b >= instance.reserves, b, 0.0)


def allocate(auction: AuctionSpec, cleared_bids) -> np.ndarray:
    """Slot assignment for one auction from already-cleared bids.

    Returns an array of length ``auction.slots`` mapping slot -> bidder index,
    with -1 for unfilled slots.  Positive bids are ranked in decreasing order,
    ties broken by lower bidder index; zero bids are never allocated.
    """
    b = np.asarray(cleared_bids, dtype=np.float64)
    if np.any(b < 0):
        raise ValueError("cleared bids must be nonnegative")
    order = np.argsort(-b, kind="stable")
    assignment = np.full(auction.slots, -1, dtype=np.int64)
    for slot in range(min(auction.slots, b.size)):
        bidder = order[slot]
        if b[bidder] <= 0.0:
            break
        assignment[slot] = bidder
    return assignment


def pay(mechanism: Mechanism, auction: AuctionSpec, bids_col, reserves_col, assignment) -> np.ndarray:
    """Per-bidder payments for one auction (reference implementation).

    ``assignment`` must come from `allocate` applied to the cleared bids.
    With b~(l) the l-th highest cleared bid (0 past the cleared count) and a
    winner occupying slot l, the payment is

      VCG:  sum_{t=l}^{min(cleared, slots)} (mu(t) - mu(t+1)) * max(b~(t+1), r_i)
      GSP:  mu(l) * max(b~(l+1), r_i)
      GFP:  mu(l) * max(b~(l), r_i)

    floored at mu(l) * r_i, the reserve the winner would pay with no
    competition at all.  Unassigned bidders pay 0.
    """
    b = np.asarray(bids_col, dtype=np.float64)
    r = np.asarray(reserves_col, dtype=np.float64)
    cleared = np.where(b >= r, b, 0.0)
    sorted_bids = np.sort(cleared)[::-1]
    n_cleared = int(np.count_nonzero(sorted_bids))

    def bth(rank: int) -> float:  # 1-indexed order statistic, 0 beyond the list
        return float(sorted_bids[rank - 1]) if 1 <= rank <= sorted_bids.size else 0.0

    payments = np.zeros_like(b)
    for slot, bidder in enumerate(np.asarray(assignment)):
        if bidder < 0:
            continue
        rank = slot + 1
        mu_l = auction.ctr(slot)
        res = r[bidder]
        if mechanism is Mechanism.GFP:
            p = mu_l * max(bth(rank), res)
        elif mechanism is Mechanism.GSP:
            p = mu_l * max(bth(rank + 1), res)
        else:
            p = 0.0
            for t in range(rank, min(n_cleared, auction.slots) + 1):
                p += (auction.ctr(t - 1) - auction.ctr(t)) * max(bth(t + 1), res)
            p = max(p, mu_l * res)
        payments[bidder] = p
    return payments


def evaluate_bids(instance: InstanceSpec, bids, mechanism: Mechanism):
    """Payments and welfare for a batch of bid matrices.

    ``bids`` has shape (..., N, M); returns (payments, welfare) of the same
    shape.  Vectorized over the leading batch axes; bit-identical to composing
    `clear_bids` / `allocate` / `pay` column by column.
    """
    b = as_bid_matrix(bids, instance)
    cleared = np.where(b >= instance.reserves, b, 0.0)
    order = np.argsort(-cleared, axis=-2, kind="stable")
    sb = np.take_along_axis(cleared, order, axis=-2)

    n, m = instance.n_bidders, instance.n_auctions
    k_max = min(instance.max_slots, n)
    mu = instance.mu_pad
    r_rank = np.take_along_axis(np.broadcast_to(instance.reserves, b.shape), order, axis=-2)
    v_rank = np.take_along_axis(np.broadcast_to(instance.values, b.shape), order, axis=-2)
    zero_row = np.zeros(b.shape[:-2] + (1, m))
    sbp = np.concatenate([sb, zero_row], axis=-2)

    pay_rank = np.zeros_like(b)
    wel_rank = np.zeros_like(b)
    for k in range(k_max):
        mu_k = mu[:, k]
        won = (sb[..., k, :] > 0.0) & (mu_k > 0.0)
        rk = r_rank[..., k, :]
        if mechanism is Mechanism.GFP:
            p = mu_k * np.maximum(sb[..., k, :], rk)
        elif mechanism is Mechanism.GSP:
            p = mu_k * np.maximum(sbp[..., k + 1, :], rk)
        else:
            p = np.zeros(b.shape[:-2] + (m,))
            for t in range(k, k_max):
                dmu = mu[:, t] - mu[:, t + 1]
                occupied = sbp[..., t, :] > 0.0  # rank t exists among cleared bids
                p = p + dmu * np.maximum(sbp[..., t + 1, :], rk) * occupied
            p = np.maximum(p, mu_k * rk)
        pay_rank[..., k, :] = np.where(won, p, 0.0)
        wel_rank[..., k, :] = np.where(won, mu_k * v_rank[..., k, :], 0.0)

    payments = np.zeros_like(b)
    welfare = np.zeros_like(b)
    np.put_along_axis(payments, order, pay_rank, axis=-2)
    np.put_along_axis(welfare, order, wel_rank, axis=-2)
    return payments, welfare


@dataclass
class AuctionResult:
    """Outcome of one full run: slot assignments, payments and welfare."""

    assignment: tuple[np.ndarray, ...]  # per auction, slot -> bidder (-1 empty)
    payments: np.ndarray  # N x M
    welfare: np.ndarray  # N x M

    def payment_totals(self) -> np.ndarray:
        return self.payments.sum(axis=1)

    def welfare_totals(self) -> np.ndarray:
        return self.welfare.sum(axis=1)

    def slot_of(self, bidder: int, auction: int) -> int:
        """0-indexed slot held by ``bidder`` in ``auction``, or -1."""
        slots = np.flatnonzero(self.assignment[auction] == bidder)
        return int(slots[0]) if slots.size else -1


def run_instance(instance: InstanceSpec, bids, mechanism: Mechanism) -> AuctionResult:
    """Clear, allocate and price all M auctions for one bid matrix."""
    b = as_bid_matrix(bids, instance)
    if b.ndim != 2:
        raise ShapeError("run_instance expects a single N x M bid matrix")
    cleared = np.where(b >= instance.reserves, b, 0.0)
    assignment = tuple(
        allocate(auction, cleared[:, j]) for j, auction in enumerate(instance.auctions)
    )
    payments, welfare = evaluate_bids(instance, b, mechanism)
    return AuctionResult(assignment, payments, welfare)
