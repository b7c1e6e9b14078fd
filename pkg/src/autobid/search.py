"""Grid and sampling oracles over bid and multiplier space.

Feasible-region maps over uniform multipliers, worst-case welfare ratios
under feasibility (the numerical side of the closed-form bounds), sampled
general-bid search, and tiny-instance brute-force oracles for the efficient
outcome and for best responses.

Grid points are independent; when the AUTOBID_THREADS environment variable
is set above 1, region evaluation fans out over a thread pool with a
deterministic ordered reduction.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import InstanceSpec, Mechanism, clear_bids, evaluate_bids
from .welfare import ROAS_TOL, efficient_outcome


class GridSizeError(ValueError):
    """Requested grid would exceed the enumeration budget."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform multiplier grid, one axis per bidder dimension.

    Grids refine nestedly (2*points - 1 keeps old points), so worst-case
    minima are non-increasing under refinement.
    """

    lo: float = 1.0
    hi: float = 5.0
    points: int = 401

    def __post_init__(self):
        if self.lo < 0 or self.hi <= self.lo:
            raise ValueError("need 0 <= lo < hi")
        if self.points < 2:
            raise ValueError("need at least 2 grid points")

    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def refine(self) -> "GridSpec":
        return GridSpec(self.lo, self.hi, 2 * self.points - 1)

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("AUTOBID_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(total: int, chunk: int):
    for start in range(0, total, chunk):
        yield start, min(start + chunk, total)


def _map_batches(fn, total: int, chunk: int = 65536):
    """Apply fn(start, stop) over chunks, in parallel when allowed, in order."""
    spans = list(_chunked(total, chunk))
    threads = _thread_count()
    if threads == 1 or len(spans) == 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: fn(*s), spans))


def winner_patterns(instance: InstanceSpec, bids) -> list[str]:
    """Compact winner-by-slot strings, one per batched bid matrix.

    Auctions are joined by ';', slots within an auction by ',', with '-' for
    an unfilled slot, e.g. '1,0;2,-'.
    """
    b = np.asarray(bids, dtype=np.float64)
    squeeze = b.ndim == 2
    if squeeze:
        b = b[None]
    cleared = np.where(b >= instance.reserves, b, 0.0)
    order = np.argsort(-cleared, axis=-2, kind="stable")
    sb = np.take_along_axis(cleared, order, axis=-2)
    k_max = min(instance.max_slots, instance.n_bidders)
    winners = np.where(sb[:, :k_max, :] > 0, order[:, :k_max, :], -1)
    slot_counts = instance.slot_counts
    patterns = []
    for row in winners:
        parts = []
        for j in range(instance.n_auctions):
            ids = row[: min(slot_counts[j], k_max), j]
            pad = [-1] * (slot_counts[j] - ids.size)
            parts.append(",".join("-" if w < 0 else str(w) for w in [*ids, *pad]))
        patterns.append(";".join(parts))
    return patterns


@dataclass
class RegionMap:
    """Feasibility and winner pattern at every uniform-multiplier grid point."""

    alphas: np.ndarray  # (points, N)
    feasible: np.ndarray  # (points,)
    ratios: np.ndarray  # (points,) ratio of the designated bidder (NaN if OPT=0)
    patterns: list[str]
    designated: int


def map_uniform_region(
    instance: InstanceSpec,
    mechanism: Mechanism,
    grid: GridSpec,
    designated: int = 0,
    tolerance: float = ROAS_TOL,
    max_points: int = 4_000_000,
) -> RegionMap:
    """Evaluate every multiplier tuple on the grid (one axis per bidder)."""
    n = instance.n_bidders
    total = grid.points**n
    if total > max_points:
        raise GridSizeError(
            f"{grid.points}^{n} grid points exceed the budget of {max_points}"
        )
    axes = np.meshgrid(*[grid.axis()] * n, indexing="ij")
    alphas = np.stack([a.ravel() for a in axes], axis=1)  # (total, N)
    opt = efficient_outcome(instance)
    opt_i = opt.opt_per_bidder[designated]

    def eval_span(start, stop):
        block = alphas[start:stop]
        bids = block[:, :, None] * instance.values[None]
        payments, welfare = evaluate_bids(instance, bids, mechanism)
        w = welfare.sum(axis=-1)
        p = payments.sum(axis=-1)
        feas = np.all(w - p >= -tolerance, axis=-1) & np.any(bids > 0, axis=(-2, -1))
        ratio = w[:, designated] / opt_i if opt_i > 0 else np.full(len(block), np.nan)
        return feas, ratio, winner_patterns(instance, bids)

    parts = _map_batches(eval_span, total)
    feasible = np.concatenate([p[0] for p in parts])
    ratios = np.concatenate([p[1] for p in parts])
    patterns = [s for p in parts for s in p[2]]
    return RegionMap(alphas, feasible, ratios, patterns, designated)


@dataclass
class WorstCase:
    """Minimum feasible welfare ratio with a concrete witness profile."""

    ratio: float  # NaN when no feasible point was found
    witness_bids: np.ndarray | None
    witness_alphas: np.ndarray | None
    n_feasible: int

    @property
    def empty(self) -> bool:
        return self.n_feasible == 0


def worst_case_uniform(
    instance: InstanceSpec,
    mechanism: Mechanism,
    bidder: int,
    alpha_i: float,
    grid: GridSpec,
    tolerance: float = ROAS_TOL,
    max_points: int = 4_000_000,
) -> WorstCase:
    """Min of W_i/OPT_i over feasible uniform competitor multiplier tuples.

    Bidder i bids alpha_i * v_i throughout; each competitor sweeps the grid.
    """
    n = instance.n_bidders
    opt = efficient_outcome(instance)
    opt_i = opt.opt_per_bidder[bidder]
    if opt_i <= 0:
        raise ValueError("designated bidder has zero efficient welfare")
    total = grid.points ** (n - 1)
    if total > max_points:
        raise GridSizeError(
            f"{grid.points}^{n - 1} competitor grid points exceed {max_points}"
        )
    competitors = [k for k in range(n) if k != bidder]
    axes = np.meshgrid(*[grid.axis()] * (n - 1), indexing="ij")
    comp_alphas = (
        np.stack([a.ravel() for a in axes], axis=1)
        if competitors
        else np.zeros((1, 0))
    )

    best = [np.inf, None, 0]  # ratio, witness alphas, feasible count

    def eval_span(start, stop):
        block = comp_alphas[start:stop]
        alphas = np.empty((len(block), n))
        alphas[:, competitors] = block
        alphas[:, bidder] = alpha_i
        bids = alphas[:, :, None] * instance.values[None]
        payments, welfare = evaluate_bids(instance, bids, mechanism)
        w = welfare.sum(axis=-1)
        p = payments.sum(axis=-1)
        feas = np.all(w - p >= -tolerance, axis=-1) & np.any(bids > 0, axis=(-2, -1))
        ratio = np.where(feas, w[:, bidder] / opt_i, np.inf)
        return feas, ratio, alphas

    for feas, ratio, alphas in _map_batches(eval_span, total):
        best[2] += int(feas.sum())
        idx = int(np.argmin(ratio))
        if ratio[idx] < best[0]:
            best[0] = float(ratio[idx])
            best[1] = alphas[idx].copy()
    if best[2] == 0:
        return WorstCase(np.nan, None, None, 0)
    witness = best[1][:, None] * instance.values
    return WorstCase(best[0], witness, best[1], best[2])


def sample_competitor_bids(
    instance: InstanceSpec,
    bidder: int,
    n_samples: int,
    rng: np.random.Generator,
    undominated: bool = False,
    scale_hi: float = 3.0,
) -> np.ndarray:
    """Seeded competitor bid matrices, shaped (n_samples, N, M).

    Bids scale the competitors' own values, so zero-value entries always bid
    zero.  The default mixture covers truthful-and-below profiles, sparse
    dropouts and aggressive overbids; with ``undominated`` set, every bid is
    instead drawn from [reserve, scale_hi * value] as required for
    undominated play under beta-approximate reserves.  The designated
    bidder's rows are left at zero for the caller to fill.
    """
    n, m = instance.n_bidders, instance.n_auctions
    v = instance.values
    bids = np.zeros((n_samples, n, m))
    others = [k for k in range(n) if k != bidder]
    if not others:
        return bids
    if undominated:
        bids[:, others, :] = _undominated_bids(
            v[others], instance.reserves[others], n_samples, rng, scale_hi
        )
        return bids
    kinds = rng.random(n_samples)
    scales = np.empty((n_samples, len(others), m))
    uniform_mults = rng.uniform(1.0, 2.5, size=(n_samples, len(others)))
    entry_low = rng.uniform(0.0, 1.2, size=(n_samples, len(others), m))
    entry_wide = rng.uniform(0.0, scale_hi, size=(n_samples, len(others), m))
    dropout = rng.random((n_samples, len(others), m)) < 0.2
    for s in range(n_samples):
        if kinds[s] < 0.25:
            scales[s] = uniform_mults[s][:, None]
        elif kinds[s] < 0.75:
            scales[s] = np.where(dropout[s], 0.0, entry_low[s])
        else:
            scales[s] = entry_wide[s]
    bids[:, others, :] = scales * v[others][None]
    if n_samples >= 2:  # anchors: silent competitors, truthful competitors
        bids[0, others, :] = 0.0
        bids[1, others, :] = v[others]
    return bids


def _undominated_bids(values, reserves, n_samples, rng, scale_hi):
    """Bids in [reserve, cap * value] with the per-sample cap mixed over
    {1, (1+scale_hi)/2, scale_hi}; sub-value blocks keep a healthy share of
    profiles where even first-price payments stay within value."""
    caps = rng.choice(
        [1.0, (1.0 + scale_hi) / 2.0, scale_hi], size=n_samples, p=[0.4, 0.3, 0.3]
    )
    lo = reserves[None]
    hi = caps[:, None, None] * values[None]
    u = rng.uniform(0.0, 1.0, size=(n_samples, *values.shape))
    return np.where(values[None] > 0, lo + u * (hi - lo), 0.0)


def sample_undominated_profiles(
    instance: InstanceSpec,
    n_samples: int,
    rng: np.random.Generator,
    scale_hi: float = 3.0,
) -> np.ndarray:
    """Full bid profiles with every bid at or above its reserve."""
    return _undominated_bids(
        instance.values, instance.reserves, n_samples, rng, scale_hi
    )


def worst_case_general(
    instance: InstanceSpec,
    mechanism: Mechanism,
    bidder: int,
    bid_i,
    n_samples: int,
    seed: int,
    undominated: bool = False,
    scale_hi: float = 3.0,
    tolerance: float = ROAS_TOL,
) -> WorstCase:
    """Min of W_i/OPT_i over sampled feasible general competitor bids.

    A sampled approximation of the true minimum (an upper bound on it).
    ``bid_i`` fixes the designated bidder's bids.  Set ``undominated`` for
    the GSP/GFP regime where all sampled bids must clear the reserves.
    """
    opt = efficient_outcome(instance)
    opt_i = opt.opt_per_bidder[bidder]
    if opt_i <= 0:
        raise ValueError("designated bidder has zero efficient welfare")
    rng = np.random.default_rng(seed)
    bids = sample_competitor_bids(
        instance, bidder, n_samples, rng, undominated, scale_hi
    )
    bids[:, bidder, :] = np.asarray(bid_i, dtype=np.float64)[None]
    payments, welfare = evaluate_bids(instance, bids, mechanism)
    w = welfare.sum(axis=-1)
    p = payments.sum(axis=-1)
    feas = np.all(w - p >= -tolerance, axis=-1) & np.any(bids > 0, axis=(-2, -1))
    if not feas.any():
        return WorstCase(np.nan, None, None, 0)
    ratio = np.where(feas, w[:, bidder] / opt_i, np.inf)
    idx = int(np.argmin(ratio))
    return WorstCase(float(ratio[idx]), bids[idx].copy(), None, int(feas.sum()))


def brute_force_assignment_oracle(
    instance: InstanceSpec, cap: float = 5e7
) -> float:
    """Exhaustive maximum total welfare over all slot assignments.

    Independent of the ranking logic: per auction, every injective
    slots -> bidders-or-empty assignment is enumerated directly.  Per-auction
    welfare accumulates in slot order and auctions combine via an
    exactly-rounded sum, matching `efficient_outcome` bit for bit.
    """
    n = instance.n_bidders
    budget = 1.0
    for a in instance.auctions:
        budget *= float(n + 1) ** a.slots
        if budget > cap:
            raise GridSizeError("instance too large for exhaustive assignment search")
    bests = []
    for j, auction in enumerate(instance.auctions):
        best = 0.0
        choices = [-1, *range(n)]
        for combo in itertools.product(choices, repeat=auction.slots):
            assigned = [b for b in combo if b >= 0]
            if len(set(assigned)) != len(assigned):
                continue
            w = 0.0
            for slot, b in enumerate(combo):
                if b >= 0:
                    w += auction.ctr(slot) * instance.values[b, j]
            best = max(best, w)
        bests.append(best)
    return math.fsum(bests)


@dataclass
class BestResponse:
    welfare: float
    bids: np.ndarray  # witness bid vector for the designated bidder
    payment: float
    uniform_welfare: float
    uniform_multiplier: float
    uniform_matches: bool


def brute_force_best_response(
    instance: InstanceSpec,
    mechanism: Mechanism,
    bidder: int,
    competitor_bids,
    multipliers,
    tolerance: float = ROAS_TOL,
    cap: int = 200_000,
) -> BestResponse:
    """Grid-exhaustive best response for one bidder, competitors fixed.

    Per auction j the candidate bids are g * v_{i,j} for every g in
    ``multipliers``; all combinations are scored by bidder i's total welfare
    subject to her own ROAS constraint.  Also reports the best uniform
    (single-multiplier) grid point and whether it matches the unrestricted
    grid optimum exactly.
    """
    g = np.asarray(multipliers, dtype=np.float64)
    n, m = instance.n_bidders, instance.n_auctions
    if g.size**m > cap:
        raise GridSizeError("bid grid too large for exhaustive best response")
    base = np.asarray(competitor_bids, dtype=np.float64).copy()
    combos = np.array(list(itertools.product(g, repeat=m)))  # (C, M)
    bids = np.broadcast_to(base, (len(combos), n, m)).copy()
    bids[:, bidder, :] = combos * instance.values[bidder][None]
    payments, welfare = evaluate_bids(instance, bids, mechanism)
    w_i = welfare[:, bidder, :].sum(axis=-1)
    p_i = payments[:, bidder, :].sum(axis=-1)
    ok = w_i - p_i >= -tolerance
    w_masked = np.where(ok, w_i, -np.inf)
    best_idx = int(np.argmax(w_masked))
    uniform_mask = np.all(combos == combos[:, :1], axis=1)
    w_uniform = np.where(uniform_mask, w_masked, -np.inf)
    best_u_idx = int(np.argmax(w_uniform))
    best_w = float(w_masked[best_idx])
    best_u_w = float(w_uniform[best_u_idx])
    return BestResponse(
        welfare=best_w,
        bids=bids[best_idx, bidder].copy(),
        payment=float(p_i[best_idx]),
        uniform_welfare=best_u_w,
        uniform_multiplier=float(combos[best_u_idx, 0]),
        uniform_matches=bool(abs(best_u_w - best_w) <= 1e-12),
    )


def critical_multipliers(
    instance: InstanceSpec,
    bidder: int,
    competitor_bids,
    pad: float = 1.5,
) -> np.ndarray:
    """Multiplier grid hitting every outcome region for one bidder.

    The bidder's outcome against fixed competitors changes only where her bid
    crosses a cleared competitor bid or her own reserve; midpoints between
    consecutive thresholds (plus 1 and a point beyond the largest) therefore
    reach every reachable outcome pattern.
    """
    cleared = clear_bids(instance, competitor_bids)
    thresholds = set()
    for j in range(instance.n_auctions):
        v = instance.values[bidder, j]
        if v <= 0:
            continue
        if instance.reserves[bidder, j] > 0:
            thresholds.add(instance.reserves[bidder, j] / v)
        for k in range(instance.n_bidders):
            if k != bidder and cleared[k, j] > 0:
                thresholds.add(cleared[k, j] / v)
    ts = sorted(thresholds)
    grid = {1.0}
    for lo, hi in zip(ts, ts[1:]):
        grid.add((lo + hi) / 2.0)
    if ts:
        grid.add(ts[-1] * pad)
        grid.add(max(ts[0] / 2.0, 1e-9))
    return np.array(sorted(a for a in grid if a >= 1.0) or [1.0])
