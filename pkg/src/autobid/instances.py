"""Constructors for named problem instances, ML advice and random families.

Covers the 2x2 motivating instance, the 2x3 tightness instance, the
(K+1) x (2K+1) impossibility instance (deterministic second-price
specialization, single-bidder purchase probability 1 and bid threshold 0),
Delta-separated random instances, and lower-confidence-bound ML advice used
directly as personalized reserves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AuctionSpec, InstanceSpec


def _single_slot_auctions(m: int) -> list[AuctionSpec]:
    return [AuctionSpec(1, (1.0,)) for _ in range(m)]


def motivating_example(v: float = 1.0) -> InstanceSpec:
    """2 bidders, 2 single-slot second-price auctions, no reserves.

    Bidder 0 only values auction 0; bidder 1 values both, and with a large
    multiplier can win both while staying ROAS-feasible -- unless reserves
    based on accurate advice raise her payment in auction 1.
    """
    if v <= 0:
        raise ValueError("v must be positive")
    values = np.array([[v, 0.0], [v / 2.0, v]])
    return InstanceSpec(_single_slot_auctions(2), values)


def tightness_instance(
    beta: float,
    alpha_1: float,
    gamma: float = 1.0,
    epsilon: float = 1e-6,
    y: float = 1.0,
):
    """2 bidders, 3 single-slot auctions where the VCG bound is attained.

    Returns (instance, designated bidder 0).  The designated bidder holds
    values (y, v, 0) with v = (1-beta)/(alpha_1-1)*gamma; the competitor holds
    (0, v-eps, gamma + eps/(1-beta)).  Reserves are exactly beta * value.
    With the competitor just outbidding alpha_1*v in auction 1, her ROAS
    slack is exactly zero and bidder 0's ratio drops to the bound.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    if alpha_1 <= 1.0:
        raise ValueError("alpha_1 must exceed 1")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if y < 0:
        raise ValueError("y must be nonnegative")
    v = (1.0 - beta) / (alpha_1 - 1.0) * gamma
    if not (0.0 < epsilon < v):
        raise ValueError(f"epsilon must lie in (0, v) with v = {v}")
    values = np.array(
        [
            [y, v, 0.0],
            [0.0, v - epsilon, gamma + epsilon / (1.0 - beta)],
        ]
    )
    instance = InstanceSpec(_single_slot_auctions(3), values, beta * values)
    return instance, 0


def region_example_instance(beta: float = 0.5) -> InstanceSpec:
    """2 bidders, 3 single-slot VCG auctions used for feasible-region maps.

    Values (4,3,1) against (1,4,3) with reserves beta * value.  At beta = 0.5
    the feasible uniform-multiplier region has corner coordinates
    alpha_0 <= 1.75 at alpha_1 = 3 and alpha_1 <= 1.25 at alpha_0 = 3.
    """
    if not (0.0 < beta < 1.0):
        raise ValueError("beta must lie in (0, 1)")
    values = np.array([[4.0, 3.0, 1.0], [1.0, 4.0, 3.0]])
    return InstanceSpec(_single_slot_auctions(3), values, beta * values)


@dataclass
class ImpossibilityParams:
    """Parameters of the no-better-than-VCG instance (second-price version).

    The deterministic single-slot specialization fixes the single-bidder
    purchase probability pi_a = 1 and the bid threshold q_a = 0, so any
    gamma > 0 works and v = (1-beta)/(alpha_0-1) * pi_a * gamma.
    """

    k: int
    beta: float
    alpha_0: float
    gamma: float = 1.0
    rho: float | None = None  # default alpha_0 * (1 + 1/k)
    epsilon: float | None = None  # default gamma / (1000 k^3)
    y: float | None = None  # default 2 * alpha_0 * v
    pi_a: float = 1.0
    q_a: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if self.alpha_0 <= 1.0:
            raise ValueError("alpha_0 must exceed 1")
        if self.pi_a != 1.0 or self.q_a != 0.0:
            raise ValueError(
                "only the deterministic second-price specialization "
                "(pi_a = 1, q_a = 0) is supported"
            )
        if self.gamma <= self.q_a / self.beta:
            raise ValueError("gamma must exceed q_a / beta")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.rho is None:
            self.rho = self.alpha_0 * (1.0 + 1.0 / self.k)
        if self.epsilon is None:
            self.epsilon = self.gamma / (1000.0 * self.k**3)
        if self.y is None:
            self.y = 2.0 * self.alpha_0 * self.v
        if not (self.alpha_0 < self.rho < self.alpha_0 / self.beta):
            raise ValueError(
                f"rho must lie in (alpha_0, alpha_0/beta) = "
                f"({self.alpha_0}, {self.alpha_0 / self.beta})"
            )
        if (self.alpha_0 * self.v + self.k * self.epsilon) / self.rho >= self.v:
            raise ValueError(
                "(alpha_0*v + k*eps)/rho must stay below v so the designated "
                "bidder keeps the strictly highest value in the contested auctions"
            )
        if self.y <= max(self.q_a / self.alpha_0, self.alpha_0 * self.v / self.pi_a):
            raise ValueError("y must exceed max(q_a/alpha_0, alpha_0*v/pi_a)")

    @property
    def v(self) -> float:
        return (1.0 - self.beta) / (self.alpha_0 - 1.0) * self.pi_a * self.gamma


def impossibility_instance(params: ImpossibilityParams):
    """Build the (K+1) x (2K+1) value table plus the lopsided bid profile.

    Returns (instance, designated bidder 0, multiplier profile).  Bidder 0
    holds value v in auctions 0..K-1 and y in the last auction; competitor i
    (1-indexed) holds values (alpha_0*v + sigma*eps)/rho arranged cyclically
    in auctions 0..K-1 plus gamma in her private auction.  Reserves are
    beta * value; all auctions are single-slot with CTR 1 (run under VCG).
    """
    k, v = params.k, params.v
    n, m = k + 1, 2 * k + 1
    values = np.zeros((n, m))
    values[0, :k] = v
    values[0, m - 1] = params.y
    for i in range(1, k + 1):
        for j in range(k):
            sigma = (i - 1 + j) % k + 1
            values[i, j] = (params.alpha_0 * v + sigma * params.epsilon) / params.rho
        values[i, k - 1 + i] = params.gamma
    instance = InstanceSpec(_single_slot_auctions(m), values, params.beta * values)
    profile = np.full(n, params.rho)
    profile[0] = params.alpha_0
    return instance, 0, profile


@dataclass
class AdviceSpec:
    """How to produce lower-confidence-bound advice for bidder values."""

    beta: float
    seed: int = 0
    mode: str = "uniform"  # "uniform" scales values, "ci" uses given bounds
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


def ml_advice(values, spec: AdviceSpec):
    """Reserve matrix from advice, plus the accuracy it certifies.

    Uniform-scale mode draws s ~ Uniform[beta, 1) per entry and sets
    r = s * v (zero values keep zero reserves).  Confidence-interval mode
    uses the given lower bounds directly and certifies
    beta = min over positive entries of lower/upper.
    """
    v = np.asarray(values, dtype=np.float64)
    if spec.mode == "uniform":
        if not (0.0 < spec.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        rng = np.random.default_rng(spec.seed)
        scales = rng.uniform(spec.beta, 1.0, size=v.shape)
        reserves = np.where(v > 0, scales * v, 0.0)
        return reserves, spec.beta
    if spec.mode == "ci":
        lower = np.asarray(spec.lower, dtype=np.float64)
        upper = np.asarray(spec.upper, dtype=np.float64)
        if lower.shape != v.shape or upper.shape != v.shape:
            raise ValueError("confidence bounds must match the value shape")
        pos = v > 0
        if np.any(lower[pos] >= upper[pos]) or np.any(lower[pos] >= v[pos]):
            raise ValueError("need lower < upper and lower < value entrywise")
        if np.any(v[pos] >= upper[pos]):
            raise ValueError("intervals must contain the values (value < upper)")
        if np.any(lower[pos] <= 0):
            raise ValueError("lower confidence bounds must be positive")
        reserves = np.where(pos, lower, 0.0)
        certified = float(np.min(lower[pos] / upper[pos])) if pos.any() else 0.0
        return reserves, certified
    raise ValueError(f"unknown advice mode {spec.mode!r}")


def is_beta_approximate(values, reserves, beta: float) -> bool:
    """Check r in [beta*v, v) on positive values and r = 0 on zero values."""
    v = np.asarray(values, dtype=np.float64)
    r = np.asarray(reserves, dtype=np.float64)
    pos = v > 0
    if np.any(r[~pos] != 0):
        return False
    return bool(np.all(r[pos] >= beta * v[pos]) and np.all(r[pos] < v[pos]))


def random_instance(
    n: int,
    m: int,
    slots_max: int,
    seed: int,
    zero_prob: float = 0.2,
    value_scale: float = 1.0,
) -> InstanceSpec:
    """Generic seeded random family with distinct positive values per auction."""
    rng = np.random.default_rng(seed)
    auctions = []
    for _ in range(m):
        s = int(rng.integers(1, slots_max + 1))
        top = rng.uniform(0.6, 1.0)
        decays = rng.uniform(0.3, 0.8, size=s - 1)
        ctrs = top * np.cumprod(np.concatenate([[1.0], decays]))
        auctions.append(AuctionSpec(s, tuple(ctrs)))
    values = value_scale * rng.lognormal(0.0, 0.7, size=(n, m))
    values[rng.random((n, m)) < zero_prob] = 0.0
    if not values.any():  # keep at least one positive entry
        values[0, 0] = value_scale
    return InstanceSpec(auctions, values)


def random_separated_instance(
    n: int,
    m: int,
    delta: float,
    slots_max: int,
    seed: int,
) -> InstanceSpec:
    """Random instance whose values are at least Delta-separated per auction.

    Each auction draws a geometric ladder of distinct positive values with
    adjacent ratio >= delta, assigned to a random subset of bidders.
    """
    if delta <= 1.0:
        raise ValueError("delta must exceed 1")
    rng = np.random.default_rng(seed)
    auctions = []
    values = np.zeros((n, m))
    for j in range(m):
        s = int(rng.integers(1, slots_max + 1))
        top = rng.uniform(0.6, 1.0)
        decays = rng.uniform(0.3, 0.8, size=s - 1)
        ctrs = top * np.cumprod(np.concatenate([[1.0], decays]))
        auctions.append(AuctionSpec(s, tuple(ctrs)))
        k = int(rng.integers(2, n + 1))
        bidders = rng.permutation(n)[:k]
        base = rng.lognormal(0.0, 0.5)
        ladder = base * np.cumprod(delta * rng.uniform(1.0, 1.25, size=k))
        values[bidders, j] = ladder
    return InstanceSpec(auctions, values)


def dynamics_ensemble_instance(
    n: int = 30,
    m: int = 50,
    slots_max: int = 3,
    seed: int = 0,
) -> InstanceSpec:
    """Synthetic auction pool for the two-phase dynamics experiments.

    Each bidder holds one private auction with no competition; the remaining
    auctions have an owner with the top value plus a few challengers close
    behind.  Private auctions cost nothing without reserves, and that ROAS
    surplus is what lets challengers outbid owners elsewhere; advice-based
    reserves tax the surplus in proportion to their accuracy.
    """
    rng = np.random.default_rng(seed)
    auctions = []
    values = np.zeros((n, m))
    n_private = min(n, m // 2)
    private_holders = rng.permutation(n)[:n_private]
    owners = np.concatenate(
        [rng.permutation(n) for _ in range(math.ceil(m / n))]
    )[: m - n_private]
    for j in range(m):
        private = j < n_private
        if private or slots_max == 1:
            s = 1
        else:
            s = int(rng.choice(np.arange(1, slots_max + 1), p=_slot_probs(slots_max)))
        top = rng.uniform(0.8, 1.0)
        decays = rng.uniform(0.35, 0.6, size=s - 1)
        ctrs = top * np.cumprod(np.concatenate([[1.0], decays]))
        auctions.append(AuctionSpec(s, tuple(ctrs)))
        if private:
            values[private_holders[j], j] = rng.lognormal(0.0, 0.4)
            continue
        owner = owners[j - n_private]
        v_owner = rng.lognormal(0.0, 0.4)
        values[owner, j] = v_owner
        others = np.setdiff1d(np.arange(n), [owner])
        k = min(int(rng.integers(3, 7)), others.size)
        challengers = rng.permutation(others)[:k]
        values[challengers, j] = v_owner * rng.uniform(0.55, 0.95, size=challengers.size)
    return InstanceSpec(auctions, values)


def _slot_probs(slots_max: int) -> np.ndarray:
    weights = np.array([2.0**-t for t in range(slots_max)])
    weights[0] *= 2.0
    return weights / weights.sum()
