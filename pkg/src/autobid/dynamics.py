"""Uniform bidding and log-space gradient-descent multiplier dynamics.

Each round, every bidder bids alpha_i * v_i across all auctions, observes her
total welfare w and payment p, and updates

    log alpha_{t+1} = (1 - eta_t) * log alpha_t + eta_t * log(w / p)

with the log ratio clamped to [-L, L] (p = 0 with positive welfare counts as
+L, zero welfare as -L) and the multiplier clamped to [1, alpha_max].

The two-phase protocol warm-starts without reserves for T rounds, then runs
T more rounds with advice-based personalized reserves; accuracy 0 keeps both
phases reserve-free and serves as the control.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .core import InstanceSpec, Mechanism, evaluate_bids
from .instances import AdviceSpec, dynamics_ensemble_instance, ml_advice
from .welfare import efficient_outcome, empirical_cdf, fmt


@dataclass
class DynamicsConfig:
    rounds_per_phase: int = 500
    eta0: float = 0.3  # step schedule eta_t = eta0 / sqrt(t)
    alpha_init: np.ndarray | None = None
    alpha_max: float = 100.0
    log_ratio_clamp: float = 5.0
    mechanism: Mechanism = Mechanism.VCG

    def __post_init__(self):
        if self.rounds_per_phase < 1:
            raise ValueError("need at least one round per phase")
        if not (0.0 < self.eta0 <= 1.0):
            raise ValueError("eta0 must lie in (0, 1]")
        if self.alpha_max <= 1.0:
            raise ValueError("alpha_max must exceed 1")

    def eta(self, t: int) -> float:
        """Step size for 1-indexed global round t."""
        return self.eta0 / np.sqrt(t)


def uniform_bids(values, alphas) -> np.ndarray:
    """b_{i,j} = alpha_i * v_{i,j}; multipliers below 1 are allowed but flagged."""
    v = np.asarray(values, dtype=np.float64)
    a = np.asarray(alphas, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("multipliers must be nonnegative")
    if np.any(a < 1.0):
        warnings.warn(
            "multiplier below 1 is weakly dominated by truthful bidding",
            stacklevel=2,
        )
    return a[:, None] * v


def gd_round(
    alphas: np.ndarray,
    instance: InstanceSpec,
    mechanism: Mechanism,
    eta: float,
    config: DynamicsConfig,
):
    """One full M-auction round plus the log-space update.

    Returns (next multipliers, welfare per bidder, payment per bidder).
    """
    bids = alphas[:, None] * instance.values
    payments, welfare = evaluate_bids(instance, bids, mechanism)
    w = welfare.sum(axis=-1)
    p = payments.sum(axis=-1)
    clamp = config.log_ratio_clamp
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.clip(np.log(np.where(p > 0, w, 1.0) / np.where(p > 0, p, 1.0)), -clamp, clamp)
    log_ratio = np.where(w <= 0, -clamp, np.where(p > 0, ratio, clamp))
    log_alpha = (1.0 - eta) * np.log(alphas) + eta * log_ratio
    next_alphas = np.clip(np.exp(log_alpha), 1.0, config.alpha_max)
    return next_alphas, w, p


@dataclass
class DynamicsTrace:
    """Round-by-round record of a two-phase run plus the final evaluation."""

    alphas: np.ndarray  # (2T, N), multiplier used in each round
    welfare: np.ndarray  # (2T, N)
    payments: np.ndarray  # (2T, N)
    final_alphas: np.ndarray  # (N,)
    final_welfare: np.ndarray  # (N,) at final multipliers under phase-2 reserves
    final_payments: np.ndarray
    ratios: np.ndarray  # W_i / OPT_i, NaN where OPT_i = 0
    beta: float

    def to_csv(self, stream=None) -> str:
        out = stream or io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["round", "bidder", "alpha", "welfare", "payment"])
        rounds, n = self.alphas.shape
        for t in range(rounds):
            for i in range(n):
                writer.writerow(
                    [
                        t + 1,
                        i,
                        fmt(self.alphas[t, i]),
                        fmt(self.welfare[t, i]),
                        fmt(self.payments[t, i]),
                    ]
                )
        return out.getvalue() if stream is None else ""


def run_two_phase(
    instance: InstanceSpec,
    beta: float,
    config: DynamicsConfig,
    advice_seed: int = 0,
) -> DynamicsTrace:
    """T warm-start rounds with no reserves, then T rounds with advice reserves.

    ``beta`` = 0 keeps phase 2 reserve-free as well (the control run).  The
    final multipliers are evaluated once more under the phase-2 reserves to
    produce the realized welfare ratios.
    """
    if not (0.0 <= beta < 1.0):
        raise ValueError("beta must lie in [0, 1)")
    t_phase = config.rounds_per_phase
    n = instance.n_bidders
    alphas = (
        np.ones(n)
        if config.alpha_init is None
        else np.asarray(config.alpha_init, dtype=np.float64).copy()
    )
    if np.any(alphas < 1.0) or np.any(alphas > config.alpha_max):
        raise ValueError("initial multipliers must lie within [1, alpha_max]")

    bare = instance.with_reserves(np.zeros_like(instance.values))
    if beta > 0:
        reserves, _ = ml_advice(instance.values, AdviceSpec(beta, advice_seed))
        reserved = instance.with_reserves(reserves)
    else:
        reserved = bare

    alpha_hist = np.empty((2 * t_phase, n))
    w_hist = np.empty((2 * t_phase, n))
    p_hist = np.empty((2 * t_phase, n))
    for t in range(2 * t_phase):
        env = bare if t < t_phase else reserved
        alpha_hist[t] = alphas
        alphas, w_hist[t], p_hist[t] = gd_round(
            alphas, env, config.mechanism, config.eta(t + 1), config
        )

    bids = alphas[:, None] * instance.values
    payments, welfare = evaluate_bids(reserved, bids, config.mechanism)
    w_final = welfare.sum(axis=-1)
    p_final = payments.sum(axis=-1)
    opt = efficient_outcome(instance)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(opt.opt_per_bidder > 0, w_final / opt.opt_per_bidder, np.nan)
    return DynamicsTrace(
        alphas=alpha_hist,
        welfare=w_hist,
        payments=p_hist,
        final_alphas=alphas,
        final_welfare=w_final,
        final_payments=p_final,
        ratios=ratios,
        beta=beta,
    )


@dataclass
class EnsembleResult:
    """theta(z) per (seed, accuracy) over a pool of synthetic instances."""

    betas: tuple[float, ...]
    seeds: tuple[int, ...]
    z: float
    theta: np.ndarray  # (len(seeds), len(betas))

    def mean_theta(self) -> np.ndarray:
        return self.theta.mean(axis=0)

    def to_csv(self, stream=None) -> str:
        out = stream or io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["seed", *[f"theta_beta_{fmt(b)}" for b in self.betas]])
        for row, seed in zip(self.theta, self.seeds):
            writer.writerow([seed, *[fmt(x) for x in row]])
        writer.writerow(["mean", *[fmt(x) for x in self.theta.mean(axis=0)]])
        return out.getvalue() if stream is None else ""


def run_cdf_ensemble(
    seeds,
    betas=(0.0, 0.25, 0.5, 0.75),
    z: float = 0.8,
    config: DynamicsConfig | None = None,
    n_bidders: int = 30,
    n_auctions: int = 50,
    slots_max: int = 3,
) -> EnsembleResult:
    """Run the two-phase protocol over seeded synthetic instances.

    For every seed the same instance is reused across all accuracy levels;
    only the advice draw differs.  Records theta(z) of the defined welfare
    ratios at the final multipliers.
    """
    config = config or DynamicsConfig()
    seeds = tuple(int(s) for s in seeds)
    betas = tuple(float(b) for b in betas)
    theta = np.empty((len(seeds), len(betas)))
    for si, seed in enumerate(seeds):
        instance = dynamics_ensemble_instance(n_bidders, n_auctions, slots_max, seed)
        for bi, beta in enumerate(betas):
            trace = run_two_phase(instance, beta, config, advice_seed=seed * 1009 + bi)
            defined = trace.ratios[~np.isnan(trace.ratios)]
            theta[si, bi] = empirical_cdf(defined, z)
    return EnsembleResult(betas, seeds, z, theta)
