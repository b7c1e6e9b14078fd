"""Efficient outcome, welfare loss, ROAS feasibility and the empirical cdf."""
import numpy as np
import pytest

from autobid import (
    AuctionSpec,
    InstanceSpec,
    Mechanism,
    brute_force_assignment_oracle,
    build_report,
    efficient_outcome,
    empirical_cdf,
    loss_to_guarantee,
    motivating_example,
    ml_advice,
    random_instance,
    roas_check,
    run_instance,
    welfare_loss,
)
from autobid.instances import AdviceSpec
from autobid.welfare import report_to_csv


def single_slot(m):
    return [AuctionSpec(1, (1.0,)) for _ in range(m)]


class TestEfficientOutcome:
    def test_motivating_assignment(self):
        opt = efficient_outcome(motivating_example(1.0))
        assert opt.assignment[0].tolist() == [0]
        assert opt.assignment[1].tolist() == [1]
        assert opt.opt_per_bidder.tolist() == [1.0, 1.0]
        assert opt.opt_minus.tolist() == [1.0, 1.0]

    def test_single_bidder(self):
        inst = InstanceSpec(single_slot(1), np.array([[3.0]]))
        opt = efficient_outcome(inst)
        assert opt.opt_per_bidder[0] == 3.0 and opt.opt_total == 3.0

    def test_matches_brute_force_on_random_instances(self):
        for seed in range(40):
            inst = random_instance(3, 2, 2, seed=seed)
            opt = efficient_outcome(inst)
            assert opt.opt_total == pytest.approx(
                brute_force_assignment_oracle(inst), abs=1e-12
            )

    def test_opt_dominates_any_run(self):
        rng = np.random.default_rng(8)
        for seed in range(30):
            inst = random_instance(4, 3, 2, seed=seed)
            opt = efficient_outcome(inst)
            bids = rng.uniform(0, 2, size=inst.values.shape) * inst.values
            res = run_instance(inst, bids, Mechanism.VCG)
            assert res.welfare.sum() <= opt.opt_total + 1e-12


class TestWelfareLoss:
    def test_zero_at_efficient_outcome(self):
        for seed in range(20):
            inst = random_instance(4, 3, 2, seed=seed)
            res = run_instance(inst, inst.values, Mechanism.VCG)
            opt = efficient_outcome(inst)
            for i in range(4):
                assert welfare_loss(inst, res, i, opt) == pytest.approx(0.0)

    def test_motivating_loss_is_v(self):
        inst = motivating_example(2.0)
        bids = np.array([1.0, 2.5])[:, None] * inst.values
        res = run_instance(inst, bids, Mechanism.VCG)
        assert welfare_loss(inst, res, 0) == pytest.approx(2.0)

    def test_overperformance_does_not_offset_shortfalls(self):
        # bidder 0 loses auction 0 (shortfall 3) but steals auction 1 (gain)
        values = np.array([[3.0, 1.0], [2.0, 2.0]])
        inst = InstanceSpec(single_slot(2), values)
        bids = np.array([[1.0, 5.0], [2.0, 2.0]])
        res = run_instance(inst, bids, Mechanism.VCG)
        assert res.welfare[0].tolist() == [0.0, 1.0]
        assert welfare_loss(inst, res, 0) == pytest.approx(3.0)


class TestRoasCheck:
    def test_truthful_always_feasible(self):
        for seed in range(20):
            inst = random_instance(4, 4, 3, seed=seed)
            assert roas_check(inst, inst.values, Mechanism.GFP).feasible

    def test_motivating_with_advice_reserves_infeasible(self):
        inst = motivating_example(1.0)
        reserves, _ = ml_advice(inst.values, AdviceSpec(beta=0.6, seed=0))
        inst = inst.with_reserves(reserves)
        bids = np.array([1.0, 2.5])[:, None] * inst.values
        check = roas_check(inst, bids, Mechanism.VCG)
        assert not check.feasible
        assert check.slacks[1] <= -(0.1 - 1e-12)  # payment >= 1.6 against welfare 1.5

    def test_zero_bids_infeasible_by_convention(self):
        inst = random_instance(3, 3, 1, seed=0)
        check = roas_check(inst, np.zeros((3, 3)), Mechanism.VCG)
        assert not check.feasible
        assert np.array_equal(check.slacks, np.zeros(3))


class TestLossToGuarantee:
    def test_edge_values(self):
        assert loss_to_guarantee(0.0, 2.0) == 1.0
        assert loss_to_guarantee(1.5, 1.5) == 0.0
        assert loss_to_guarantee(0.5, 1.5) == pytest.approx(2.0 / 3.0)

    def test_zero_opt_rejected(self):
        with pytest.raises(ValueError):
            loss_to_guarantee(0.5, 0.0)

    def test_bound_direction_on_random_outcomes(self):
        rng = np.random.default_rng(17)
        for seed in range(30):
            inst = random_instance(4, 3, 2, seed=seed)
            opt = efficient_outcome(inst)
            bids = rng.uniform(0, 2.5, size=inst.values.shape) * inst.values
            res = run_instance(inst, bids, Mechanism.VCG)
            for i in range(4):
                if opt.opt_per_bidder[i] <= 0:
                    continue
                ratio = res.welfare_totals()[i] / opt.opt_per_bidder[i]
                loss = welfare_loss(inst, res, i, opt)
                assert ratio >= loss_to_guarantee(loss, opt.opt_per_bidder[i]) - 1e-12


class TestEmpiricalCdf:
    def test_examples(self):
        assert empirical_cdf([1.0, 1.0, 1.0], 0.8) == 0.0
        assert empirical_cdf([0.5, 0.9, 1.1], 0.95) == pytest.approx(2.0 / 3.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_cdf([], 0.5)

    def test_monotone_in_z_and_bounded(self):
        rng = np.random.default_rng(2)
        ratios = rng.uniform(0, 1.5, size=100)
        zs = np.linspace(0, 2, 21)
        thetas = [empirical_cdf(ratios, z) for z in zs]
        assert all(0.0 <= t <= 1.0 for t in thetas)
        assert all(a <= b for a, b in zip(thetas, thetas[1:]))


class TestWelfareReport:
    def test_csv_layout_and_undefined_ratio(self):
        values = np.array([[1.0, 0.0], [0.5, 0.0]])  # bidder 1 wins nothing
        inst = InstanceSpec(single_slot(2), values)
        report = build_report(inst, values, Mechanism.VCG)
        text = report_to_csv(report)
        lines = text.strip().splitlines()
        assert lines[0] == "bidder,W,OPT,loss,ratio,roas_slack,feasible"
        assert len(lines) == 3
        assert lines[2].split(",")[4] == "nan"
        assert report.feasible
