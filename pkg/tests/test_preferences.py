"""Sub-segment expansion, Bradley-Terry loss/gradient, and the fit loop."""

import json
import math

import numpy as np
import pytest

from gaitpref.preferences import (
    Comparison,
    EmptyDatasetError,
    FitConfig,
    FitDivergedError,
    PreferenceDataset,
    SegmentRef,
    bce_loss,
    bce_loss_grad,
    bt_probability,
    dataset_from_json,
    dataset_to_json,
    expand_subsegments,
    fit,
    learn_from_ranking,
    ranking_to_pairs,
)
from gaitpref.rewards import RewardWeights, TaskVector
from gaitpref.simulate import Trajectory, rollout

from conftest import central_difference, naive_bce_loss, random_weights

TROT = TaskVector(1.2, 0.2, (1.0, 0.0, 0.0))
PACE = TaskVector(0.4, -0.1, (0.0, 1.0, 0.0))
BOUND = TaskVector(0.8, 0.0, (0.0, 0.0, 1.0))


def make_trajectories(T=30, noise=0.02, omegas=(TROT, PACE, BOUND)):
    return {
        f"traj-{i}": rollout(om, T=T, dt=0.02, noise_sigma=noise, seed=100 + i, traj_id=f"traj-{i}")
        for i, om in enumerate(omegas)
    }


def make_dataset(T=30, k=5, cap=None, seed=0, noise=0.02, omegas=(TROT, PACE, BOUND)):
    trajectories = make_trajectories(T=T, noise=noise, omegas=omegas)
    pairs = ranking_to_pairs(sorted(trajectories))
    return expand_subsegments(pairs, trajectories, k=k, cap=cap, seed=seed)


class TestRankingToPairs:
    def test_four_way_ranking(self):
        assert ranking_to_pairs(["a", "b", "c", "d"]) == [
            ("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d"),
        ]

    def test_two_way_ranking(self):
        assert ranking_to_pairs(["a", "b"]) == [("a", "b")]

    @pytest.mark.parametrize("n", range(2, 10))
    def test_binomial_count(self, n):
        ids = [f"t{i}" for i in range(n)]
        assert len(ranking_to_pairs(ids)) == math.comb(n, 2)

    def test_duplicates_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            ranking_to_pairs(["a", "b", "a"])

    def test_singleton_rejected(self):
        with pytest.raises(ValueError):
            ranking_to_pairs(["a"])


class TestExpandSubsegments:
    def test_full_cross_product_count(self):
        trajectories = make_trajectories(T=100, omegas=(TROT, PACE, BOUND, TaskVector(0.2, 0.1, (1, 0, 0))))
        pairs = ranking_to_pairs(sorted(trajectories))
        dataset = expand_subsegments(pairs, trajectories, k=20, cap=None)
        assert len(dataset) == (100 - 20) ** 2 * 6  # 38,400

    def test_smallest_case_single_comparison(self):
        trajectories = make_trajectories(T=3, omegas=(TROT, PACE))
        dataset = expand_subsegments([("traj-0", "traj-1")], trajectories, k=2, cap=None)
        assert len(dataset) == 1
        comp = dataset.comparisons[0]
        assert (comp.first.start, comp.first.length) == (0, 2)
        assert (comp.second.start, comp.second.length) == (0, 2)
        assert comp.label == 1

    def test_cap_subsamples_exactly(self):
        trajectories = make_trajectories(T=100, omegas=(TROT, PACE, BOUND, TaskVector(0.2, 0.1, (1, 0, 0))))
        pairs = ranking_to_pairs(sorted(trajectories))
        dataset = expand_subsegments(pairs, trajectories, k=20, cap=1000, seed=3)
        assert len(dataset) == 1000
        for comp in dataset.comparisons:
            for ref in (comp.first, comp.second):
                assert 0 <= ref.start <= 100 - 20
                assert ref.length == 20
                assert ref.trajectory_id in trajectories

    def test_cap_subsample_is_seeded(self):
        a = make_dataset(T=40, k=10, cap=50, seed=7)
        b = make_dataset(T=40, k=10, cap=50, seed=7)
        c = make_dataset(T=40, k=10, cap=50, seed=8)
        assert a.comparisons == b.comparisons
        assert a.comparisons != c.comparisons

    def test_label_is_one_with_preferred_first(self):
        dataset = make_dataset(T=20, k=4)
        ranked = sorted(dataset.trajectories)
        order = {tid: i for i, tid in enumerate(ranked)}
        for comp in dataset.comparisons:
            assert comp.label == 1
            assert order[comp.first.trajectory_id] < order[comp.second.trajectory_id]

    def test_segment_too_long_rejected(self):
        trajectories = make_trajectories(T=10, omegas=(TROT, PACE))
        with pytest.raises(ValueError, match="segment length"):
            expand_subsegments([("traj-0", "traj-1")], trajectories, k=10)

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError):
            expand_subsegments([], {}, k=2)


class TestBtProbability:
    def test_equal_returns_half(self):
        assert bt_probability(3.7, 3.7) == 0.5

    def test_unit_gap_matches_logistic(self):
        assert bt_probability(1.0, 0.0) == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_complement_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            a, b = rng.uniform(-50, 50, 2)
            assert bt_probability(a, b) + bt_probability(b, a) == pytest.approx(1.0, abs=1e-12)

    def test_no_overflow_at_large_returns(self):
        assert bt_probability(1e4, -1e4) == 1.0
        assert bt_probability(-1e4, 1e4) == 0.0
        assert bt_probability(1e4, 1e4 - 1.0) == pytest.approx(0.7310585786300049, abs=1e-9)

    def test_translation_invariance_fixed_segment_length(self):
        for c in (-123.0, 0.5, 777.0):
            assert bt_probability(2.0 + 20 * c, -1.0 + 20 * c) == pytest.approx(
                bt_probability(2.0, -1.0), abs=1e-12
            )


class TestBceLoss:
    def test_equal_returns_gives_log_two(self):
        # aligned windows of two identical rollouts: every comparison has
        # exactly equal segment returns, so p = 0.5 throughout
        base = rollout(TROT, T=20, noise_sigma=0.0, seed=0, traj_id="a")
        twin = rollout(TROT, T=20, noise_sigma=0.0, seed=0, traj_id="b")
        comparisons = [
            Comparison(SegmentRef("a", start, 5), SegmentRef("b", start, 5), 1)
            for start in range(15)
        ]
        dataset = PreferenceDataset(comparisons=comparisons, trajectories={"a": base, "b": twin})
        assert bce_loss(dataset, TROT) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_saturated_preference_is_tiny(self):
        vs = np.concatenate([np.full(10, 10.0), np.zeros(10)])
        good = Trajectory(
            vs=np.zeros(10), rhos=np.zeros(10), contacts=np.zeros((10, 4), dtype=bool),
            phases=np.zeros(10), dt=0.02, source_omega=TROT, id="good",
        )
        bad = Trajectory(
            vs=np.full(10, 10.0), rhos=np.zeros(10), contacts=np.zeros((10, 4), dtype=bool),
            phases=np.zeros(10), dt=0.02, source_omega=TROT, id="bad",
        )
        # omega with velocity target 0: good segment return 0, bad return -100*k
        omega = TaskVector(0.0, 0.0, (0.0, 0.0, 0.0))
        dataset = expand_subsegments([("good", "bad")], {"good": good, "bad": bad}, k=5, cap=None)
        loss = bce_loss(dataset, omega, RewardWeights((1.0, 1.0, 1.0, 1.0, 1.0)))
        assert 0.0 <= loss < 1e-8

    def test_nonnegative_on_random_data(self):
        dataset = make_dataset(T=25, k=6, cap=200)
        rng = np.random.default_rng(0)
        for _ in range(10):
            omega = TaskVector(rng.uniform(0, 1.5), rng.uniform(-0.4, 0.4), tuple(rng.uniform(0, 1, 3)))
            assert bce_loss(dataset, omega) >= 0.0

    def test_matches_naive_per_step_oracle(self):
        rng = np.random.default_rng(21)
        for trial in range(5):
            dataset = make_dataset(T=15, k=4, cap=60, seed=trial, noise=0.05)
            omega = TaskVector(rng.uniform(0, 1.5), rng.uniform(-0.4, 0.4), tuple(rng.uniform(0, 1, 3)))
            weights = random_weights(rng)
            fast = bce_loss(dataset, omega, weights)
            slow = naive_bce_loss(dataset, omega, weights)
            assert fast == pytest.approx(slow, rel=1e-9, abs=1e-12)

    def test_label_antisymmetry(self):
        dataset = make_dataset(T=20, k=5, cap=100)
        flipped = PreferenceDataset(
            comparisons=[
                Comparison(first=c.second, second=c.first, label=2) for c in dataset.comparisons
            ],
            trajectories=dataset.trajectories,
        )
        omega = TaskVector(0.9, 0.1, (0.4, 0.3, 0.3))
        assert bce_loss(dataset, omega) == pytest.approx(bce_loss(flipped, omega), abs=1e-12)

    def test_empty_dataset_rejected(self):
        dataset = PreferenceDataset(comparisons=[], trajectories={})
        with pytest.raises(EmptyDatasetError):
            bce_loss(dataset, TROT)


class TestBceLossGrad:
    def test_matches_finite_differences_on_20_seeded_datasets(self):
        rng = np.random.default_rng(33)
        for trial in range(20):
            dataset = make_dataset(T=18, k=4, cap=80, seed=trial, noise=0.05)
            omega = TaskVector(rng.uniform(0.1, 1.4), rng.uniform(-0.35, 0.35), tuple(rng.uniform(0.05, 0.95, 3)))
            weights = random_weights(rng)
            analytic = bce_loss_grad(dataset, omega, weights)

            def loss(x):
                return bce_loss(dataset, TaskVector.from_array(x), weights)

            numeric = central_difference(loss, omega.to_array(), h=1e-5)
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)

    def test_identical_content_pairs_with_both_labels_give_zero_gradient(self):
        base = rollout(TROT, T=24, noise_sigma=0.0, seed=4, traj_id="a")
        twin = rollout(TROT, T=24, noise_sigma=0.0, seed=4, traj_id="b")
        trajectories = {"a": base, "b": twin}
        comparisons = []
        for start in range(0, 18, 3):
            ref_a = SegmentRef("a", start, 6)
            ref_b = SegmentRef("b", start, 6)
            comparisons.append(Comparison(ref_a, ref_b, 1))
            comparisons.append(Comparison(ref_a, ref_b, 2))
        dataset = PreferenceDataset(comparisons=comparisons, trajectories=trajectories)
        rng = np.random.default_rng(1)
        for _ in range(5):
            omega = TaskVector(rng.uniform(0, 1.5), rng.uniform(-0.4, 0.4), tuple(rng.uniform(0, 1, 3)))
            np.testing.assert_allclose(bce_loss_grad(dataset, omega), np.zeros(5), atol=1e-15)

    def test_gait_components_reflect_match_fraction_differences(self):
        # aligned windows with identical (v, rho) content but different gait
        # patterns: tracking grads cancel exactly, only gait grads remain
        a = rollout(TaskVector(1.0, 0.0, (1, 0, 0)), T=20, noise_sigma=0.0, seed=0, traj_id="a")
        b = rollout(TaskVector(1.0, 0.0, (0, 1, 0)), T=20, noise_sigma=0.0, seed=0, traj_id="b")
        comparisons = [
            Comparison(SegmentRef("a", start, 5), SegmentRef("b", start, 5), 1)
            for start in range(15)
        ]
        dataset = PreferenceDataset(comparisons=comparisons, trajectories={"a": a, "b": b})
        omega = TaskVector(0.5, 0.1, (0.5, 0.5, 0.5))
        grad = bce_loss_grad(dataset, omega)
        assert grad[0] == pytest.approx(0.0, abs=1e-12)
        assert grad[1] == pytest.approx(0.0, abs=1e-12)
        assert grad[2] < 0  # trot weight should rise to favor the preferred trot segments
        assert grad[3] > 0


class TestFit:
    def test_best_loss_never_exceeds_initial(self):
        dataset = make_dataset(T=25, k=6, cap=150)
        config = FitConfig(learning_rate=0.05, iterations=40, init=TaskVector(0.7, 0.0, (0.4, 0.3, 0.3)))
        result = fit(dataset, config=config)
        assert min(result.loss_trace) <= result.loss_trace[0]
        assert bce_loss(dataset, result.omega) == pytest.approx(min(result.loss_trace), abs=1e-12)

    def test_trace_length_counts_init_and_updates(self):
        dataset = make_dataset(T=20, k=5, cap=60)
        result = fit(dataset, config=FitConfig(iterations=25, init=TROT))
        assert len(result.loss_trace) == 26

    def test_deterministic(self):
        dataset = make_dataset(T=25, k=6, cap=150)
        config = FitConfig(iterations=60, init=TaskVector(0.7, 0.0, (0.4, 0.3, 0.3)))
        first = fit(dataset, config=config)
        second = fit(dataset, config=config)
        assert first.omega == second.omega
        assert first.loss_trace == second.loss_trace

    def test_iterates_stay_clamped(self):
        dataset = make_dataset(T=25, k=6, cap=150)
        result = fit(dataset, config=FitConfig(learning_rate=5.0, iterations=50, init=PACE))
        omega = result.omega
        assert 0.0 <= omega.velocity <= 1.5
        assert -0.4 <= omega.pitch <= 0.4
        assert all(0.0 <= w <= 1.0 for w in omega.gait_weights)

    @pytest.mark.filterwarnings("ignore:invalid value")
    def test_divergence_reported_with_iteration(self):
        broken = Trajectory(
            vs=np.full(10, np.inf), rhos=np.zeros(10), contacts=np.zeros((10, 4), dtype=bool),
            phases=np.zeros(10), dt=0.02, source_omega=TROT, id="broken",
        )
        ok = rollout(TROT, T=10, noise_sigma=0.0, seed=0, traj_id="ok")
        dataset = expand_subsegments([("broken", "ok")], {"broken": broken, "ok": ok}, k=3, cap=None)
        with pytest.raises(FitDivergedError, match="iteration 0"):
            fit(dataset, config=FitConfig(init=TROT))

    def test_default_init_is_candidate_centroid(self):
        trajectories = make_trajectories(T=20, noise=0.0)
        pairs = ranking_to_pairs(sorted(trajectories))
        dataset = expand_subsegments(pairs, trajectories, k=5, cap=100)
        result = fit(dataset, config=FitConfig(iterations=1, learning_rate=1e-12))
        expected = np.mean([t.source_omega.to_array() for t in trajectories.values()], axis=0)
        np.testing.assert_allclose(result.omega.to_array(), expected, atol=1e-9)


class TestLearnFromRanking:
    def test_end_to_end_smoke(self):
        trajectories = make_trajectories(T=30, noise=0.0)
        ranking = sorted(trajectories)
        result = learn_from_ranking(ranking, trajectories, config=FitConfig(iterations=50), k=6)
        omega = result.omega
        assert 0.0 <= omega.velocity <= 1.5
        assert all(0.0 <= w <= 1.0 for w in omega.gait_weights)
        assert len(result.loss_trace) == 51


class TestDatasetJson:
    def test_round_trip(self):
        dataset = make_dataset(T=20, k=5, cap=40)
        record = json.loads(json.dumps(dataset_to_json(dataset)))
        rebuilt = dataset_from_json(record, dataset.trajectories)
        assert rebuilt.comparisons == dataset.comparisons
        assert set(rebuilt.trajectories) == set(dataset.trajectories)

    def test_missing_trajectories_rejected(self):
        dataset = make_dataset(T=20, k=5, cap=10)
        record = dataset_to_json(dataset)
        with pytest.raises(ValueError, match="missing"):
            dataset_from_json(record, {})
