import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momnash.estimators import bias_corrected_estimate, block_means, median, plan_blocks
from momnash.game import AffineGame, BoxConstraint, project
from momnash.noise import CorruptionModel, NoiseModel, RngStream, draw_noise
from momnash.seekers import (
    ALGORITHMS,
    STEPS,
    Schedules,
    SeekerConfig,
    SeekerError,
    run_seeker,
    samples_per_player,
    schedule_values,
    step_gc_sun,
    step_mom,
    theory_flags,
)

NONE = NoiseModel.none()


def test_schedule_examples():
    s = Schedules()
    v0, v9 = schedule_values(s, 0), schedule_values(s, 9)
    assert v0 == (1.0, 1, 1.0, 1.0, 20.0)
    assert v9.alpha == pytest.approx(0.1)
    assert v9.m == 10
    assert v9.gamma == pytest.approx(0.01)
    assert v9.eta == pytest.approx(10 ** -0.1)
    assert v9.tau == pytest.approx(20 * 10**0.2)


@pytest.mark.parametrize("beta, c, k, m", [(2.0, 1, 9, 100), (2.1, 1, 0, 1), (2.1, 1, 1, 5),
                                           (1.5, 3, 3, 24), (3.0, 1, 4, 125)])
def test_sample_schedule_ceiling(beta, c, k, m):
    assert schedule_values(Schedules(sample_beta=beta, sample_c=c), k).m == m


def test_fixed_m_and_eta_cap():
    s = Schedules(fixed_m=20, eta0=3.0)
    assert schedule_values(s, 500).m == 20
    assert schedule_values(s, 0).eta == 1.0


@pytest.mark.parametrize("kwargs", [{"step_a": 0.0}, {"step_a": 1.5}, {"sample_c": 0},
                                    {"rho": 0.0}, {"fixed_m": 0}, {"clip_tau0": -1.0}])
def test_schedule_validation(kwargs):
    with pytest.raises(SeekerError):
        Schedules(**kwargs)


def test_mom_first_step_without_noise(game15):
    x1, drawn = step_mom(game15, np.zeros(15), 0, Schedules(), NONE, rng=RngStream(0))
    expected = np.minimum(0.9 * np.arange(1, 16), 5.0)
    np.testing.assert_allclose(x1, expected, atol=1e-12)
    assert x1[0] == pytest.approx(0.9)
    assert drawn == 15


def test_gc_sun_clips_then_projects():
    game = AffineGame([[1.0]], [97.0], BoxConstraint.uniform(1, 0.0, 5.0))
    x1, _ = step_gc_sun(game, np.array([3.0]), 0, Schedules(), NONE, rng=RngStream(0))
    assert x1.tolist() == [0.0]


def _projected_gradient_oracle(game, x0, n_iter):
    x = np.array(x0, dtype=float)
    A, r = game.matrix, game.offset
    lo, hi = game.constraint.lower, game.constraint.upper
    out = [x.copy()]
    for k in range(n_iter):
        x = np.minimum(np.maximum(x - (A @ x + r) / (k + 1), lo), hi)
        out.append(x.copy())
    return np.array(out)


@pytest.mark.parametrize("algorithm", ["mom", "mom_bc"])
def test_noiseless_mom_matches_projected_gradient(game15, x_star15, algorithm):
    config = SeekerConfig(algorithm, Schedules(fixed_m=2))
    traj = run_seeker(game15, config, NONE, np.zeros(15), 2 * 3000, RngStream(1), x_star15)
    oracle = _projected_gradient_oracle(game15, np.zeros(15), len(traj) - 1)
    np.testing.assert_allclose(traj.xs, oracle, atol=1e-12)
    assert traj.errors[-1] < 1e-6


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_all_seekers_converge_without_noise(game15, x_star15, algorithm):
    s = Schedules(fixed_m=2)
    config = SeekerConfig(algorithm, s)
    budget = 20000 * samples_per_player(algorithm, s, 0)
    traj = run_seeker(game15, config, NONE, np.zeros(15), budget, RngStream(1), x_star15)
    assert traj.errors[-1] < 1e-4


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(ALGORITHMS), st.integers(0, 2**31))
def test_iterates_stay_in_box(algorithm, seed):
    game = AffineGame(np.diag([2.0, 3.0, 4.0]), [-1.0, -30.0, 12.0], BoxConstraint.uniform(3, 0.0, 5.0))
    traj = run_seeker(game, SeekerConfig(algorithm), NoiseModel.symmetrized_pareto(1.2), np.zeros(3),
                      2000, RngStream(seed))
    assert all(game.constraint.contains(x) for x in traj.xs)


@pytest.mark.parametrize("algorithm, per_iter", [("gc_sun", 1), ("clipped_sgda", 1), ("clipped_seg", 2)])
def test_sample_accounting_baselines(game15, x_star15, algorithm, per_iter):
    traj = run_seeker(game15, SeekerConfig(algorithm), NoiseModel.gaussian(), np.zeros(15), 101,
                      RngStream(2), x_star15)
    assert len(traj) - 1 == 101 // per_iter
    assert np.array_equal(traj.samples, per_iter * traj.k)
    total = run_seeker(game15, SeekerConfig(algorithm), NoiseModel.gaussian(), np.zeros(15), 15 * 101,
                       RngStream(2), x_star15, budget_mode="total")
    np.testing.assert_array_equal(total.xs, traj.xs)


def test_sample_accounting_mom(game15, x_star15):
    traj = run_seeker(game15, SeekerConfig("mom"), NoiseModel.gaussian(), np.zeros(15), 60, RngStream(3),
                      x_star15)
    # 1 + 2 + ... + 10 = 55 <= 60 < 66
    assert traj.k[-1] == 10
    assert traj.samples.tolist() == [k * (k + 1) // 2 for k in range(11)]


def test_trace_records(game15, x_star15):
    traj = run_seeker(game15, SeekerConfig("mom"), NONE, np.zeros(15), 10, RngStream(3), x_star15)
    first = traj[0]
    assert first.k == 0 and first.samples_consumed_total == 0
    np.testing.assert_array_equal(first.x, np.zeros(15))
    assert first.error == pytest.approx(np.linalg.norm(x_star15))
    assert traj.rel_errors[0] == pytest.approx(1.0)
    assert [t.k for t in traj] == list(range(len(traj)))


def test_single_record_when_budget_too_small(game15, x_star15):
    traj = run_seeker(game15, SeekerConfig("clipped_seg"), NONE, np.zeros(15), 1, RngStream(0), x_star15)
    assert len(traj) == 1


def test_run_seeker_validation(game15):
    with pytest.raises(SeekerError):
        run_seeker(game15, SeekerConfig("mom"), NONE, np.full(15, 6.0), 10, RngStream(0))
    with pytest.raises(SeekerError):
        run_seeker(game15, SeekerConfig("mom"), NONE, np.zeros(15), 0, RngStream(0))
    with pytest.raises(SeekerError):
        SeekerConfig("adam")


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_determinism(game15, x_star15, algorithm):
    noise = NoiseModel.symmetrized_pareto(1.8)
    a = run_seeker(game15, SeekerConfig(algorithm), noise, np.zeros(15), 500, RngStream(9, 4), x_star15)
    b = run_seeker(game15, SeekerConfig(algorithm), noise, np.zeros(15), 500, RngStream(9, 4), x_star15)
    np.testing.assert_array_equal(a.xs, b.xs)


def test_mom_bc_without_correction_equals_mom(game15, x_star15):
    noise = NoiseModel.shifted_pareto(1.8)
    s = Schedules(eta0=0.0, sample_beta=2.1)
    a = run_seeker(game15, SeekerConfig("mom", s), noise, np.zeros(15), 3000, RngStream(5), x_star15)
    b = run_seeker(game15, SeekerConfig("mom_bc", s), noise, np.zeros(15), 3000, RngStream(5), x_star15)
    np.testing.assert_array_equal(a.xs, b.xs)


def test_breakdown_corruption_noiseless_matches_clean(game15, x_star15):
    corrupted = SeekerConfig("mom", Schedules(fixed_m=40), CorruptionModel("breakdown", magnitude=1e12))
    clean = SeekerConfig("mom", Schedules(fixed_m=40))
    a = run_seeker(game15, corrupted, NONE, np.zeros(15), 40 * 2000, RngStream(6), x_star15)
    b = run_seeker(game15, clean, NONE, np.zeros(15), 40 * 2000, RngStream(6), x_star15)
    np.testing.assert_allclose(a.xs, b.xs, atol=1e-12)
    assert a.errors[-1] < 1e-2


def test_bias_correction_reduces_bias():
    # asymmetric noise: the median of block means is biased below the mean
    noise = NoiseModel.shifted_pareto(1.8)
    m, k = 200, 49
    vals = schedule_values(Schedules(), k)
    plan = plan_blocks(m, vals.gamma)
    xi = draw_noise(noise, RngStream(7), (10**5, m))
    means = block_means(xi, plan)
    plain_bias = abs(median(means).mean())
    corrected_bias = abs(bias_corrected_estimate(means, vals.eta).mean())
    assert corrected_bias < plain_bias


def test_theory_flags():
    noise = NoiseModel.shifted_pareto(1.8)
    assert theory_flags(SeekerConfig("mom_bc", Schedules(sample_beta=2.1)), noise)["beta_condition"]
    assert not theory_flags(SeekerConfig("mom_bc", Schedules(sample_beta=1.0)), noise)["beta_condition"]
    flags = theory_flags(SeekerConfig("mom"), noise, 500)
    k0 = flags["theory_valid_from_k"]
    assert k0 > 0
    vals = schedule_values(Schedules(), k0)
    assert plan_blocks(vals.m, vals.gamma).theory_valid
    assert theory_flags(SeekerConfig("mom", Schedules(fixed_m=5)), noise, 50)["theory_valid_from_k"] == -1


def test_steps_table_covers_algorithms():
    assert set(STEPS) == set(ALGORITHMS)


def test_extragradient_without_clipping_matches_oracle():
    game = AffineGame([[2.0, 1.0], [-1.0, 2.0]], [-1.0, -2.0], BoxConstraint.uniform(2, -5.0, 5.0))
    s = Schedules(clip_tau0=1e9, fixed_step=0.05)
    traj = run_seeker(game, SeekerConfig("clipped_seg", s), NONE, np.zeros(2), 2 * 50, RngStream(0))
    x = np.zeros(2)
    for _ in range(50):
        half = project(x - 0.05 * game.mean_gradient(x), game.constraint)
        x = project(x - 0.05 * game.mean_gradient(half), game.constraint)
    np.testing.assert_allclose(traj.xs[-1], x, atol=1e-13)


def test_per_player_budget_gives_about_four_hundred_updates(game15, x_star15):
    traj = run_seeker(game15, SeekerConfig("mom"), NONE, np.zeros(15), 100_000, RngStream(0), x_star15)
    # 446 * 447 / 2 = 99681 <= 100000 < 447 * 448 / 2
    assert traj.k[-1] == 446
    total = run_seeker(game15, SeekerConfig("mom"), NONE, np.zeros(15), 100_000, RngStream(0), x_star15,
                       budget_mode="total")
    assert total.k[-1] == 114


def test_noiseless_error_nonincreasing(game15, x_star15):
    traj = run_seeker(game15, SeekerConfig("mom", Schedules(fixed_m=1)), NONE, np.zeros(15), 3000,
                      RngStream(0), x_star15)
    tail = traj.errors[5:]
    assert np.all(np.diff(tail) <= 1e-15)
