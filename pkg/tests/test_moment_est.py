import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwre_mle.env_models import Beta, Temkin, temkin_benchmark, two_point_benchmark
from rwre_mle.harness import ExperimentSpec, run_experiment, summarize
from rwre_mle.moment_est import EmptyPath, invert_temkin, invert_two_point, moment_estimate, v_hat
from rwre_mle.walk_sim import ScriptedEnv, Walker, default_t_max, gen_environment, run_to_hitting

TP = two_point_benchmark()
TK = temkin_benchmark()


def test_deterministic_right_walk_gives_one():
    o = run_to_hitting(ScriptedEnv(lambda x: 1.0), 30, 100, np.random.default_rng(0))
    assert v_hat(o) == 1.0


def test_no_departure_is_an_error():
    o = Walker(ScriptedEnv(lambda x: 0.5), np.random.default_rng(0), 0).advance_to(3)
    assert not o.hit and o.n_departed == 0
    with pytest.raises(EmptyPath):
        v_hat(o)


def test_v_hat_counts_negative_sites():
    # left drift first, then strong right drift: the walk visits negative sites
    env = ScriptedEnv(lambda x: 0.2 if x == 0 else (0.9 if x < 0 else 1.0))
    for seed in range(50):
        o = run_to_hitting(env, 3, 10**6, np.random.default_rng(seed))
        fm = o.first_move_right()
        assert v_hat(o) == pytest.approx(sum(fm.values()) / len(fm))
        if o.min_site < 0:
            assert min(fm) < 0
            return
    pytest.fail("no walk visited a negative site")


def test_two_point_inversion_examples():
    assert invert_two_point(0.7, 0.4, 0.7) == (0.0, False)
    assert invert_two_point(0.4, 0.4, 0.7) == (1.0, False)
    p, _ = invert_two_point(0.5356, 0.4, 0.7)
    assert p == pytest.approx(0.548, abs=1e-12)


def test_two_point_inversion_clips_with_box():
    assert invert_two_point(0.7, 0.4, 0.7, box=((0.01, 0.99),)) == (0.01, True)


def test_temkin_inversion_examples():
    m = Temkin(a=0.4, p=0.41)
    (lo, hi), = m.box
    assert invert_temkin(1 - 0.41, 0.41, m.box) == (lo, True)
    assert invert_temkin(0.41, 0.41, m.box) == (hi, True)
    assert invert_temkin(1 - 0.41, 0.41) == (pytest.approx(0.0, abs=1e-15), False)
    assert invert_temkin(0.41, 0.41)[0] == pytest.approx(1.0)
    a, clipped = invert_temkin(0.518, 0.41, m.box)
    assert a == pytest.approx(0.4, abs=1e-12) and not clipped


def test_degenerate_inversions_rejected():
    with pytest.raises(ValueError):
        invert_two_point(0.5, 0.6, 0.6)
    with pytest.raises(ValueError):
        invert_temkin(0.5, 0.5)


@given(p=st.floats(0.0, 1.0), a1=st.floats(0.01, 0.49), a2=st.floats(0.51, 0.99))
def test_two_point_round_trip(p, a1, a2):
    got, clipped = invert_two_point(p * a1 + (1 - p) * a2, a1, a2)
    assert got == pytest.approx(p, abs=1e-9) and not clipped


@given(a=st.floats(0.0, 1.0), p=st.floats(0.01, 0.49))
def test_temkin_round_trip(a, p):
    got, _ = invert_temkin(p * a + (1 - p) * (1 - a), p)
    assert got == pytest.approx(a, abs=1e-9)


def test_beta_family_not_supported():
    o = run_to_hitting(ScriptedEnv(lambda x: 1.0), 5, 10, np.random.default_rng(0))
    with pytest.raises(NotImplementedError):
        moment_estimate(o, Beta(alpha=2.5, beta=2.0))


@pytest.mark.parametrize("model,mean", [(TP, 0.5356), (TK, 0.518)])
def test_v_hat_concentrates_on_mean_omega(model, mean):
    vals = []
    for r in range(40):
        w = Walker(gen_environment(model, r), np.random.default_rng(100 + r), default_t_max(1000, 0.9))
        o = w.advance_to(1000)
        if o.hit:
            vals.append(v_hat(o))
    assert abs(np.median(vals) - mean) < 0.02


def test_consistency_and_spread_against_mle():
    spec = ExperimentSpec(name="tp", model=TP, n_list=(1000,), replicates=200, seed=3)
    rows = {r.estimator: r for r in summarize(run_experiment(spec))}
    assert abs(rows["mom"].median - 0.548) < 0.05
    assert rows["mom"].iqr > rows["mle"].iqr
