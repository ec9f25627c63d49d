import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from csnkit.pldpo import (
    BetaTable,
    PreferenceSample,
    SceneType,
    binary_dpo_loss,
    gradient_residual,
    implicit_rewards,
    loss_gradient,
    pl_dpo_loss,
    pl_dpo_nll_loss,
    tie_loss,
)

NO_NLL = BetaTable(lam=0.0)


def test_tie_values():
    s2 = PreferenceSample([0.0, 0.0], [0.0, 0.0])
    s3 = PreferenceSample([-1.0, -2.0, -3.0], [-1.0, -2.0, -3.0])
    assert pl_dpo_loss(s2, 0.35) == pytest.approx(math.log(2), abs=1e-12)
    assert pl_dpo_loss(s3, 0.35) == pytest.approx(math.log(3) + math.log(2), abs=1e-12)
    assert tie_loss(3) == pytest.approx(math.log(6))


def test_nll_examples():
    s = PreferenceSample([-1.0, -1.0], [-1.0, -1.0])
    assert pl_dpo_nll_loss(s, BetaTable()) == pytest.approx(math.log(2) + 0.1, abs=1e-12)
    assert pl_dpo_nll_loss(s, NO_NLL) == pl_dpo_loss(s, NO_NLL.beta(s.scene_type))
    assert BetaTable().beta("turn") == 0.35


def test_beta_table_validation():
    with pytest.raises(ValueError):
        BetaTable(betas={"turn": 0.3})
    with pytest.raises(ValueError):
        BetaTable(lam=-1.0)


@pytest.mark.parametrize("pol, ref", [([0.0], [0.0]), ([0.0, 1.0], [0.0]), ([0.0, float("nan")], [0.0, 0.0])])
def test_sample_validation(pol, ref):
    with pytest.raises(ValueError):
        PreferenceSample(pol, ref)


def test_sample_round_trip():
    s = PreferenceSample([-1.0, -2.5], [-1.2, -2.0], "braking")
    again = PreferenceSample.from_dict(s.to_dict())
    assert again.scene_type is SceneType.BRAKING
    np.testing.assert_array_equal(again.policy_logprobs, s.policy_logprobs)


def test_symmetric_gradient():
    s = PreferenceSample([-1.0, -1.0], [-1.0, -1.0], "turn")
    np.testing.assert_allclose(loss_gradient(s), 0.35 * np.array([-0.5, 0.5]) + np.array([-0.1, 0.0]), atol=1e-14)


logprobs = arrays(np.float64, st.integers(2, 8), elements=st.floats(-30, 0, allow_nan=False))


@st.composite
def samples(draw):
    pol = draw(logprobs)
    ref = draw(arrays(np.float64, pol.shape, elements=st.floats(-30, 0, allow_nan=False)))
    return PreferenceSample(pol, ref, draw(st.sampled_from(list(SceneType))))


@settings(max_examples=200, deadline=None)
@given(samples(), st.floats(-50, 50, allow_nan=False))
def test_shift_invariance(s, c):
    table = BetaTable()
    shifted = s.with_policy(s.policy_logprobs + c)
    beta = table.beta(s.scene_type)
    assert pl_dpo_loss(shifted, beta) == pytest.approx(pl_dpo_loss(s, beta), abs=1e-9)
    assert pl_dpo_nll_loss(shifted, table) - pl_dpo_nll_loss(s, table) == pytest.approx(-table.lam * c, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(samples())
def test_gradient_sums_to_minus_lambda(s):
    assert loss_gradient(s).sum() == pytest.approx(-0.1, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(samples())
def test_loss_non_negative_and_binary_reduction(s):
    beta = 0.25
    assert pl_dpo_loss(s, beta) >= -1e-12
    if s.m == 2:
        assert pl_dpo_loss(s, beta) == pytest.approx(binary_dpo_loss(s, beta), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(samples(), st.floats(0.01, 5.0))
def test_raising_chosen_lowers_loss(s, bump):
    up = s.policy_logprobs.copy()
    up[0] += bump
    assert pl_dpo_nll_loss(s.with_policy(up)) < pl_dpo_nll_loss(s)


def test_stable_at_large_rewards():
    # beta * r around +-700: a naive exp would overflow
    s = PreferenceSample([2000.0, -2000.0, 0.0], [0.0, 0.0, 0.0], "turn")
    assert np.max(np.abs(0.35 * implicit_rewards(s))) == 700.0
    assert pl_dpo_loss(s, 0.35) == pytest.approx(700.0, rel=1e-12)  # stage 1 ranks -700 above 0
    flipped = PreferenceSample([-2000.0, 2000.0, 0.0], [0.0, 0.0, 0.0], "turn")
    # only the first stage pays: z_0 = -700 against a stage max of +700
    assert pl_dpo_loss(flipped, 0.35) == pytest.approx(1400.0, rel=1e-12)
    assert np.all(np.isfinite(loss_gradient(flipped)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    kinds = list(SceneType)
    for _ in range(50):
        m = int(rng.integers(2, 7))
        s = PreferenceSample(rng.normal(-5, 2, m), rng.normal(-5, 2, m), kinds[rng.integers(len(kinds))])
        assert gradient_residual(s) < 1e-6
