"""Plackett-Luce preference loss (with NLL floor) and its analytic gradient.

Candidates are stored 0-based: index 0 is the chosen action, indices
1..M-1 are the rejected actions ordered by increasing risk. The ranking
likelihood is evaluated stage by stage, each stage normalising over the
candidates that have not been placed yet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class SceneType(str, Enum):
    TURN = "turn"
    PEDESTRIAN = "pedestrian"
    RED_LIGHT = "red_light"
    BRAKING = "braking"
    JUNCTION = "junction"
    SPEED_ADJUSTMENT = "speed_adjustment"
    NORMAL = "normal"


DEFAULT_BETAS = {
    SceneType.TURN: 0.35,
    SceneType.PEDESTRIAN: 0.35,
    SceneType.RED_LIGHT: 0.35,
    SceneType.BRAKING: 0.25,
    SceneType.JUNCTION: 0.20,
    SceneType.SPEED_ADJUSTMENT: 0.18,
    SceneType.NORMAL: 0.12,
}


@dataclass(frozen=True)
class BetaTable:
    betas: dict = field(default_factory=lambda: dict(DEFAULT_BETAS))
    lam: float = 0.1

    def __post_init__(self):
        betas = {SceneType(k): float(v) for k, v in self.betas.items()}
        missing = set(SceneType) - set(betas)
        if missing:
            raise ValueError(f"beta missing for {sorted(m.value for m in missing)}")
        if any(b <= 0 for b in betas.values()):
            raise ValueError("all beta values must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        object.__setattr__(self, "betas", betas)

    def beta(self, scene_type: SceneType | str) -> float:
        return self.betas[SceneType(scene_type)]


@dataclass(frozen=True)
class PreferenceSample:
    policy_logprobs: np.ndarray
    ref_logprobs: np.ndarray
    scene_type: SceneType = SceneType.NORMAL

    def __post_init__(self):
        pol = np.asarray(self.policy_logprobs, dtype=float)
        ref = np.asarray(self.ref_logprobs, dtype=float)
        if pol.ndim != 1 or pol.shape != ref.shape:
            raise ValueError(f"logprob vectors must be 1-D and equal length, got {pol.shape} and {ref.shape}")
        if len(pol) < 2:
            raise ValueError("a ranking needs at least two candidates")
        if not (np.all(np.isfinite(pol)) and np.all(np.isfinite(ref))):
            raise ValueError("logprobs must be finite")
        object.__setattr__(self, "policy_logprobs", pol)
        object.__setattr__(self, "ref_logprobs", ref)
        object.__setattr__(self, "scene_type", SceneType(self.scene_type))

    @property
    def m(self) -> int:
        return len(self.policy_logprobs)

    def with_policy(self, policy_logprobs) -> PreferenceSample:
        return PreferenceSample(policy_logprobs, self.ref_logprobs, self.scene_type)

    def to_dict(self) -> dict:
        return {
            "policy_logprobs": self.policy_logprobs.tolist(),
            "ref_logprobs": self.ref_logprobs.tolist(),
            "scene_type": self.scene_type.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PreferenceSample:
        return cls(d["policy_logprobs"], d["ref_logprobs"], d.get("scene_type", "normal"))


def implicit_rewards(sample: PreferenceSample) -> np.ndarray:
    return sample.policy_logprobs - sample.ref_logprobs


def _suffix_logsumexp(z: np.ndarray) -> np.ndarray:
    """``out[i] = log(sum_{j >= i} exp(z[j]))`` without overflow."""
    return np.logaddexp.accumulate(z[::-1])[::-1]


def pl_dpo_loss(sample: PreferenceSample, beta: float) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    z = beta * implicit_rewards(sample)
    return float(-np.sum(z - _suffix_logsumexp(z)))


def pl_dpo_nll_loss(sample: PreferenceSample, table: BetaTable = BetaTable()) -> float:
    beta = table.beta(sample.scene_type)
    return pl_dpo_loss(sample, beta) - table.lam * float(sample.policy_logprobs[0])


def loss_gradient(sample: PreferenceSample, table: BetaTable = BetaTable()) -> np.ndarray:
    """Gradient of :func:`pl_dpo_nll_loss` with respect to ``policy_logprobs``.

    Stage ``i`` contributes ``beta * (softmax_i(z)[k] - [k == i])`` for every
    candidate ``k >= i``; summing the stages gives, for candidate ``k``,
    ``beta * (sum_{i <= k} exp(z_k - lse_i) - 1)``.
    """
    beta = table.beta(sample.scene_type)
    z = beta * implicit_rewards(sample)
    lse = _suffix_logsumexp(z)
    # P[i, k] = exp(z_k - lse_i) for k >= i, else 0
    diff = z[None, :] - lse[:, None]
    mask = np.triu(np.ones((len(z), len(z)), dtype=bool))
    probs = np.where(mask, np.exp(np.where(mask, diff, 0.0)), 0.0)
    grad = beta * (probs.sum(axis=0) - 1.0)
    grad[0] -= table.lam
    return grad


def binary_dpo_loss(sample: PreferenceSample, beta: float) -> float:
    """``-log sigmoid(beta * (r_chosen - r_rejected))`` for two candidates."""
    if sample.m != 2:
        raise ValueError("binary DPO is defined for exactly two candidates")
    r = implicit_rewards(sample)
    # -log sigmoid(x) = log(1 + exp(-x))
    return float(np.logaddexp(0.0, -beta * (r[0] - r[1])))


def finite_difference_gradient(sample: PreferenceSample, table: BetaTable = BetaTable(), h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`pl_dpo_nll_loss`; an independent check of :func:`loss_gradient`."""
    grad = np.empty(sample.m)
    base = sample.policy_logprobs
    for k in range(sample.m):
        up, down = base.copy(), base.copy()
        up[k] += h
        down[k] -= h
        grad[k] = (pl_dpo_nll_loss(sample.with_policy(up), table) - pl_dpo_nll_loss(sample.with_policy(down), table)) / (2 * h)
    return grad


def gradient_residual(sample: PreferenceSample, table: BetaTable = BetaTable(), h: float = 1e-5) -> float:
    """Largest elementwise relative disagreement between analytic and numerical gradients."""
    g = loss_gradient(sample, table)
    fd = finite_difference_gradient(sample, table, h)
    scale = np.maximum(np.abs(g), 1e-8)
    return float(np.max(np.abs(g - fd) / scale))


def tie_loss(m: int) -> float:
    """Loss of an m-way tie: ``log(m!)``."""
    return math.lgamma(m + 1)
