"""Causal scene narration, semantic runtime supervision and desk-scale evaluation."""

from csnkit.narrator import narrate, render, render_csn, render_flat, render_template
from csnkit.pldpo import BetaTable, PreferenceSample, loss_gradient, pl_dpo_loss, pl_dpo_nll_loss
from csnkit.report import bootstrap_ci, decompose_utility, run_ablation_grid
from csnkit.scene import SceneState
from csnkit.sim import NoiseConfig, PolicyStub, inject_noise, run_episode, step_world, ttc_monitor
from csnkit.supervisor import SupervisorConfig, SupervisorState, check_phi1, check_phi2, step_supervisor

__all__ = [
    "BetaTable",
    "NoiseConfig",
    "PolicyStub",
    "PreferenceSample",
    "SceneState",
    "SupervisorConfig",
    "SupervisorState",
    "bootstrap_ci",
    "check_phi1",
    "check_phi2",
    "decompose_utility",
    "inject_noise",
    "loss_gradient",
    "narrate",
    "pl_dpo_loss",
    "pl_dpo_nll_loss",
    "render",
    "render_csn",
    "render_flat",
    "render_template",
    "run_ablation_grid",
    "run_episode",
    "step_supervisor",
    "step_world",
    "ttc_monitor",
]
