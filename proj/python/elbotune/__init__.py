"""Goal-conditioned RL with online hyperparameter tuning from the VAE loss."""

from _core import (
    NavSim,
    Vae,
    canonical_config,
    compute_settings,
    glyph,
    glyph_dataset,
    latent_reward,
    run_from_toml,
)

__all__ = [
    "NavSim",
    "Vae",
    "canonical_config",
    "compute_settings",
    "glyph",
    "glyph_dataset",
    "latent_reward",
    "run_from_toml",
]
