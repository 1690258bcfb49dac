import math

import numpy as np
import pytest

import elbotune as et

TINY_RUN = """
[env]
variant = "no_wall"
height = 12
width = 12
workspace_scale = 0.5
max_path_length = 10

[vae]
latent_dim = 2
encoder_hidden = [16]
decoder_hidden = [16]
eval_batch = 32
mc_samples = 1

[agent]
actor_hidden = [16]
critic_hidden = [16]
batch_size = 16

[autotune]
mode = "fixed"
n_e = 3
n_b = 200
n_theta = 3

[run]
epochs = 2
seed = 7
pretrain_rollouts = 3
pretrain_steps = 30
finetune_steps = 5
eval_goals = 3
out_dir = ""
"""


def test_compute_settings_reference_values():
    s = et.compute_settings(100.0, 1.0, 50)
    assert (s["n_e"], s["n_b"], s["n_theta"]) == (100, 5000, 100)
    s = et.compute_settings(-3.0, 1.0, 50)
    assert (s["n_e"], s["n_b"], s["n_theta"]) == (1, 50, 1)
    s = et.compute_settings(2497.0, 1.142, 50, 6000, 300000, 6000)
    assert (s["n_e"], s["n_b"], s["n_theta"]) == (2852, 142600, 2852)


def test_compute_settings_coupling():
    s = et.compute_settings(37.3, 1.7, 25)
    assert s["n_theta"] == s["n_e"]
    assert s["n_b"] == 25 * s["n_e"]
    assert s["n_e"] == math.ceil(37.3 * 1.7)


def test_latent_reward_is_negative_distance():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([1.0, 2.0, 7.0])
    assert et.latent_reward(a, b) == pytest.approx(-4.0)
    assert et.latent_reward(a, a) == 0.0


def test_glyph_dataset_shapes_and_values():
    img = et.glyph(0)
    assert img.shape == (256,)
    assert set(np.unique(img)).issubset({0.0, 1.0})
    data = et.glyph_dataset([0, 1, 2], per_class=2, seed=5)
    assert data.shape == (256, 6)
    same = et.glyph_dataset([0, 1, 2], per_class=2, seed=5)
    np.testing.assert_array_equal(data, same)


def test_nav_sim_roundtrip():
    sim = et.NavSim(height=12, width=12, seed=3)
    obs = sim.reset()
    assert obs.shape == (3 * 12 * 12,)
    assert obs.min() >= 0.0 and obs.max() <= 1.0
    p0 = sim.position
    sim.step(np.array([0.15, 0.0]))
    p1 = sim.position
    assert np.linalg.norm(p1 - p0) <= 0.15 + 1e-12
    goal_img, goal_pos = sim.sample_goal()
    assert goal_img.shape == obs.shape
    assert 0.0 <= goal_pos[0] <= 1.0 and 0.0 <= goal_pos[1] <= 1.0


def test_nav_sim_determinism():
    a = et.NavSim(seed=11)
    b = et.NavSim(seed=11)
    np.testing.assert_array_equal(a.reset(), b.reset())
    act = np.array([0.05, -0.1])
    np.testing.assert_array_equal(a.step(act), b.step(act))


def test_vae_fit_reduces_loss():
    data = et.glyph_dataset([0, 1, 2, 3], per_class=4, seed=1)
    vae = et.Vae(1, 16, 16, latent_dim=4, encoder_hidden=[32], decoder_hidden=[32], seed=2)
    history = vae.fit(data, steps=400, batch_size=8)
    head = np.mean([r["neg_beta_elbo"] for r in history[:50]])
    tail = np.mean([r["neg_beta_elbo"] for r in history[-50:]])
    assert tail < head
    report = vae.evaluate(data, mc_samples=2)
    assert report["neg_beta_elbo"] == pytest.approx(
        report["kl_term"] + report["recon_nll"], abs=1e-9
    )
    z = vae.encode(data)
    assert z.shape == (4, data.shape[1])
    x = vae.decode(z)
    assert x.shape == data.shape
    assert x.min() > 0.0 and x.max() < 1.0


def test_run_from_toml_metrics_and_determinism():
    rows = et.run_from_toml(TINY_RUN)
    assert len(rows) == 2
    for key in ("epoch", "neg_beta_elbo", "n_e", "n_theta", "eval_dist_mean", "coverage"):
        assert key in rows[0]
    assert rows[0]["n_e"] == 3 and rows[0]["n_theta"] == 3
    again = et.run_from_toml(TINY_RUN)
    assert rows == again


def test_canonical_config_roundtrip():
    canon = et.canonical_config(TINY_RUN)
    assert et.canonical_config(canon) == canon
    with pytest.raises(Exception):
        et.canonical_config("[autotune]\nxi = -1.0\n")
