#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "elbotune/autotune.hpp"
#include "elbotune/config.hpp"
#include "elbotune/diversity.hpp"
#include "elbotune/env.hpp"
#include "elbotune/rig.hpp"
#include "elbotune/rng.hpp"
#include "elbotune/vae.hpp"

namespace py = pybind11;
using namespace elbotune;

namespace {

NavEnvConfig nav_config(const std::string& variant, int height, int width,
                        double workspace_scale, int max_path_length, double action_scale) {
    NavEnvConfig cfg;
    cfg.variant = parse_variant(variant);
    cfg.image_shape = {3, height, width};
    cfg.workspace_scale = workspace_scale;
    cfg.max_path_length = max_path_length;
    cfg.action_scale = action_scale;
    return cfg;
}

// Owns the episode context (walls, color) plus the RNG so python callers get
// the same reset/step semantics as the training loop.
struct NavSim {
    NavEnvConfig config;
    NavState state;
    Rng rng;

    NavSim(const std::string& variant, int height, int width, double workspace_scale,
           int max_path_length, double action_scale, std::uint64_t seed)
        : config(nav_config(variant, height, width, workspace_scale, max_path_length,
                            action_scale)),
          rng(seed) {
        state = reset(config, rng).first;
    }

    Eigen::VectorXd do_reset() {
        auto [s, img] = reset(config, rng);
        state = s;
        return img.pixels;
    }

    Eigen::VectorXd do_step(const Eigen::Vector2d& action) {
        auto [s, img] = step(config, state, action);
        state = s;
        return img.pixels;
    }

    Eigen::VectorXd do_render() const { return render(state, config).pixels; }

    std::pair<Eigen::VectorXd, Eigen::Vector2d> goal() {
        auto [img, pos] = sample_eval_goal(config, state, rng);
        return {img.pixels, pos};
    }

    Eigen::Vector2d position() const { return state.position; }
    std::tuple<int, int, int> shape() const {
        return {config.image_shape.channels, config.image_shape.height,
                config.image_shape.width};
    }
};

// Bundles model, optimizer, and RNG so fit/evaluate calls are one-liners.
struct VaeHandle {
    VaeModel model;
    VaeOptimizer optimizer;
    Rng rng;

    VaeHandle(int channels, int height, int width, int latent_dim, double beta,
              const std::vector<int>& encoder_hidden, const std::vector<int>& decoder_hidden,
              double learning_rate, std::uint64_t seed)
        : model(), optimizer(), rng(seed) {
        Rng init_rng(seed);
        model = make_vae(ImageShape{channels, height, width}, latent_dim, beta, encoder_hidden,
                         decoder_hidden, init_rng);
        optimizer = make_vae_optimizer(model, learning_rate);
    }

    py::list fit_steps(const Eigen::MatrixXd& dataset, int steps, int batch_size) {
        auto history = fit(model, dataset, steps, batch_size, optimizer, rng);
        py::list out;
        for (const auto& r : history) {
            py::dict row;
            row["neg_beta_elbo"] = r.neg_beta_elbo;
            row["kl_term"] = r.kl_term;
            row["recon_nll"] = r.recon_nll;
            out.append(row);
        }
        return out;
    }

    py::dict evaluate(const Eigen::MatrixXd& batch, int mc_samples) {
        ElboReport r = evaluate_elbo(model, batch, mc_samples, rng);
        py::dict out;
        out["neg_beta_elbo"] = r.neg_beta_elbo;
        out["kl_term"] = r.kl_term;
        out["recon_nll"] = r.recon_nll;
        out["n_samples"] = r.n_samples;
        return out;
    }

    Eigen::MatrixXd encode(const Eigen::MatrixXd& images) const {
        return encode_means_batch(model, images);
    }

    Eigen::MatrixXd decode(const Eigen::MatrixXd& latents) const {
        return decode_means_batch(model, latents);
    }
};

py::list metrics_to_list(const std::vector<EpochMetrics>& metrics) {
    py::list out;
    for (const auto& m : metrics) {
        py::dict row;
        row["epoch"] = m.epoch;
        row["neg_beta_elbo"] = m.neg_beta_elbo;
        row["kl_term"] = m.kl_term;
        row["recon_nll"] = m.recon_nll;
        row["n_e"] = m.n_explore;
        row["n_b"] = static_cast<std::int64_t>(m.n_buffer);
        row["n_theta"] = m.n_grad;
        row["buffer_transitions"] = static_cast<std::int64_t>(m.buffer_transitions);
        row["eval_dist_mean"] = m.eval_dist_mean;
        row["eval_dist_std"] = m.eval_dist_std;
        row["coverage"] = m.coverage;
        row["cum_env_steps"] = static_cast<std::int64_t>(m.cum_env_steps);
        row["cum_grad_updates"] = static_cast<std::int64_t>(m.cum_grad_updates);
        out.append(row);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Goal-conditioned RL with ELBO-driven hyperparameter tuning";

    m.def(
        "compute_settings",
        [](double neg_beta_elbo, double xi, int max_path_length, int cap_n_e,
           std::int64_t cap_n_b, int cap_n_theta) {
            AutotuneCaps caps{cap_n_e, cap_n_b, cap_n_theta};
            AutotuneSettings s = compute_settings(neg_beta_elbo, xi, max_path_length, caps);
            py::dict out;
            out["n_e"] = s.n_explore;
            out["n_b"] = static_cast<std::int64_t>(s.n_buffer);
            out["n_theta"] = s.n_grad;
            out["estimated_goal_count"] = s.estimated_goal_count;
            return out;
        },
        py::arg("neg_beta_elbo"), py::arg("xi"), py::arg("max_path_length") = 50,
        py::arg("cap_n_e") = 6000, py::arg("cap_n_b") = 300000, py::arg("cap_n_theta") = 6000,
        "Map a negative beta-ELBO to (N_e, N_b, N_theta) via ceil(xi * loss), capped.");

    m.def("latent_reward", &latent_reward, py::arg("z_s"), py::arg("z_g"),
          "Negative Euclidean distance between state and goal latents.");

    m.def(
        "glyph",
        [](int class_index) { return glyph_prototype(class_index).pixels; },
        py::arg("class_index"), "Flat 16x16 binary prototype for one glyph class.");

    m.def(
        "glyph_dataset",
        [](const std::vector<int>& class_set, int per_class, double noise_prob,
           std::uint64_t seed) {
            return dataset_matrix(make_glyph_dataset(class_set, per_class, noise_prob, seed));
        },
        py::arg("class_set"), py::arg("per_class") = 4, py::arg("noise_prob") = 0.0,
        py::arg("seed") = 0, "Columns are flattened glyph images.");

    py::class_<NavSim>(m, "NavSim")
        .def(py::init<const std::string&, int, int, double, int, double, std::uint64_t>(),
             py::arg("variant") = "no_wall", py::arg("height") = 16, py::arg("width") = 16,
             py::arg("workspace_scale") = 1.0, py::arg("max_path_length") = 50,
             py::arg("action_scale") = 0.15, py::arg("seed") = 0)
        .def("reset", &NavSim::do_reset, "New episode; returns the flat observation.")
        .def("step", &NavSim::do_step, py::arg("action"),
             "Apply a bounded 2D displacement; returns the flat observation.")
        .def("render", &NavSim::do_render)
        .def("sample_goal", &NavSim::goal, "Goal image and position for this episode.")
        .def_property_readonly("position", &NavSim::position)
        .def_property_readonly("image_shape", &NavSim::shape);

    py::class_<VaeHandle>(m, "Vae")
        .def(py::init<int, int, int, int, double, const std::vector<int>&,
                      const std::vector<int>&, double, std::uint64_t>(),
             py::arg("channels"), py::arg("height"), py::arg("width"), py::arg("latent_dim"),
             py::arg("beta") = 1.0, py::arg("encoder_hidden") = std::vector<int>{128},
             py::arg("decoder_hidden") = std::vector<int>{128},
             py::arg("learning_rate") = 1e-3, py::arg("seed") = 0)
        .def("fit", &VaeHandle::fit_steps, py::arg("dataset"), py::arg("steps"),
             py::arg("batch_size") = 32, "Adam steps on the beta-ELBO; returns per-step reports.")
        .def("evaluate", &VaeHandle::evaluate, py::arg("batch"), py::arg("mc_samples") = 4)
        .def("encode", &VaeHandle::encode, py::arg("images"), "Posterior means, one column each.")
        .def("decode", &VaeHandle::decode, py::arg("latents"),
             "Bernoulli means, one column each.");

    m.def(
        "run_from_toml",
        [](const std::string& text) {
            AppConfig app = parse_config_text(text);
            RunConfig rc = make_run_config(app);
            return metrics_to_list(run(rc));
        },
        py::arg("toml_text"),
        "Full training run from a TOML config string; returns per-epoch metrics dicts.");

    m.def(
        "canonical_config",
        [](const std::string& text) { return serialize_config(parse_config_text(text)); },
        py::arg("toml_text"), "Parse and re-serialize a config (validation + normalization).");
}
