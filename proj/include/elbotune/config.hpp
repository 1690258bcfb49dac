#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace elbotune {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EnvSection {
    std::string variant = "no_wall";
    int height = 16;
    int width = 16;
    double workspace_scale = 1.0;
    int max_path_length = 50;
    int wall_set_size = 15;
    double action_scale = 0.15;
    std::vector<std::int64_t> schedule_epochs;
    std::vector<std::string> schedule_variants;
    bool operator==(const EnvSection&) const = default;
};

struct VaeSection {
    int latent_dim = 4;
    double beta = 1.0;
    std::vector<std::int64_t> encoder_hidden{128};
    std::vector<std::int64_t> decoder_hidden{128};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int mc_samples = 4;
    int eval_batch = 256;
    // diversity experiment knobs
    int per_class = 4;
    double noise_prob = 0.0;
    int steps_per_epoch = 60;
    int epochs_per_stage = 12;
    int diversity_seeds = 3;
    bool operator==(const VaeSection&) const = default;
};

struct AgentSection {
    std::vector<std::int64_t> actor_hidden{64, 64};
    std::vector<std::int64_t> critic_hidden{64, 64};
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.1;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    int batch_size = 128;
    double f_future = 0.5;
    double f_prior = 0.2;
    bool operator==(const AgentSection&) const = default;
};

struct AutotuneSection {
    std::string mode = "auto";
    double xi = 1.0;
    int n_e = 100;
    std::int64_t n_b = 5000;
    int n_theta = 100;
    int cap_n_e = 6000;
    std::int64_t cap_n_b = 300000;
    int cap_n_theta = 6000;
    bool operator==(const AutotuneSection&) const = default;
};

struct RunSection {
    int epochs = 40;
    std::int64_t seed = 1;
    int pretrain_rollouts = 30;
    int pretrain_steps = 2000;
    int finetune_steps = 250;
    int finetune_interval = 1;
    int eval_goals = 30;
    int checkpoint_interval = 0;
    std::string out_dir = "run_out";
    bool operator==(const RunSection&) const = default;
};

struct SearchSection {
    int trials = 10;
    std::string mode = "auto";
    double xi_min = 0.1;
    double xi_max = 2.0;
    int ne_min = 5;
    int ne_max = 300;
    std::int64_t nb_min = 250;
    std::int64_t nb_max = 15000;
    int ntheta_min = 5;
    int ntheta_max = 300;
    int objective_window = 3;
    int workers = 1;
    bool operator==(const SearchSection&) const = default;
};

struct AppConfig {
    EnvSection env;
    VaeSection vae;
    AgentSection agent;
    AutotuneSection autotune;
    RunSection run;
    SearchSection search;
    bool operator==(const AppConfig&) const = default;
};

AppConfig parse_config(const std::string& path);
AppConfig parse_config_text(const std::string& text);
std::string serialize_config(const AppConfig& config);

}  // namespace elbotune
