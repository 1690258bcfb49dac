#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elbotune/agent.hpp"
#include "elbotune/autotune.hpp"
#include "elbotune/config.hpp"
#include "elbotune/env.hpp"
#include "elbotune/replay.hpp"
#include "elbotune/vae.hpp"

namespace elbotune {

struct VaeTrainConfig {
    int latent_dim = 4;
    double beta = 1.0;
    std::vector<int> encoder_hidden{128};
    std::vector<int> decoder_hidden{128};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int mc_samples = 4;
    int eval_batch = 256;
};

struct RunConfig {
    std::vector<CurriculumStage> schedule;
    TuningMode mode = TuningMode::make_auto(1.0);
    AutotuneCaps caps;
    VaeTrainConfig vae;
    SacConfig agent;
    int epochs = 40;
    int pretrain_rollouts = 30;
    int pretrain_steps = 2000;
    int finetune_steps = 250;
    int finetune_interval = 1;
    int eval_goals = 30;
    int checkpoint_interval = 0;
    std::uint64_t seed = 1;
    std::string out_dir;  // empty disables all file output
};

struct EpochMetrics {
    int epoch = 0;
    double neg_beta_elbo = 0.0;
    double kl_term = 0.0;
    double recon_nll = 0.0;
    int n_explore = 0;
    std::int64_t n_buffer = 0;
    int n_grad = 0;
    std::int64_t buffer_transitions = 0;
    double eval_dist_mean = 0.0;
    double eval_dist_std = 0.0;
    double coverage = 0.0;
    std::int64_t cum_env_steps = 0;
    std::int64_t cum_grad_updates = 0;
    double wall_clock_s = 0.0;
    std::vector<std::vector<Eigen::Vector2d>> eval_trajectories;
};

struct RunState {
    RunConfig config;
    VaeModel vae;
    VaeOptimizer vae_opt;
    SacAgent agent;
    EpisodeBuffer buffer{1};
    ElboReport last_elbo;
    std::int64_t cum_env_steps = 0;
    std::int64_t cum_grad_updates = 0;
    Rng explore_rng, agent_rng, eval_rng, vae_rng;
};

struct PretrainResult {
    VaeModel model;
    VaeOptimizer optimizer;
    ElboReport report;
    std::int64_t env_steps = 0;
};

// Fit the goal VAE on uniform-random-action rollouts; the returned report
// seeds epoch-0 auto-tuning.
PretrainResult pretrain_vae(const RunConfig& config, Rng& rng);

RunState init_run(const RunConfig& config);
EpochMetrics run_epoch(RunState& state, int epoch_index);
std::vector<EpochMetrics> run(const RunConfig& config);

// Fraction of cells on a 20x20 workspace grid visited by any trajectory point.
double coverage_area(const std::vector<std::vector<Eigen::Vector2d>>& trajectories,
                     const NavEnvConfig& env);

// wall_clock_s is written as 0 so reruns are byte-identical; real timings go
// to the sidecar written by write_timing_csv.
void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);
void write_timing_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);
void write_coverage_csv(const EpochMetrics& metrics, const std::string& path);

RunConfig make_run_config(const AppConfig& app);

}  // namespace elbotune
