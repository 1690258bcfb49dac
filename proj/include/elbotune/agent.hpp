#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/nn.hpp"
#include "elbotune/replay.hpp"
#include "elbotune/rng.hpp"

namespace elbotune {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct SacConfig {
    int latent_dim = 4;
    int action_dim = 2;
    double action_scale = 0.15;
    std::vector<int> actor_hidden{64, 64};
    std::vector<int> critic_hidden{64, 64};
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.1;  // fixed temperature
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    int batch_size = 128;
    double f_future = 0.5;
    double f_prior = 0.2;
};

struct SacAgent {
    SacConfig config;
    DenseNet actor;  // (z_s, z_g) -> (action mean, log-std)
    DenseNet critic1, critic2;
    DenseNet target1, target2;
    AdamState actor_opt, critic1_opt, critic2_opt;
};

double latent_reward(const Eigen::VectorXd& z_s, const Eigen::VectorXd& z_g);

SacAgent make_agent(const SacConfig& config, Rng& rng);

Eigen::VectorXd select_action(const SacAgent& agent, const Eigen::VectorXd& z_s,
                              const Eigen::VectorXd& z_g, bool deterministic, Rng& rng);
// Lockstep action selection: columns are parallel episodes.
Eigen::MatrixXd select_actions_batch(const SacAgent& agent, const Eigen::MatrixXd& z_s,
                                     const Eigen::MatrixXd& z_g, bool deterministic, Rng& rng);

// Clipped double-Q bootstrap targets; noise drives the next-state action draw.
Eigen::VectorXd td_targets(const SacAgent& agent, const TransitionBatch& batch,
                           const Eigen::MatrixXd& next_noise);
// Half the summed per-critic mean squared errors, plus parameter gradients.
std::pair<double, std::pair<NetGrads, NetGrads>> critic_loss_and_grads(
    const SacAgent& agent, const TransitionBatch& batch, const Eigen::VectorXd& targets);
// Reparameterized policy loss against min-Q with entropy bonus.
std::pair<double, NetGrads> actor_loss_and_grads(const SacAgent& agent,
                                                 const TransitionBatch& batch,
                                                 const Eigen::MatrixXd& noise);

void soft_target_update(SacAgent& agent, double tau);
std::pair<double, double> gradient_step(SacAgent& agent, const TransitionBatch& batch, Rng& rng);

void save_agent(const SacAgent& agent, const std::string& path_prefix);
SacAgent load_agent(const std::string& path_prefix);

}  // namespace elbotune
