#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/image.hpp"
#include "elbotune/rng.hpp"
#include "elbotune/vae.hpp"

namespace elbotune {

struct Transition {
    Image obs_image;
    Image next_obs_image;
    Eigen::VectorXd obs_latent;
    Eigen::VectorXd next_obs_latent;
    Eigen::VectorXd action;
    Eigen::VectorXd goal_latent;
};

// Column i of each matrix is sample i.
struct TransitionBatch {
    Eigen::MatrixXd obs_latent;
    Eigen::MatrixXd action;
    Eigen::MatrixXd next_obs_latent;
    Eigen::MatrixXd goal_latent;
    Eigen::VectorXd reward;
};

class EpisodeBuffer {
  public:
    explicit EpisodeBuffer(std::int64_t capacity_transitions);

    // Appends one episode, evicting oldest whole episodes to fit. An episode
    // larger than the whole capacity keeps only its most recent transitions.
    int push_episode(std::vector<Transition> episode);
    int resize(std::int64_t new_capacity);

    TransitionBatch sample_batch(int batch_size, double f_future, double f_prior, Rng& rng) const;
    void refresh_latents(const VaeModel& model);

    std::int64_t capacity() const { return capacity_; }
    std::int64_t total_transitions() const { return total_; }
    int episode_count() const { return static_cast<int>(episodes_.size()); }
    const std::deque<std::vector<Transition>>& episodes() const { return episodes_; }

  private:
    std::deque<std::vector<Transition>> episodes_;
    std::int64_t capacity_ = 1;
    std::int64_t total_ = 0;

    int evict_to_fit();
};

}  // namespace elbotune
