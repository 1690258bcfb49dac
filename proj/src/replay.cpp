#include "elbotune/replay.hpp"

#include <stdexcept>

#include "elbotune/agent.hpp"

namespace elbotune {

EpisodeBuffer::EpisodeBuffer(std::int64_t capacity_transitions) {
    if (capacity_transitions < 1) throw std::invalid_argument("capacity must be >= 1");
    capacity_ = capacity_transitions;
}

int EpisodeBuffer::evict_to_fit() {
    int evicted = 0;
    while (total_ > capacity_ && episodes_.size() > 1) {
        total_ -= static_cast<std::int64_t>(episodes_.front().size());
        episodes_.pop_front();
        ++evicted;
    }
    if (total_ > capacity_) {
        // single oversized episode: keep the most recent transitions
        std::vector<Transition>& ep = episodes_.front();
        const std::int64_t drop = total_ - capacity_;
        ep.erase(ep.begin(), ep.begin() + drop);
        total_ = capacity_;
    }
    return evicted;
}

int EpisodeBuffer::push_episode(std::vector<Transition> episode) {
    if (episode.empty()) throw std::invalid_argument("empty episode");
    total_ += static_cast<std::int64_t>(episode.size());
    episodes_.push_back(std::move(episode));
    return evict_to_fit();
}

int EpisodeBuffer::resize(std::int64_t new_capacity) {
    if (new_capacity < 1) throw std::invalid_argument("capacity must be >= 1");
    capacity_ = new_capacity;
    if (episodes_.empty()) return 0;
    return evict_to_fit();
}

TransitionBatch EpisodeBuffer::sample_batch(int batch_size, double f_future, double f_prior,
                                            Rng& rng) const {
    if (total_ == 0) throw std::invalid_argument("empty buffer");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (f_future < 0.0 || f_prior < 0.0 || f_future + f_prior > 1.0)
        throw std::invalid_argument("relabel fractions must be nonnegative and sum to <= 1");

    const int d_z = static_cast<int>(episodes_.front().front().obs_latent.size());
    const int action_dim = static_cast<int>(episodes_.front().front().action.size());
    TransitionBatch batch;
    batch.obs_latent.resize(d_z, batch_size);
    batch.action.resize(action_dim, batch_size);
    batch.next_obs_latent.resize(d_z, batch_size);
    batch.goal_latent.resize(d_z, batch_size);
    batch.reward.resize(batch_size);

    for (int b = 0; b < batch_size; ++b) {
        // uniform over transitions: pick a global index, then locate its episode
        std::int64_t pick = uniform_int(rng, 0, total_ - 1);
        std::size_t ep_idx = 0;
        while (pick >= static_cast<std::int64_t>(episodes_[ep_idx].size())) {
            pick -= static_cast<std::int64_t>(episodes_[ep_idx].size());
            ++ep_idx;
        }
        const std::vector<Transition>& ep = episodes_[ep_idx];
        const int i = static_cast<int>(pick);
        const Transition& t = ep[i];

        Eigen::VectorXd goal = t.goal_latent;
        const double u = uniform01(rng);
        if (u < f_future) {
            const int j = uniform_int(rng, i, static_cast<int>(ep.size()) - 1);
            goal = ep[j].next_obs_latent;
        } else if (u < f_future + f_prior) {
            goal.resize(d_z);
            for (int k = 0; k < d_z; ++k) goal[k] = gaussian(rng);
        }
        batch.obs_latent.col(b) = t.obs_latent;
        batch.action.col(b) = t.action;
        batch.next_obs_latent.col(b) = t.next_obs_latent;
        batch.goal_latent.col(b) = goal;
        batch.reward[b] = latent_reward(t.next_obs_latent, goal);
    }
    return batch;
}

void EpisodeBuffer::refresh_latents(const VaeModel& model) {
    for (std::vector<Transition>& ep : episodes_) {
        const int n = static_cast<int>(ep.size());
        Eigen::MatrixXd images(model.encoder.input_size(), 2 * n);
        for (int i = 0; i < n; ++i) {
            images.col(2 * i) = ep[i].obs_image.pixels;
            images.col(2 * i + 1) = ep[i].next_obs_image.pixels;
        }
        const Eigen::MatrixXd means = encode_means_batch(model, images);
        for (int i = 0; i < n; ++i) {
            ep[i].obs_latent = means.col(2 * i);
            ep[i].next_obs_latent = means.col(2 * i + 1);
        }
    }
}

}  // namespace elbotune
