#include "elbotune/agent.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace elbotune {

double latent_reward(const Eigen::VectorXd& z_s, const Eigen::VectorXd& z_g) {
    if (z_s.size() != z_g.size()) throw std::invalid_argument("latent dimension mismatch");
    return -(z_s - z_g).norm();
}

SacAgent make_agent(const SacConfig& config, Rng& rng) {
    if (config.latent_dim < 1 || config.action_dim < 1)
        throw std::invalid_argument("agent dims must be positive");
    SacAgent agent;
    agent.config = config;
    std::vector<int> actor_sizes{2 * config.latent_dim};
    for (int h : config.actor_hidden) actor_sizes.push_back(h);
    actor_sizes.push_back(2 * config.action_dim);
    agent.actor = make_net(actor_sizes, Activation::Rectifier, Activation::Identity, rng);

    std::vector<int> critic_sizes{2 * config.latent_dim + config.action_dim};
    for (int h : config.critic_hidden) critic_sizes.push_back(h);
    critic_sizes.push_back(1);
    agent.critic1 = make_net(critic_sizes, Activation::Rectifier, Activation::Identity, rng);
    agent.critic2 = make_net(critic_sizes, Activation::Rectifier, Activation::Identity, rng);
    agent.target1 = agent.critic1;
    agent.target2 = agent.critic2;

    agent.actor_opt = make_adam(agent.actor, config.actor_lr);
    agent.critic1_opt = make_adam(agent.critic1, config.critic_lr);
    agent.critic2_opt = make_adam(agent.critic2, config.critic_lr);
    return agent;
}

namespace {

Eigen::MatrixXd stack2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
}

Eigen::MatrixXd stack3(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const Eigen::MatrixXd& c) {
    Eigen::MatrixXd out(a.rows() + b.rows() + c.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.middleRows(a.rows(), b.rows()) = b;
    out.bottomRows(c.rows()) = c;
    return out;
}

Eigen::MatrixXd fill_gaussian(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd out(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) out(i, j) = gaussian(rng);
    return out;
}

// log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)), stable for large |u|
Eigen::ArrayXXd log_one_minus_tanh_sq(const Eigen::ArrayXXd& u) {
    const Eigen::ArrayXXd sp = (-2.0 * u).exp().log1p();
    return 2.0 * (std::log(2.0) - u - sp);
}

struct PolicySample {
    Eigen::ArrayXXd mean, raw_log_std, log_std, sigma, u, tanh_u;
    Eigen::MatrixXd actions;              // tanh(u) * scale
    Eigen::RowVectorXd log_prob;          // per sample
};

PolicySample sample_policy(const SacAgent& agent, const Eigen::MatrixXd& actor_out,
                           const Eigen::MatrixXd& noise) {
    const int ad = agent.config.action_dim;
    PolicySample ps;
    ps.mean = actor_out.topRows(ad).array();
    ps.raw_log_std = actor_out.bottomRows(ad).array();
    ps.log_std = ps.raw_log_std.max(kLogStdMin).min(kLogStdMax);
    ps.sigma = ps.log_std.exp();
    ps.u = ps.mean + ps.sigma * noise.array();
    ps.tanh_u = ps.u.tanh();
    ps.actions = (ps.tanh_u * agent.config.action_scale).matrix();
    // per-dim log density of the squashed, scaled action:
    //   -log sigma - log sqrt(2 pi) - eps^2/2 - log(1 - tanh(u)^2) - log scale
    const Eigen::ArrayXXd per_dim =
        -ps.log_std - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * noise.array().square() -
        log_one_minus_tanh_sq(ps.u) - std::log(agent.config.action_scale);
    ps.log_prob = per_dim.colwise().sum().matrix();
    return ps;
}

}  // namespace

Eigen::MatrixXd select_actions_batch(const SacAgent& agent, const Eigen::MatrixXd& z_s,
                                     const Eigen::MatrixXd& z_g, bool deterministic, Rng& rng) {
    const Eigen::MatrixXd out = forward_batch(agent.actor, stack2(z_s, z_g));
    const int ad = agent.config.action_dim;
    if (deterministic)
        return (out.topRows(ad).array().tanh() * agent.config.action_scale).matrix();
    const Eigen::MatrixXd noise = fill_gaussian(ad, static_cast<int>(z_s.cols()), rng);
    return sample_policy(agent, out, noise).actions;
}

Eigen::VectorXd select_action(const SacAgent& agent, const Eigen::VectorXd& z_s,
                              const Eigen::VectorXd& z_g, bool deterministic, Rng& rng) {
    return select_actions_batch(agent, z_s, z_g, deterministic, rng).col(0);
}

Eigen::VectorXd td_targets(const SacAgent& agent, const TransitionBatch& batch,
                           const Eigen::MatrixXd& next_noise) {
    const Eigen::MatrixXd next_in = stack2(batch.next_obs_latent, batch.goal_latent);
    const Eigen::MatrixXd actor_out = forward_batch(agent.actor, next_in);
    const PolicySample ps = sample_policy(agent, actor_out, next_noise);
    const Eigen::MatrixXd critic_in =
        stack3(batch.next_obs_latent, batch.goal_latent, ps.actions);
    const Eigen::RowVectorXd q1 = forward_batch(agent.target1, critic_in).row(0);
    const Eigen::RowVectorXd q2 = forward_batch(agent.target2, critic_in).row(0);
    const Eigen::ArrayXd min_q = q1.cwiseMin(q2).transpose().array();
    return batch.reward.array() +
           agent.config.gamma *
               (min_q - agent.config.alpha * ps.log_prob.transpose().array());
}

std::pair<double, std::pair<NetGrads, NetGrads>> critic_loss_and_grads(
    const SacAgent& agent, const TransitionBatch& batch, const Eigen::VectorXd& targets) {
    const int b = static_cast<int>(batch.reward.size());
    const Eigen::MatrixXd critic_in = stack3(batch.obs_latent, batch.goal_latent, batch.action);
    ForwardCache c1, c2;
    const Eigen::RowVectorXd q1 = forward_batch_cached(agent.critic1, critic_in, c1).row(0);
    const Eigen::RowVectorXd q2 = forward_batch_cached(agent.critic2, critic_in, c2).row(0);
    const Eigen::RowVectorXd e1 = q1 - targets.transpose();
    const Eigen::RowVectorXd e2 = q2 - targets.transpose();
    const double loss = 0.5 * (e1.squaredNorm() + e2.squaredNorm()) / b;
    BatchBackwardResult g1 = backward_batch(agent.critic1, c1, e1 / b);
    BatchBackwardResult g2 = backward_batch(agent.critic2, c2, e2 / b);
    return {loss, {std::move(g1.grads), std::move(g2.grads)}};
}

std::pair<double, NetGrads> actor_loss_and_grads(const SacAgent& agent,
                                                 const TransitionBatch& batch,
                                                 const Eigen::MatrixXd& noise) {
    const int b = static_cast<int>(batch.reward.size());
    const int ad = agent.config.action_dim;
    const double alpha = agent.config.alpha;
    const double scale = agent.config.action_scale;

    const Eigen::MatrixXd actor_in = stack2(batch.obs_latent, batch.goal_latent);
    ForwardCache actor_cache;
    const Eigen::MatrixXd& actor_out =
        forward_batch_cached(agent.actor, actor_in, actor_cache);
    const PolicySample ps = sample_policy(agent, actor_out, noise);

    const Eigen::MatrixXd critic_in = stack3(batch.obs_latent, batch.goal_latent, ps.actions);
    ForwardCache c1, c2;
    const Eigen::RowVectorXd q1 = forward_batch_cached(agent.critic1, critic_in, c1).row(0);
    const Eigen::RowVectorXd q2 = forward_batch_cached(agent.critic2, critic_in, c2).row(0);
    const Eigen::RowVectorXd min_q = q1.cwiseMin(q2);
    const double loss = (alpha * ps.log_prob - min_q).sum() / b;

    // d(-min Q)/d action via whichever critic attains the minimum, per sample
    Eigen::RowVectorXd up1 = Eigen::RowVectorXd::Zero(b);
    Eigen::RowVectorXd up2 = Eigen::RowVectorXd::Zero(b);
    for (int i = 0; i < b; ++i)
        (q1[i] <= q2[i] ? up1[i] : up2[i]) = -1.0 / b;
    const BatchBackwardResult b1 = backward_batch(agent.critic1, c1, up1);
    const BatchBackwardResult b2 = backward_batch(agent.critic2, c2, up2);
    const Eigen::ArrayXXd d_action =
        b1.input_grads.bottomRows(ad).array() + b2.input_grads.bottomRows(ad).array();

    const Eigen::ArrayXXd one_minus_t2 = 1.0 - ps.tanh_u.square();
    const Eigen::ArrayXXd d_u =
        d_action * scale * one_minus_t2 + (alpha / b) * 2.0 * ps.tanh_u;
    Eigen::MatrixXd upstream(2 * ad, b);
    upstream.topRows(ad) = d_u.matrix();
    Eigen::ArrayXXd d_log_std = d_u * ps.sigma * noise.array() + (alpha / b) * (-1.0);
    d_log_std =
        (ps.raw_log_std <= kLogStdMin || ps.raw_log_std >= kLogStdMax).select(0.0, d_log_std);
    upstream.bottomRows(ad) = d_log_std.matrix();

    BatchBackwardResult ag = backward_batch(agent.actor, actor_cache, upstream);
    return {loss, std::move(ag.grads)};
}

void soft_target_update(SacAgent& agent, double tau) {
    if (tau <= 0.0 || tau > 1.0) throw std::invalid_argument("tau must lie in (0,1]");
    for (int l = 0; l < agent.critic1.layer_count(); ++l) {
        agent.target1.weights[l] = (1.0 - tau) * agent.target1.weights[l] + tau * agent.critic1.weights[l];
        agent.target1.biases[l] = (1.0 - tau) * agent.target1.biases[l] + tau * agent.critic1.biases[l];
        agent.target2.weights[l] = (1.0 - tau) * agent.target2.weights[l] + tau * agent.critic2.weights[l];
        agent.target2.biases[l] = (1.0 - tau) * agent.target2.biases[l] + tau * agent.critic2.biases[l];
    }
}

std::pair<double, double> gradient_step(SacAgent& agent, const TransitionBatch& batch, Rng& rng) {
    const int b = static_cast<int>(batch.reward.size());
    if (b == 0) throw std::invalid_argument("empty batch");
    const int ad = agent.config.action_dim;

    const Eigen::MatrixXd next_noise = fill_gaussian(ad, b, rng);
    const Eigen::VectorXd targets = td_targets(agent, batch, next_noise);
    auto [critic_loss, critic_grads] = critic_loss_and_grads(agent, batch, targets);
    adam_step(agent.critic1, critic_grads.first, agent.critic1_opt);
    adam_step(agent.critic2, critic_grads.second, agent.critic2_opt);

    const Eigen::MatrixXd noise = fill_gaussian(ad, b, rng);
    auto [actor_loss, actor_grads] = actor_loss_and_grads(agent, batch, noise);
    adam_step(agent.actor, actor_grads, agent.actor_opt);

    soft_target_update(agent, agent.config.tau);
    return {critic_loss, actor_loss};
}

void save_agent(const SacAgent& agent, const std::string& path_prefix) {
    save_net(agent.actor, path_prefix + ".actor.nnc");
    save_net(agent.critic1, path_prefix + ".critic1.nnc");
    save_net(agent.critic2, path_prefix + ".critic2.nnc");
    save_net(agent.target1, path_prefix + ".target1.nnc");
    save_net(agent.target2, path_prefix + ".target2.nnc");
    nlohmann::json meta{{"latent_dim", agent.config.latent_dim},
                        {"action_dim", agent.config.action_dim},
                        {"action_scale", agent.config.action_scale},
                        {"gamma", agent.config.gamma},
                        {"tau", agent.config.tau},
                        {"alpha", agent.config.alpha},
                        {"actor_lr", agent.config.actor_lr},
                        {"critic_lr", agent.config.critic_lr},
                        {"batch_size", agent.config.batch_size},
                        {"f_future", agent.config.f_future},
                        {"f_prior", agent.config.f_prior}};
    std::ofstream out(path_prefix + ".json");
    if (!out) throw std::runtime_error("cannot write " + path_prefix + ".json");
    out << meta.dump() << "\n";
}

SacAgent load_agent(const std::string& path_prefix) {
    std::ifstream in(path_prefix + ".json");
    if (!in) throw std::runtime_error("cannot read " + path_prefix + ".json");
    nlohmann::json meta = nlohmann::json::parse(in);
    SacAgent agent;
    agent.actor = load_net(path_prefix + ".actor.nnc", Activation::Rectifier, Activation::Identity);
    agent.critic1 =
        load_net(path_prefix + ".critic1.nnc", Activation::Rectifier, Activation::Identity);
    agent.critic2 =
        load_net(path_prefix + ".critic2.nnc", Activation::Rectifier, Activation::Identity);
    agent.target1 =
        load_net(path_prefix + ".target1.nnc", Activation::Rectifier, Activation::Identity);
    agent.target2 =
        load_net(path_prefix + ".target2.nnc", Activation::Rectifier, Activation::Identity);
    agent.config.latent_dim = meta.at("latent_dim").get<int>();
    agent.config.action_dim = meta.at("action_dim").get<int>();
    agent.config.action_scale = meta.at("action_scale").get<double>();
    agent.config.gamma = meta.at("gamma").get<double>();
    agent.config.tau = meta.at("tau").get<double>();
    agent.config.alpha = meta.at("alpha").get<double>();
    agent.config.actor_lr = meta.at("actor_lr").get<double>();
    agent.config.critic_lr = meta.at("critic_lr").get<double>();
    agent.config.batch_size = meta.at("batch_size").get<int>();
    agent.config.f_future = meta.at("f_future").get<double>();
    agent.config.f_prior = meta.at("f_prior").get<double>();
    std::vector<int> hidden(agent.actor.layer_sizes.begin() + 1,
                            agent.actor.layer_sizes.end() - 1);
    agent.config.actor_hidden = hidden;
    agent.config.critic_hidden = std::vector<int>(agent.critic1.layer_sizes.begin() + 1,
                                                  agent.critic1.layer_sizes.end() - 1);
    agent.actor_opt = make_adam(agent.actor, agent.config.actor_lr);
    agent.critic1_opt = make_adam(agent.critic1, agent.config.critic_lr);
    agent.critic2_opt = make_adam(agent.critic2, agent.config.critic_lr);
    return agent;
}

}  // namespace elbotune
