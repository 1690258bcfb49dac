#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/agent.hpp"
#include "elbotune/nn.hpp"
#include "elbotune/rng.hpp"

using namespace elbotune;

namespace {

SacConfig small_config() {
    SacConfig c;
    c.latent_dim = 3;
    c.action_dim = 2;
    c.actor_hidden = {8};
    c.critic_hidden = {8};
    c.batch_size = 4;
    return c;
}

TransitionBatch random_batch(const SacConfig& c, int size, Rng& rng) {
    TransitionBatch b;
    auto fill = [&rng](Eigen::MatrixXd& m, int rows, int cols, double scale) {
        m.resize(rows, cols);
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) m(i, j) = uniform(rng, -scale, scale);
    };
    fill(b.obs_latent, c.latent_dim, size, 1.5);
    fill(b.next_obs_latent, c.latent_dim, size, 1.5);
    fill(b.goal_latent, c.latent_dim, size, 1.5);
    fill(b.action, c.action_dim, size, c.action_scale);
    b.reward.resize(size);
    for (int i = 0; i < size; ++i) b.reward(i) = uniform(rng, -2.0, 0.0);
    return b;
}

int critic_param_count(const DenseNet& net) {
    int n = 0;
    for (int l = 0; l < net.layer_count(); ++l)
        n += static_cast<int>(net.weights[l].size() + net.biases[l].size());
    return n;
}

void nudge_net(DenseNet& net, int index, double delta) {
    int i = index;
    for (int l = 0; l < net.layer_count(); ++l) {
        if (i < net.weights[l].size()) {
            net.weights[l].data()[i] += delta;
            return;
        }
        i -= static_cast<int>(net.weights[l].size());
        if (i < net.biases[l].size()) {
            net.biases[l].data()[i] += delta;
            return;
        }
        i -= static_cast<int>(net.biases[l].size());
    }
    REQUIRE(false);
}

double net_grad_at(const NetGrads& grads, int index) {
    int i = index;
    for (std::size_t l = 0; l < grads.weights.size(); ++l) {
        if (i < grads.weights[l].size()) return grads.weights[l].data()[i];
        i -= static_cast<int>(grads.weights[l].size());
        if (i < grads.biases[l].size()) return grads.biases[l].data()[i];
        i -= static_cast<int>(grads.biases[l].size());
    }
    REQUIRE(false);
    return 0.0;
}

}  // namespace

TEST_CASE("latent reward closed forms and invariances") {
    Eigen::VectorXd z(2), g(2);
    z << 0.7, -0.3;
    CHECK(latent_reward(z, z) == 0.0);

    z << 1.0, 0.0;
    g << 0.0, 0.0;
    CHECK(latent_reward(z, g) == doctest::Approx(-1.0).epsilon(1e-12));

    z << 3.0, 4.0;
    CHECK(latent_reward(z, g) == doctest::Approx(-5.0).epsilon(1e-12));

    CHECK(latent_reward(z, g) == latent_reward(g, z));
    Eigen::VectorXd c = Eigen::VectorXd::Constant(2, 11.25);
    CHECK(latent_reward(z + c, g + c) == doctest::Approx(latent_reward(z, g)).epsilon(1e-12));
}

TEST_CASE("zero-parameter actor emits the zero action deterministically") {
    SacConfig config = small_config();
    Rng rng = make_rng(1);
    SacAgent agent = make_agent(config, rng);
    agent.actor = zero_net(agent.actor.layer_sizes, agent.actor.hidden_activation,
                           agent.actor.output_activation);
    Eigen::VectorXd z = Eigen::VectorXd::Ones(3);
    Eigen::VectorXd g = -Eigen::VectorXd::Ones(3);
    Eigen::VectorXd a = select_action(agent, z, g, true, rng);
    CHECK(a.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("actions stay within bounds over ten thousand fuzzed draws") {
    SacConfig config = small_config();
    Rng rng = make_rng(2);
    SacAgent agent = make_agent(config, rng);
    for (int i = 0; i < 10000; ++i) {
        Eigen::VectorXd z(3), g(3);
        for (int k = 0; k < 3; ++k) {
            z(k) = uniform(rng, -5.0, 5.0);
            g(k) = uniform(rng, -5.0, 5.0);
        }
        Eigen::VectorXd a = select_action(agent, z, g, i % 2 == 0, rng);
        CHECK(a.cwiseAbs().maxCoeff() <= config.action_scale);
    }
}

TEST_CASE("stochastic action selection is reproducible per seed") {
    SacConfig config = small_config();
    Rng init = make_rng(3);
    SacAgent agent = make_agent(config, init);
    Eigen::VectorXd z = Eigen::VectorXd::Constant(3, 0.2);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(3, -0.4);
    Rng r1 = make_rng(44);
    Rng r2 = make_rng(44);
    CHECK(select_action(agent, z, g, false, r1) == select_action(agent, z, g, false, r2));
}

TEST_CASE("soft target update closed forms") {
    SacConfig config = small_config();
    Rng rng = make_rng(4);
    SacAgent agent = make_agent(config, rng);

    SUBCASE("tau of one copies the online critics") {
        soft_target_update(agent, 1.0);
        for (int l = 0; l < agent.critic1.layer_count(); ++l) {
            CHECK(agent.target1.weights[l] == agent.critic1.weights[l]);
            CHECK(agent.target2.weights[l] == agent.critic2.weights[l]);
        }
    }
    SUBCASE("small tau blends geometrically from zero") {
        for (auto& w : agent.target1.weights) w.setZero();
        for (auto& b : agent.target1.biases) b.setZero();
        soft_target_update(agent, 0.005);
        for (int l = 0; l < agent.critic1.layer_count(); ++l) {
            CHECK((agent.target1.weights[l] - 0.005 * agent.critic1.weights[l])
                      .cwiseAbs()
                      .maxCoeff() < 1e-15);
        }
        // repeated updates with frozen online weights approach them geometrically
        for (int i = 0; i < 2000; ++i) soft_target_update(agent, 0.005);
        const double remaining = std::pow(1.0 - 0.005, 2001);
        for (int l = 0; l < agent.critic1.layer_count(); ++l) {
            Eigen::MatrixXd expect = (1.0 - remaining) * agent.critic1.weights[l];
            CHECK((agent.target1.weights[l] - expect).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("zero reward, zero discount, zero temperature gives mean-square critic loss") {
    SacConfig config = small_config();
    config.gamma = 0.0;
    config.alpha = 0.0;
    Rng rng = make_rng(5);
    SacAgent agent = make_agent(config, rng);
    TransitionBatch batch = random_batch(config, 16, rng);
    batch.reward.setZero();

    Eigen::MatrixXd noise(config.action_dim, 16);
    for (int c = 0; c < 16; ++c)
        for (int r = 0; r < config.action_dim; ++r) noise(r, c) = gaussian(rng);
    Eigen::VectorXd targets = td_targets(agent, batch, noise);
    CHECK(targets.cwiseAbs().maxCoeff() == 0.0);

    auto [loss, grads] = critic_loss_and_grads(agent, batch, targets);
    // direct Q evaluation oracle
    Eigen::MatrixXd input(config.latent_dim * 2 + config.action_dim, 16);
    input.topRows(config.latent_dim) = batch.obs_latent;
    input.middleRows(config.latent_dim, config.latent_dim) = batch.goal_latent;
    input.bottomRows(config.action_dim) = batch.action;
    Eigen::MatrixXd q1 = forward_batch(agent.critic1, input);
    Eigen::MatrixXd q2 = forward_batch(agent.critic2, input);
    const double expect =
        (q1.array().square().sum() + q2.array().square().sum()) / (2.0 * 16.0);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("critic gradients match finite differences with frozen targets") {
    SacConfig config = small_config();
    Rng rng = make_rng(6);
    SacAgent agent = make_agent(config, rng);
    TransitionBatch batch = random_batch(config, 6, rng);
    Eigen::MatrixXd noise(config.action_dim, 6);
    for (int c = 0; c < 6; ++c)
        for (int r = 0; r < config.action_dim; ++r) noise(r, c) = gaussian(rng);
    Eigen::VectorXd targets = td_targets(agent, batch, noise);
    auto [loss, grads] = critic_loss_and_grads(agent, batch, targets);

    const double h = 1e-5;
    double worst = 0.0;
    for (int which = 0; which < 2; ++which) {
        DenseNet& critic = which == 0 ? agent.critic1 : agent.critic2;
        const NetGrads& g = which == 0 ? grads.first : grads.second;
        const int n = critic_param_count(critic);
        for (int i = 0; i < n; ++i) {
            nudge_net(critic, i, h);
            const double lp = critic_loss_and_grads(agent, batch, targets).first;
            nudge_net(critic, i, -2.0 * h);
            const double lm = critic_loss_and_grads(agent, batch, targets).first;
            nudge_net(critic, i, h);
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = net_grad_at(g, i);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("actor gradients match finite differences with frozen noise") {
    SacConfig config = small_config();
    Rng rng = make_rng(7);
    SacAgent agent = make_agent(config, rng);
    TransitionBatch batch = random_batch(config, 5, rng);
    Eigen::MatrixXd noise(config.action_dim, 5);
    for (int c = 0; c < 5; ++c)
        for (int r = 0; r < config.action_dim; ++r) noise(r, c) = gaussian(rng);

    auto [loss, grads] = actor_loss_and_grads(agent, batch, noise);
    const double h = 1e-5;
    const int n = critic_param_count(agent.actor);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        nudge_net(agent.actor, i, h);
        const double lp = actor_loss_and_grads(agent, batch, noise).first;
        nudge_net(agent.actor, i, -2.0 * h);
        const double lm = actor_loss_and_grads(agent, batch, noise).first;
        nudge_net(agent.actor, i, h);
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = net_grad_at(grads, i);
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("identical agents, batches, and seeds update identically") {
    SacConfig config = small_config();
    Rng i1 = make_rng(8);
    Rng i2 = make_rng(8);
    SacAgent a = make_agent(config, i1);
    SacAgent b = make_agent(config, i2);
    Rng data_rng = make_rng(9);
    TransitionBatch batch = random_batch(config, 8, data_rng);
    Rng s1 = make_rng(10);
    Rng s2 = make_rng(10);
    auto [ca, aa] = gradient_step(a, batch, s1);
    auto [cb, ab] = gradient_step(b, batch, s2);
    CHECK(ca == cb);
    CHECK(aa == ab);
    for (int l = 0; l < a.actor.layer_count(); ++l) CHECK(a.actor.weights[l] == b.actor.weights[l]);
    for (int l = 0; l < a.critic1.layer_count(); ++l) {
        CHECK(a.critic1.weights[l] == b.critic1.weights[l]);
        CHECK(a.critic2.weights[l] == b.critic2.weights[l]);
        CHECK(a.target1.weights[l] == b.target1.weights[l]);
    }
}

TEST_CASE("q-values stay finite across ten thousand fuzzed gradient steps") {
    SacConfig config;
    config.latent_dim = 2;
    config.action_dim = 2;
    config.actor_hidden = {16};
    config.critic_hidden = {16};
    config.batch_size = 16;
    Rng rng = make_rng(11);
    SacAgent agent = make_agent(config, rng);
    for (int step = 0; step < 10000; ++step) {
        TransitionBatch batch = random_batch(config, 16, rng);
        auto [critic_loss, actor_loss] = gradient_step(agent, batch, rng);
        REQUIRE(std::isfinite(critic_loss));
        REQUIRE(std::isfinite(actor_loss));
    }
    Eigen::VectorXd input(config.latent_dim * 2 + config.action_dim);
    input.setConstant(0.3);
    CHECK(std::isfinite(forward(agent.critic1, input)(0)));
    CHECK(std::isfinite(forward(agent.critic2, input)(0)));
}

TEST_CASE("training tightens one-step goal reaching on a scalar toy problem") {
    SacConfig config;
    config.latent_dim = 1;
    config.action_dim = 1;
    config.actor_hidden = {32, 32};
    config.critic_hidden = {32, 32};
    config.batch_size = 64;
    config.action_scale = 0.15;
    Rng rng = make_rng(12);
    SacAgent agent = make_agent(config, rng);

    // dynamics: z' = z + a; goals drawn near the state so one step can reach them
    auto make_toy_batch = [&config](Rng& r) {
        TransitionBatch b;
        const int n = config.batch_size;
        b.obs_latent.resize(1, n);
        b.action.resize(1, n);
        b.next_obs_latent.resize(1, n);
        b.goal_latent.resize(1, n);
        b.reward.resize(n);
        for (int i = 0; i < n; ++i) {
            const double z = uniform(r, -1.0, 1.0);
            const double a = uniform(r, -config.action_scale, config.action_scale);
            const double next = z + a;
            const double goal = z + uniform(r, -0.2, 0.2);
            b.obs_latent(0, i) = z;
            b.action(0, i) = a;
            b.next_obs_latent(0, i) = next;
            b.goal_latent(0, i) = goal;
            b.reward(i) = -std::abs(next - goal);
        }
        return b;
    };

    auto eval_mean_reward = [&](Rng& r) {
        double sum = 0.0;
        const int n = 200;
        for (int i = 0; i < n; ++i) {
            const double z = uniform(r, -1.0, 1.0);
            const double goal = z + uniform(r, -0.12, 0.12);
            Eigen::VectorXd zs(1), zg(1);
            zs << z;
            zg << goal;
            Eigen::VectorXd a = select_action(agent, zs, zg, true, r);
            sum += -std::abs(z + a(0) - goal);
        }
        return sum / n;
    };

    Rng eval_rng1 = make_rng(13);
    const double before = eval_mean_reward(eval_rng1);
    Rng train_rng = make_rng(14);
    for (int step = 0; step < 3000; ++step) {
        TransitionBatch batch = make_toy_batch(train_rng);
        gradient_step(agent, batch, train_rng);
    }
    Rng eval_rng2 = make_rng(13);
    const double after = eval_mean_reward(eval_rng2);
    CHECK(after > before);
    CHECK(after > -0.06);  // most goals nearly reached in one step
}

TEST_CASE("agent checkpoint round-trip preserves behavior") {
    SacConfig config = small_config();
    Rng rng = make_rng(15);
    SacAgent agent = make_agent(config, rng);
    const std::string prefix = "/tmp/elbotune_agent_roundtrip";
    save_agent(agent, prefix);
    SacAgent loaded = load_agent(prefix);
    for (const char* suffix : {".actor.nnc", ".critic1.nnc", ".critic2.nnc", ".target1.nnc",
                               ".target2.nnc", ".json"})
        std::remove((prefix + suffix).c_str());
    CHECK(loaded.config.latent_dim == config.latent_dim);
    CHECK(loaded.config.action_scale == config.action_scale);
    Eigen::VectorXd z = Eigen::VectorXd::Constant(3, 0.5);
    Eigen::VectorXd g = Eigen::VectorXd::Constant(3, -0.5);
    Rng r1 = make_rng(16);
    Rng r2 = make_rng(16);
    CHECK(select_action(agent, z, g, true, r1) == select_action(loaded, z, g, true, r2));
}
