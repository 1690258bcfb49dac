#include "elbotune/rig.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace elbotune {

namespace {

std::vector<int> to_int_vec(const std::vector<std::int64_t>& v) {
    std::vector<int> out;
    out.reserve(v.size());
    for (std::int64_t x : v) out.push_back(static_cast<int>(x));
    return out;
}

NavEnvConfig env_from_section(const EnvSection& e, const std::string& variant) {
    NavEnvConfig env;
    env.variant = parse_variant(variant);
    env.image_shape = ImageShape{3, e.height, e.width};
    env.workspace_scale = e.workspace_scale;
    env.max_path_length = e.max_path_length;
    env.wall_set_size = e.wall_set_size;
    env.action_scale = e.action_scale;
    return env;
}

Eigen::VectorXd prior_sample(int d, Rng& rng) {
    Eigen::VectorXd z(d);
    for (int i = 0; i < d; ++i) z[i] = gaussian(rng);
    return z;
}

// Uniform sample of stored observation images, as a column matrix.
Eigen::MatrixXd sample_buffer_images(const EpisodeBuffer& buffer, int count, Rng& rng) {
    const auto& episodes = buffer.episodes();
    const std::int64_t total = buffer.total_transitions();
    Eigen::MatrixXd out(episodes.front().front().obs_image.pixels.size(), count);
    for (int c = 0; c < count; ++c) {
        std::int64_t pick = uniform_int(rng, 0, total - 1);
        std::size_t ep = 0;
        while (pick >= static_cast<std::int64_t>(episodes[ep].size())) {
            pick -= static_cast<std::int64_t>(episodes[ep].size());
            ++ep;
        }
        out.col(c) = episodes[ep][static_cast<std::size_t>(pick)].obs_image.pixels;
    }
    return out;
}

}  // namespace

RunConfig make_run_config(const AppConfig& app) {
    RunConfig rc;
    if (app.env.schedule_epochs.empty()) {
        rc.schedule.push_back({0, env_from_section(app.env, app.env.variant)});
    } else {
        for (std::size_t i = 0; i < app.env.schedule_epochs.size(); ++i)
            rc.schedule.push_back({static_cast<int>(app.env.schedule_epochs[i]),
                                   env_from_section(app.env, app.env.schedule_variants[i])});
    }
    rc.mode = app.autotune.mode == "auto"
                  ? TuningMode::make_auto(app.autotune.xi)
                  : TuningMode::make_fixed(app.autotune.n_e, app.autotune.n_b,
                                           app.autotune.n_theta);
    rc.caps = AutotuneCaps{app.autotune.cap_n_e, app.autotune.cap_n_b, app.autotune.cap_n_theta};
    rc.vae.latent_dim = app.vae.latent_dim;
    rc.vae.beta = app.vae.beta;
    rc.vae.encoder_hidden = to_int_vec(app.vae.encoder_hidden);
    rc.vae.decoder_hidden = to_int_vec(app.vae.decoder_hidden);
    rc.vae.learning_rate = app.vae.learning_rate;
    rc.vae.batch_size = app.vae.batch_size;
    rc.vae.mc_samples = app.vae.mc_samples;
    rc.vae.eval_batch = app.vae.eval_batch;
    rc.agent.latent_dim = app.vae.latent_dim;
    rc.agent.action_dim = 2;
    rc.agent.action_scale = app.env.action_scale;
    rc.agent.actor_hidden = to_int_vec(app.agent.actor_hidden);
    rc.agent.critic_hidden = to_int_vec(app.agent.critic_hidden);
    rc.agent.gamma = app.agent.gamma;
    rc.agent.tau = app.agent.tau;
    rc.agent.alpha = app.agent.alpha;
    rc.agent.actor_lr = app.agent.actor_lr;
    rc.agent.critic_lr = app.agent.critic_lr;
    rc.agent.batch_size = app.agent.batch_size;
    rc.agent.f_future = app.agent.f_future;
    rc.agent.f_prior = app.agent.f_prior;
    rc.epochs = app.run.epochs;
    rc.pretrain_rollouts = app.run.pretrain_rollouts;
    rc.pretrain_steps = app.run.pretrain_steps;
    rc.finetune_steps = app.run.finetune_steps;
    rc.finetune_interval = app.run.finetune_interval;
    rc.eval_goals = app.run.eval_goals;
    rc.checkpoint_interval = app.run.checkpoint_interval;
    rc.seed = static_cast<std::uint64_t>(app.run.seed);
    rc.out_dir = app.run.out_dir;
    return rc;
}

PretrainResult pretrain_vae(const RunConfig& config, Rng& rng) {
    if (config.pretrain_rollouts < 1)
        throw std::invalid_argument("pretrain_rollouts must be >= 1");
    const NavEnvConfig& env = config.schedule.front().config;
    const int l = env.max_path_length;
    const int n_images = config.pretrain_rollouts * (l + 1);
    Eigen::MatrixXd dataset(env.image_shape.size(), n_images);
    int col = 0;
    for (int r = 0; r < config.pretrain_rollouts; ++r) {
        auto [state, obs] = reset(env, rng);
        dataset.col(col++) = obs.pixels;
        for (int t = 0; t < l; ++t) {
            const Eigen::Vector2d action{uniform(rng, -env.action_scale, env.action_scale),
                                         uniform(rng, -env.action_scale, env.action_scale)};
            auto [next_state, next_obs] = step(env, state, action);
            state = next_state;
            dataset.col(col++) = next_obs.pixels;
        }
    }
    PretrainResult result;
    result.model = make_vae(env.image_shape, config.vae.latent_dim, config.vae.beta,
                            config.vae.encoder_hidden, config.vae.decoder_hidden, rng);
    result.optimizer = make_vae_optimizer(result.model, config.vae.learning_rate);
    fit(result.model, dataset, config.pretrain_steps, config.vae.batch_size, result.optimizer,
        rng);
    const int eval_n = std::min(config.vae.eval_batch, n_images);
    Eigen::MatrixXd eval_batch(dataset.rows(), eval_n);
    for (int c = 0; c < eval_n; ++c)
        eval_batch.col(c) = dataset.col(uniform_int(rng, 0, n_images - 1));
    result.report = evaluate_elbo(result.model, eval_batch, config.vae.mc_samples, rng);
    result.env_steps = static_cast<std::int64_t>(config.pretrain_rollouts) * l;
    return result;
}

RunState init_run(const RunConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (config.schedule.empty()) throw std::invalid_argument("empty environment schedule");
    RunState state;
    state.config = config;
    Rng pretrain_rng = make_rng(derive_seed(config.seed, 0));
    PretrainResult pre = pretrain_vae(config, pretrain_rng);
    state.vae = std::move(pre.model);
    state.vae_opt = std::move(pre.optimizer);
    state.last_elbo = pre.report;
    state.cum_env_steps = pre.env_steps;

    Rng agent_rng = make_rng(derive_seed(config.seed, 1));
    state.agent = make_agent(config.agent, agent_rng);
    state.buffer = EpisodeBuffer{1};
    state.explore_rng = make_rng(derive_seed(config.seed, 2));
    state.agent_rng = make_rng(derive_seed(config.seed, 3));
    state.eval_rng = make_rng(derive_seed(config.seed, 4));
    state.vae_rng = make_rng(derive_seed(config.seed, 5));
    return state;
}

double coverage_area(const std::vector<std::vector<Eigen::Vector2d>>& trajectories,
                     const NavEnvConfig& env) {
    if (trajectories.empty()) throw std::invalid_argument("no trajectories");
    constexpr int kGrid = 20;
    const double lo = workspace_lo(env);
    const double span = env.workspace_scale;
    std::vector<bool> visited(kGrid * kGrid, false);
    for (const auto& traj : trajectories)
        for (const Eigen::Vector2d& p : traj) {
            const int gx = std::clamp(static_cast<int>((p.x() - lo) / span * kGrid), 0, kGrid - 1);
            const int gy = std::clamp(static_cast<int>((p.y() - lo) / span * kGrid), 0, kGrid - 1);
            visited[gy * kGrid + gx] = true;
        }
    const auto count = std::count(visited.begin(), visited.end(), true);
    return static_cast<double>(count) / (kGrid * kGrid);
}

EpochMetrics run_epoch(RunState& state, int epoch_index) {
    const auto start_time = std::chrono::steady_clock::now();
    const RunConfig& config = state.config;
    const NavEnvConfig& env = curriculum_advance(config.schedule, epoch_index);
    const int l = env.max_path_length;
    const int d_z = config.vae.latent_dim;

    const AutotuneSettings settings = resolve(config.mode, state.last_elbo, l, config.caps);
    state.buffer.resize(settings.n_buffer);

    // exploration: lockstep rollouts toward prior-sampled latent goals
    const int n_e = settings.n_explore;
    std::vector<NavState> env_states(n_e);
    std::vector<Image> obs(n_e);
    Eigen::MatrixXd goals(d_z, n_e);
    for (int e = 0; e < n_e; ++e) {
        auto [s, o] = reset(env, state.explore_rng);
        env_states[e] = std::move(s);
        obs[e] = std::move(o);
        goals.col(e) = prior_sample(d_z, state.explore_rng);
    }
    std::vector<std::vector<Transition>> episodes(n_e);
    Eigen::MatrixXd obs_pixels(env.image_shape.size(), n_e);
    for (int e = 0; e < n_e; ++e) obs_pixels.col(e) = obs[e].pixels;
    Eigen::MatrixXd z_current = encode_means_batch(state.vae, obs_pixels);
    for (int t = 0; t < l; ++t) {
        const Eigen::MatrixXd actions =
            select_actions_batch(state.agent, z_current, goals, false, state.explore_rng);
        std::vector<Image> next_obs(n_e);
        Eigen::MatrixXd next_pixels(env.image_shape.size(), n_e);
        for (int e = 0; e < n_e; ++e) {
            auto [next_state, next_image] = step(env, env_states[e], actions.col(e));
            env_states[e] = std::move(next_state);
            next_obs[e] = std::move(next_image);
            next_pixels.col(e) = next_obs[e].pixels;
        }
        const Eigen::MatrixXd z_next = encode_means_batch(state.vae, next_pixels);
        for (int e = 0; e < n_e; ++e) {
            Transition tr;
            tr.obs_image = std::move(obs[e]);
            tr.next_obs_image = next_obs[e];
            tr.obs_latent = z_current.col(e);
            tr.next_obs_latent = z_next.col(e);
            tr.action = actions.col(e);
            tr.goal_latent = goals.col(e);
            episodes[e].push_back(std::move(tr));
        }
        obs = std::move(next_obs);
        z_current = z_next;
    }
    for (int e = 0; e < n_e; ++e) state.buffer.push_episode(std::move(episodes[e]));
    state.cum_env_steps += static_cast<std::int64_t>(n_e) * l;

    // policy updates
    for (int k = 0; k < settings.n_grad; ++k) {
        const TransitionBatch batch =
            state.buffer.sample_batch(config.agent.batch_size, config.agent.f_future,
                                      config.agent.f_prior, state.agent_rng);
        gradient_step(state.agent, batch, state.agent_rng);
    }
    state.cum_grad_updates += settings.n_grad;

    // evaluation with fresh goal images and the deterministic policy
    const int n_eval = config.eval_goals;
    std::vector<NavState> eval_states(n_eval);
    std::vector<Image> eval_obs(n_eval);
    std::vector<Image> goal_images(n_eval);
    Eigen::MatrixXd goal_pixels(env.image_shape.size(), n_eval);
    std::vector<std::vector<Eigen::Vector2d>> trajectories(n_eval);
    for (int g = 0; g < n_eval; ++g) {
        auto [s, o] = reset(env, state.eval_rng);
        eval_states[g] = std::move(s);
        eval_obs[g] = std::move(o);
        auto [goal_img, goal_pos] = sample_eval_goal(env, eval_states[g], state.eval_rng);
        goal_images[g] = std::move(goal_img);
        goal_pixels.col(g) = goal_images[g].pixels;
        trajectories[g].push_back(eval_states[g].position);
    }
    const Eigen::MatrixXd goal_latents = encode_means_batch(state.vae, goal_pixels);
    Eigen::MatrixXd eval_pixels(env.image_shape.size(), n_eval);
    for (int g = 0; g < n_eval; ++g) eval_pixels.col(g) = eval_obs[g].pixels;
    Eigen::MatrixXd z_eval = encode_means_batch(state.vae, eval_pixels);
    for (int t = 0; t < l; ++t) {
        const Eigen::MatrixXd actions =
            select_actions_batch(state.agent, z_eval, goal_latents, true, state.eval_rng);
        for (int g = 0; g < n_eval; ++g) {
            auto [next_state, next_image] = step(env, eval_states[g], actions.col(g));
            eval_states[g] = std::move(next_state);
            eval_obs[g] = std::move(next_image);
            eval_pixels.col(g) = eval_obs[g].pixels;
            trajectories[g].push_back(eval_states[g].position);
        }
        z_eval = encode_means_batch(state.vae, eval_pixels);
    }
    double dist_sum = 0.0, dist_sq_sum = 0.0;
    for (int g = 0; g < n_eval; ++g) {
        const double d = image_distance(eval_obs[g], goal_images[g]);
        dist_sum += d;
        dist_sq_sum += d * d;
    }
    const double dist_mean = dist_sum / n_eval;
    const double dist_var = std::max(0.0, dist_sq_sum / n_eval - dist_mean * dist_mean);

    // VAE fine-tuning on buffer images, then latent refresh
    if (config.finetune_steps > 0 && epoch_index % config.finetune_interval == 0) {
        for (int k = 0; k < config.finetune_steps; ++k) {
            const Eigen::MatrixXd batch =
                sample_buffer_images(state.buffer, config.vae.batch_size, state.vae_rng);
            auto [report, grads] = beta_elbo_loss_and_grads(state.vae, batch, state.vae_rng);
            adam_step(state.vae.encoder, grads.encoder, state.vae_opt.encoder);
            adam_step(state.vae.decoder, grads.decoder, state.vae_opt.decoder);
        }
        state.buffer.refresh_latents(state.vae);
    }
    const int eval_n =
        static_cast<int>(std::min<std::int64_t>(config.vae.eval_batch,
                                                state.buffer.total_transitions()));
    const Eigen::MatrixXd elbo_batch = sample_buffer_images(state.buffer, eval_n, state.vae_rng);
    state.last_elbo = evaluate_elbo(state.vae, elbo_batch, config.vae.mc_samples, state.vae_rng);

    EpochMetrics m;
    m.epoch = epoch_index;
    m.neg_beta_elbo = state.last_elbo.neg_beta_elbo;
    m.kl_term = state.last_elbo.kl_term;
    m.recon_nll = state.last_elbo.recon_nll;
    m.n_explore = settings.n_explore;
    m.n_buffer = settings.n_buffer;
    m.n_grad = settings.n_grad;
    m.buffer_transitions = state.buffer.total_transitions();
    m.eval_dist_mean = dist_mean;
    m.eval_dist_std = std::sqrt(dist_var);
    m.coverage = coverage_area(trajectories, env);
    m.cum_env_steps = state.cum_env_steps;
    m.cum_grad_updates = state.cum_grad_updates;
    m.eval_trajectories = std::move(trajectories);
    m.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
    return m;
}

namespace {

void append_row(std::string& out, const EpochMetrics& m, bool real_time) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%d,%.9f,%.9f,%.9f,%d,%lld,%d,%lld,%.9f,%.9f,%.6f,%lld,%lld,%.3f\n", m.epoch,
                  m.neg_beta_elbo, m.kl_term, m.recon_nll, m.n_explore,
                  static_cast<long long>(m.n_buffer), m.n_grad,
                  static_cast<long long>(m.buffer_transitions), m.eval_dist_mean, m.eval_dist_std,
                  m.coverage, static_cast<long long>(m.cum_env_steps),
                  static_cast<long long>(m.cum_grad_updates), real_time ? m.wall_clock_s : 0.0);
    out += buf;
}

}  // namespace

void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::string out =
        "epoch,neg_beta_elbo,kl_term,recon_nll,n_e,n_b,n_theta,buffer_transitions,"
        "eval_dist_mean,eval_dist_std,coverage,cum_env_steps,cum_grad_updates,wall_clock_s\n";
    for (const EpochMetrics& m : metrics) append_row(out, m, false);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << out;
}

void write_timing_csv(const std::vector<EpochMetrics>& metrics, const std::string& path) {
    std::string out = "epoch,wall_clock_s\n";
    for (const EpochMetrics& m : metrics) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%d,%.3f\n", m.epoch, m.wall_clock_s);
        out += buf;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << out;
}

void write_coverage_csv(const EpochMetrics& metrics, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "traj_id,step,x,y\n";
    for (std::size_t id = 0; id < metrics.eval_trajectories.size(); ++id) {
        const auto& traj = metrics.eval_trajectories[id];
        for (std::size_t s = 0; s < traj.size(); ++s) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9f,%.9f\n", id, s, traj[s].x(),
                          traj[s].y());
            f << buf;
        }
    }
}

std::vector<EpochMetrics> run(const RunConfig& config) {
    RunState state = init_run(config);
    const bool writing = !config.out_dir.empty();
    if (writing) std::filesystem::create_directories(config.out_dir);
    std::vector<EpochMetrics> metrics;
    metrics.reserve(config.epochs);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        metrics.push_back(run_epoch(state, epoch));
        if (writing) {
            char name[64];
            std::snprintf(name, sizeof(name), "coverage_epoch%03d.csv", epoch);
            write_coverage_csv(metrics.back(), config.out_dir + "/" + name);
            if (config.checkpoint_interval > 0 &&
                (epoch + 1) % config.checkpoint_interval == 0) {
                char stem[32];
                std::snprintf(stem, sizeof(stem), "epoch%03d", epoch);
                save_vae(state.vae, config.out_dir + "/vae_" + stem);
                save_agent(state.agent, config.out_dir + "/agent_" + stem);
            }
        }
    }
    if (writing) {
        write_metrics_csv(metrics, config.out_dir + "/metrics.csv");
        write_timing_csv(metrics, config.out_dir + "/timing.csv");
        save_vae(state.vae, config.out_dir + "/vae_final");
        save_agent(state.agent, config.out_dir + "/agent_final");
    }
    return metrics;
}

}  // namespace elbotune
