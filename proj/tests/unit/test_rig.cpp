#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "elbotune/rig.hpp"

using namespace elbotune;

namespace {

RunConfig tiny_run_config() {
    RunConfig config;
    NavEnvConfig env;
    env.image_shape = ImageShape{3, 12, 12};
    env.max_path_length = 12;
    config.schedule = {{0, env}};
    config.vae.latent_dim = 3;
    config.vae.encoder_hidden = {24};
    config.vae.decoder_hidden = {24};
    config.vae.eval_batch = 48;
    config.agent.latent_dim = 3;
    config.agent.actor_hidden = {16, 16};
    config.agent.critic_hidden = {16, 16};
    config.agent.batch_size = 16;
    config.epochs = 1;
    config.pretrain_rollouts = 4;
    config.pretrain_steps = 60;
    config.finetune_steps = 15;
    config.eval_goals = 4;
    config.seed = 11;
    config.caps.n_explore = 12;
    config.caps.n_buffer = 4000;
    config.caps.n_grad = 12;
    return config;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("a one-epoch run completes and writes one metrics row") {
    RunConfig config = tiny_run_config();
    config.out_dir = "/tmp/elbotune_rig_smoke";
    std::vector<EpochMetrics> metrics = run(config);
    REQUIRE(metrics.size() == 1);
    CHECK(metrics[0].epoch == 0);
    CHECK(metrics[0].n_explore >= 1);
    CHECK(metrics[0].buffer_transitions >= 1);
    CHECK(std::isfinite(metrics[0].neg_beta_elbo));
    CHECK(metrics[0].eval_dist_mean > 0.0);

    const std::string csv = slurp("/tmp/elbotune_rig_smoke/metrics.csv");
    CHECK(csv.rfind("epoch,neg_beta_elbo,kl_term,recon_nll,n_e,n_b,n_theta,buffer_transitions,"
                    "eval_dist_mean,eval_dist_std,coverage,cum_env_steps,cum_grad_updates,"
                    "wall_clock_s\n",
                    0) == 0);
    int lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 2);

    std::ifstream cov("/tmp/elbotune_rig_smoke/coverage_epoch000.csv");
    CHECK(cov.good());
    std::string header;
    std::getline(cov, header);
    CHECK(header == "traj_id,step,x,y");
}

TEST_CASE("identical config and seed reproduce the metrics file byte for byte") {
    RunConfig config = tiny_run_config();
    config.epochs = 2;
    config.out_dir = "/tmp/elbotune_rig_det_a";
    run(config);
    config.out_dir = "/tmp/elbotune_rig_det_b";
    run(config);
    CHECK(slurp("/tmp/elbotune_rig_det_a/metrics.csv") ==
          slurp("/tmp/elbotune_rig_det_b/metrics.csv"));
    CHECK(slurp("/tmp/elbotune_rig_det_a/coverage_epoch001.csv") ==
          slurp("/tmp/elbotune_rig_det_b/coverage_epoch001.csv"));
}

TEST_CASE("phase accounting ties out across epochs") {
    RunConfig config = tiny_run_config();
    config.epochs = 3;
    std::vector<EpochMetrics> metrics = run(config);
    REQUIRE(metrics.size() == 3);

    const int l = config.schedule[0].config.max_path_length;
    std::int64_t expect_steps = static_cast<std::int64_t>(config.pretrain_rollouts) * l;
    std::int64_t expect_updates = 0;
    for (const EpochMetrics& m : metrics) {
        // auto mode coupling
        CHECK(m.n_grad == m.n_explore);
        CHECK(m.n_buffer == static_cast<std::int64_t>(l) * m.n_explore);
        CHECK(m.buffer_transitions <= m.n_buffer);

        expect_steps += static_cast<std::int64_t>(m.n_explore) * l;
        expect_updates += m.n_grad;
        CHECK(m.cum_env_steps == expect_steps);
        CHECK(m.cum_grad_updates == expect_updates);
    }
}

TEST_CASE("fixed mode repeats its triple every epoch") {
    RunConfig config = tiny_run_config();
    config.epochs = 3;
    config.mode = TuningMode::make_fixed(5, 200, 7);
    std::vector<EpochMetrics> metrics = run(config);
    for (const EpochMetrics& m : metrics) {
        CHECK(m.n_explore == 5);
        CHECK(m.n_buffer == 200);
        CHECK(m.n_grad == 7);
        CHECK(m.buffer_transitions <= 200);
    }
}

TEST_CASE("pretraining is deterministic and satisfies the elbo identity") {
    RunConfig config = tiny_run_config();
    Rng r1 = make_rng(config.seed, 0);
    Rng r2 = make_rng(config.seed, 0);
    PretrainResult a = pretrain_vae(config, r1);
    PretrainResult b = pretrain_vae(config, r2);
    CHECK(a.report.neg_beta_elbo == b.report.neg_beta_elbo);
    CHECK(a.env_steps == b.env_steps);
    CHECK(std::abs(a.report.neg_beta_elbo -
                   (a.model.beta * a.report.kl_term + a.report.recon_nll)) < 1e-9);
    for (int layer = 0; layer < a.model.encoder.layer_count(); ++layer)
        CHECK(a.model.encoder.weights[layer] == b.model.encoder.weights[layer]);
}

TEST_CASE("coverage area counts visited grid cells") {
    NavEnvConfig env;
    std::vector<std::vector<Eigen::Vector2d>> stationary{
        {Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.5, 0.5)}};
    CHECK(coverage_area(stationary, env) == doctest::Approx(1.0 / 400.0).epsilon(1e-12));

    std::vector<std::vector<Eigen::Vector2d>> everywhere(1);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j)
            everywhere[0].push_back(Eigen::Vector2d((i + 0.5) / 20.0, (j + 0.5) / 20.0));
    CHECK(coverage_area(everywhere, env) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("checkpoints appear at the requested interval") {
    RunConfig config = tiny_run_config();
    config.epochs = 2;
    config.checkpoint_interval = 1;
    config.out_dir = "/tmp/elbotune_rig_ckpt";
    run(config);
    for (const char* name :
         {"/tmp/elbotune_rig_ckpt/vae_final.enc.nnc", "/tmp/elbotune_rig_ckpt/vae_final.dec.nnc",
          "/tmp/elbotune_rig_ckpt/agent_final.actor.nnc",
          "/tmp/elbotune_rig_ckpt/vae_epoch000.enc.nnc",
          "/tmp/elbotune_rig_ckpt/vae_epoch001.enc.nnc"}) {
        std::ifstream in(name, std::ios::binary);
        CHECK(in.good());
    }
    VaeModel reloaded = load_vae("/tmp/elbotune_rig_ckpt/vae_final");
    CHECK(reloaded.image_shape == ImageShape{3, 12, 12});
    SacAgent agent = load_agent("/tmp/elbotune_rig_ckpt/agent_final");
    CHECK(agent.config.latent_dim == 3);
}

TEST_CASE("app config maps onto a run config") {
    AppConfig app;
    app.env.schedule_epochs = {0, 10};
    app.env.schedule_variants = {"no_wall", "multi_wall"};
    app.env.height = 12;
    app.env.width = 12;
    app.autotune.mode = "fixed";
    app.autotune.n_e = 9;
    app.autotune.n_b = 450;
    app.autotune.n_theta = 9;
    app.run.epochs = 5;
    app.run.seed = 123;
    RunConfig rc = make_run_config(app);
    REQUIRE(rc.schedule.size() == 2);
    CHECK(rc.schedule[0].epoch == 0);
    CHECK(rc.schedule[0].config.variant == NavVariant::NoWall);
    CHECK(rc.schedule[1].epoch == 10);
    CHECK(rc.schedule[1].config.variant == NavVariant::MultiWall);
    CHECK(rc.schedule[1].config.image_shape.height == 12);
    CHECK(!rc.mode.is_auto);
    CHECK(rc.mode.n_explore == 9);
    CHECK(rc.epochs == 5);
    CHECK(rc.seed == 123);
    CHECK(rc.agent.latent_dim == rc.vae.latent_dim);
}
