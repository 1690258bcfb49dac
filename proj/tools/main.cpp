#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elbotune/config.hpp"
#include "elbotune/diversity.hpp"
#include "elbotune/rig.hpp"
#include "elbotune/search.hpp"

namespace {

using namespace elbotune;

AppConfig load_app_config(const std::string& path) {
    if (path.empty()) return AppConfig{};
    return parse_config(path);
}

int cmd_train(const std::string& config_path, std::int64_t seed, const std::string& out,
              const std::string& mode, double xi, int ne, std::int64_t nb, int ntheta) {
    AppConfig app = load_app_config(config_path);
    if (seed >= 0) app.run.seed = seed;
    if (!out.empty()) app.run.out_dir = out;
    if (!mode.empty()) {
        if (mode != "auto" && mode != "fixed") throw ConfigError("--mode: must be auto or fixed");
        app.autotune.mode = mode;
    }
    if (xi > 0.0) app.autotune.xi = xi;
    if (ne > 0) app.autotune.n_e = ne;
    if (nb > 0) app.autotune.n_b = nb;
    if (ntheta > 0) app.autotune.n_theta = ntheta;

    const RunConfig rc = make_run_config(app);
    const std::vector<EpochMetrics> metrics = run(rc);
    const EpochMetrics& last = metrics.back();
    std::printf("epochs=%zu final_eval_dist=%.6f final_neg_beta_elbo=%.4f coverage=%.4f\n",
                metrics.size(), last.eval_dist_mean, last.neg_beta_elbo, last.coverage);
    std::printf("wrote %s/metrics.csv\n", rc.out_dir.c_str());
    return 0;
}

int cmd_diversity(const std::string& config_path, const std::string& out) {
    AppConfig app = load_app_config(config_path);
    if (!out.empty()) app.run.out_dir = out;

    DiversityLabConfig lab;
    lab.latent_dim = app.vae.latent_dim;
    lab.beta = app.vae.beta;
    lab.encoder_hidden.assign(app.vae.encoder_hidden.begin(), app.vae.encoder_hidden.end());
    lab.decoder_hidden.assign(app.vae.decoder_hidden.begin(), app.vae.decoder_hidden.end());
    lab.learning_rate = app.vae.learning_rate;
    lab.batch_size = app.vae.batch_size;
    lab.steps_per_epoch = app.vae.steps_per_epoch;
    lab.per_class = app.vae.per_class;
    lab.noise_prob = app.vae.noise_prob;
    lab.mc_samples = app.vae.mc_samples;

    // add-then-remove class-count ladder
    const int counts[] = {2, 4, 8, 16, 8, 4, 2};
    DiversitySchedule schedule;
    int epoch = 0;
    for (int k : counts) {
        std::vector<int> classes(k);
        for (int c = 0; c < k; ++c) classes[c] = c;
        schedule.stages.push_back({epoch, classes});
        epoch += app.vae.epochs_per_stage;
    }
    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < app.vae.diversity_seeds; ++s)
        seeds.push_back(derive_seed(static_cast<std::uint64_t>(app.run.seed), 7000 + s));

    const std::vector<DiversityResult> rows =
        run_diversity_experiment(schedule, lab, app.vae.epochs_per_stage, seeds);
    std::filesystem::create_directories(app.run.out_dir);
    const std::string path = app.run.out_dir + "/diversity.csv";
    write_diversity_csv(rows, path);
    std::printf("wrote %s (%zu rows)\n", path.c_str(), rows.size());
    return 0;
}

int cmd_search(const std::string& config_path, int trials, const std::string& mode, int workers,
               const std::string& out) {
    AppConfig app = load_app_config(config_path);
    if (!out.empty()) app.run.out_dir = out;
    if (trials > 0) app.search.trials = trials;
    if (!mode.empty()) {
        if (mode != "auto" && mode != "fixed") throw ConfigError("--mode: must be auto or fixed");
        app.search.mode = mode;
    }
    if (workers > 0) app.search.workers = workers;

    RunConfig base = make_run_config(app);
    base.out_dir = "";  // per-trial dirs are assigned by the search driver
    const SearchSpace space = make_search_space(app, app.search.mode);
    const std::vector<TrialResult> results = random_search(
        space, app.search.trials, base, static_cast<std::uint64_t>(app.run.seed),
        app.search.workers, app.search.objective_window, app.run.out_dir);
    const TrialResult& best = results.front();
    std::printf("best trial=%d mode=%s xi=%.4f n_e=%d n_b=%lld n_theta=%d objective=%.6f\n",
                best.trial, best.mode.c_str(), best.xi, best.n_explore,
                static_cast<long long>(best.n_buffer), best.n_grad, best.objective);
    std::printf("wrote %s/search_summary.csv\n", app.run.out_dir.c_str());
    return 0;
}

int cmd_baselines(const std::string& config_path, const std::string& out) {
    AppConfig app = load_app_config(config_path);
    if (!out.empty()) app.run.out_dir = out;
    RunConfig base = make_run_config(app);
    base.out_dir = "";
    const SearchSpace space = make_search_space(app, "fixed");
    const std::vector<TrialResult> results =
        run_baselines(space, base, static_cast<std::uint64_t>(app.run.seed),
                      app.search.objective_window, app.run.out_dir);
    for (const TrialResult& r : results)
        std::printf("%s: n_e=%d n_b=%lld n_theta=%d objective=%.6f\n", r.mode.c_str(),
                    r.n_explore, static_cast<long long>(r.n_buffer), r.n_grad, r.objective);
    std::printf("wrote %s/baselines_summary.csv\n", app.run.out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Self-tuning goal-conditioned RL driven by the VAE's training loss"};
    cli.require_subcommand(1);

    std::string config_path, out, mode;
    std::int64_t seed = -1;
    double xi = 0.0;
    int ne = 0, ntheta = 0, trials = 0, workers = 0;
    std::int64_t nb = 0;

    CLI::App* train = cli.add_subcommand("train", "Run one training loop");
    train->add_option("--config", config_path, "TOML config file");
    train->add_option("--seed", seed, "Run seed (overrides config)");
    train->add_option("--out", out, "Output directory (overrides config)");
    train->add_option("--mode", mode, "auto or fixed (overrides config)");
    train->add_option("--xi", xi, "Scaling factor for auto mode");
    train->add_option("--ne", ne, "Exploration episodes per epoch (fixed mode)");
    train->add_option("--nb", nb, "Replay capacity in transitions (fixed mode)");
    train->add_option("--ntheta", ntheta, "Gradient updates per epoch (fixed mode)");

    CLI::App* diversity = cli.add_subcommand("diversity", "Run the dataset-diversity experiment");
    diversity->add_option("--config", config_path, "TOML config file");
    diversity->add_option("--out", out, "Output directory");

    CLI::App* search = cli.add_subcommand("search", "Random hyperparameter search");
    search->add_option("--config", config_path, "TOML config file");
    search->add_option("--trials", trials, "Number of trials");
    search->add_option("--mode", mode, "auto or fixed");
    search->add_option("--workers", workers, "Concurrent trials");
    search->add_option("--out", out, "Output directory");

    CLI::App* baselines = cli.add_subcommand("baselines", "Run the three starved baselines");
    baselines->add_option("--config", config_path, "TOML config file");
    baselines->add_option("--out", out, "Output directory");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cli.got_subcommand(train))
            return cmd_train(config_path, seed, out, mode, xi, ne, nb, ntheta);
        if (cli.got_subcommand(diversity)) return cmd_diversity(config_path, out);
        if (cli.got_subcommand(search))
            return cmd_search(config_path, trials, mode, workers, out);
        if (cli.got_subcommand(baselines)) return cmd_baselines(config_path, out);
    } catch (const elbotune::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
