#include "elbotune/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace elbotune {

SearchSpace make_search_space(const AppConfig& app, const std::string& mode) {
    SearchSpace space;
    space.auto_mode = mode == "auto";
    space.xi_min = app.search.xi_min;
    space.xi_max = app.search.xi_max;
    space.ne_min = app.search.ne_min;
    space.ne_max = app.search.ne_max;
    space.nb_min = app.search.nb_min;
    space.nb_max = app.search.nb_max;
    space.ntheta_min = app.search.ntheta_min;
    space.ntheta_max = app.search.ntheta_max;
    return space;
}

namespace {

double objective_from_metrics(const std::vector<EpochMetrics>& metrics, int window) {
    const int n = static_cast<int>(metrics.size());
    const int w = std::min(window, n);
    double sum = 0.0;
    for (int i = n - w; i < n; ++i) sum += metrics[i].eval_dist_mean;
    return sum / w;
}

TrialResult run_trial(const RunConfig& trial_config, int trial_index, const std::string& mode,
                      double xi, int objective_window) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<EpochMetrics> metrics = run(trial_config);
    TrialResult r;
    r.trial = trial_index;
    r.mode = mode;
    r.xi = xi;
    if (mode == "auto") {
        // final epoch's resolved settings
        r.n_explore = metrics.back().n_explore;
        r.n_buffer = metrics.back().n_buffer;
        r.n_grad = metrics.back().n_grad;
    } else {
        r.n_explore = trial_config.mode.n_explore;
        r.n_buffer = trial_config.mode.n_buffer;
        r.n_grad = trial_config.mode.n_grad;
    }
    r.objective = objective_from_metrics(metrics, objective_window);
    r.cum_env_steps = metrics.back().cum_env_steps;
    r.cum_grad_updates = metrics.back().cum_grad_updates;
    for (const EpochMetrics& m : metrics)
        r.peak_buffer = std::max(r.peak_buffer, m.buffer_transitions);
    r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string trial_dir(const std::string& out_dir, const std::string& mode, int index) {
    if (out_dir.empty()) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "trial_%s_%03d", mode.c_str(), index);
    return out_dir + "/" + buf;
}

}  // namespace

std::vector<TrialResult> random_search(const SearchSpace& space, int n_trials,
                                       const RunConfig& base, std::uint64_t search_seed,
                                       int workers, int objective_window,
                                       const std::string& out_dir) {
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    const std::string mode = space.auto_mode ? "auto" : "fixed";

    // Sample every trial's configuration up front from per-trial streams, so
    // worker count and completion order cannot change what gets run.
    std::vector<RunConfig> configs(n_trials, base);
    std::vector<double> xis(n_trials, 0.0);
    for (int i = 0; i < n_trials; ++i) {
        RunConfig& rc = configs[i];
        // paired run seed per trial index, shared across auto and fixed modes
        rc.seed = derive_seed(search_seed, 1000 + i);
        rc.out_dir = trial_dir(out_dir, mode, i);
        if (space.auto_mode) {
            Rng rng = make_rng(derive_seed(search_seed, 3000 + i));
            xis[i] = uniform(rng, space.xi_min, space.xi_max);
            rc.mode = TuningMode::make_auto(xis[i]);
        } else {
            Rng rng = make_rng(derive_seed(search_seed, 4000 + i));
            const int ne = uniform_int(rng, space.ne_min, space.ne_max);
            const double log_nb = uniform(rng, std::log(static_cast<double>(space.nb_min)),
                                          std::log(static_cast<double>(space.nb_max)));
            const std::int64_t nb =
                std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(std::exp(log_nb))),
                                         space.nb_min, space.nb_max);
            const int ntheta = uniform_int(rng, space.ntheta_min, space.ntheta_max);
            rc.mode = TuningMode::make_fixed(ne, nb, ntheta);
        }
    }

    std::vector<TrialResult> results(n_trials);
    std::atomic<int> next{0};
    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n_trials) return;
            results[i] = run_trial(configs[i], i, mode, xis[i], objective_window);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min(workers, n_trials); ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    std::sort(results.begin(), results.end(),
              [](const TrialResult& a, const TrialResult& b) { return a.objective < b.objective; });
    if (!out_dir.empty()) {
        write_search_csv(results, out_dir + "/search_summary.csv");
        write_search_timing_csv(results, out_dir + "/search_timing.csv");
    }
    return results;
}

std::vector<TrialResult> run_baselines(const SearchSpace& space, const RunConfig& base,
                                       std::uint64_t search_seed, int objective_window,
                                       const std::string& out_dir) {
    struct Starved {
        const char* name;
        int ne;
        std::int64_t nb;
        int ntheta;
    };
    const Starved triples[3] = {
        {"limited_explore", space.ne_min, space.nb_max, space.ntheta_max},
        {"limited_buffer", space.ne_max, space.nb_min, space.ntheta_max},
        {"limited_updates", space.ne_max, space.nb_max, space.ntheta_min},
    };
    std::vector<TrialResult> results;
    for (int i = 0; i < 3; ++i) {
        RunConfig rc = base;
        rc.seed = derive_seed(search_seed, 1000 + i);
        rc.mode = TuningMode::make_fixed(triples[i].ne, triples[i].nb, triples[i].ntheta);
        if (!out_dir.empty()) rc.out_dir = out_dir + "/" + triples[i].name;
        results.push_back(run_trial(rc, i, triples[i].name, 0.0, objective_window));
    }
    if (!out_dir.empty()) {
        write_search_csv(results, out_dir + "/baselines_summary.csv");
        write_search_timing_csv(results, out_dir + "/baselines_timing.csv");
    }
    return results;
}

void write_search_csv(const std::vector<TrialResult>& results, const std::string& path) {
    std::string out =
        "trial,mode,xi,n_e,n_b,n_theta,objective,cum_env_steps,cum_grad_updates,peak_buffer,"
        "wall_clock_s\n";
    for (const TrialResult& r : results) {
        char buf[320];
        std::snprintf(buf, sizeof(buf), "%d,%s,%.9f,%d,%lld,%d,%.9f,%lld,%lld,%lld,%.3f\n",
                      r.trial, r.mode.c_str(), r.xi, r.n_explore,
                      static_cast<long long>(r.n_buffer), r.n_grad, r.objective,
                      static_cast<long long>(r.cum_env_steps),
                      static_cast<long long>(r.cum_grad_updates),
                      static_cast<long long>(r.peak_buffer), 0.0);
        out += buf;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << out;
}

void write_search_timing_csv(const std::vector<TrialResult>& results, const std::string& path) {
    std::string out = "trial,mode,wall_clock_s\n";
    for (const TrialResult& r : results) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%s,%.3f\n", r.trial, r.mode.c_str(), r.wall_clock_s);
        out += buf;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << out;
}

}  // namespace elbotune
