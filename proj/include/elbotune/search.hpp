#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elbotune/config.hpp"
#include "elbotune/rig.hpp"

namespace elbotune {

struct SearchSpace {
    bool auto_mode = true;
    double xi_min = 0.1;
    double xi_max = 2.0;
    int ne_min = 5;
    int ne_max = 300;
    std::int64_t nb_min = 250;
    std::int64_t nb_max = 15000;  // sampled log-uniformly
    int ntheta_min = 5;
    int ntheta_max = 300;
};

struct TrialResult {
    int trial = 0;
    std::string mode;
    double xi = 0.0;
    int n_explore = 0;
    std::int64_t n_buffer = 0;
    int n_grad = 0;
    double objective = 0.0;
    std::int64_t cum_env_steps = 0;
    std::int64_t cum_grad_updates = 0;
    std::int64_t peak_buffer = 0;
    double wall_clock_s = 0.0;
};

SearchSpace make_search_space(const AppConfig& app, const std::string& mode);

// Trial i of either mode runs under the same derived seed, so auto and fixed
// objectives are paired by index. Results come back sorted by objective.
std::vector<TrialResult> random_search(const SearchSpace& space, int n_trials,
                                       const RunConfig& base, std::uint64_t search_seed,
                                       int workers, int objective_window,
                                       const std::string& out_dir);

// The three one-dimension-starved fixed configurations at the space's range
// extremes: limited exploration, limited buffer, limited updates.
std::vector<TrialResult> run_baselines(const SearchSpace& space, const RunConfig& base,
                                       std::uint64_t search_seed, int objective_window,
                                       const std::string& out_dir);

// wall_clock_s written as 0 (see write_metrics_csv); real times go to the
// timing sidecar.
void write_search_csv(const std::vector<TrialResult>& results, const std::string& path);
void write_search_timing_csv(const std::vector<TrialResult>& results, const std::string& path);

}  // namespace elbotune
