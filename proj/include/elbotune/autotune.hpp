#pragma once

#include <cstdint>

#include "elbotune/vae.hpp"

namespace elbotune {

struct AutotuneCaps {
    int n_explore = 6000;
    std::int64_t n_buffer = 300000;
    int n_grad = 6000;
};

struct AutotuneSettings {
    double xi = 1.0;
    int max_path_length = 50;
    int n_explore = 1;
    std::int64_t n_buffer = 1;
    int n_grad = 1;
    double estimated_goal_count = 0.0;  // raw xi * neg_beta_elbo before rounding
};

struct TuningMode {
    bool is_auto = true;
    double xi = 1.0;
    int n_explore = 1;
    std::int64_t n_buffer = 1;
    int n_grad = 1;

    static TuningMode make_auto(double xi) { return TuningMode{true, xi, 1, 1, 1}; }
    static TuningMode make_fixed(int n_explore, std::int64_t n_buffer, int n_grad) {
        return TuningMode{false, 0.0, n_explore, n_buffer, n_grad};
    }
};

AutotuneSettings compute_settings(double neg_beta_elbo, double xi, int max_path_length,
                                  const AutotuneCaps& caps);
AutotuneSettings resolve(const TuningMode& mode, const ElboReport& report, int max_path_length,
                         const AutotuneCaps& caps);

}  // namespace elbotune
