#include "elbotune/autotune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elbotune {

AutotuneSettings compute_settings(double neg_beta_elbo, double xi, int max_path_length,
                                  const AutotuneCaps& caps) {
    if (!std::isfinite(neg_beta_elbo))
        throw std::invalid_argument("neg_beta_elbo is not finite; VAE evaluation is broken");
    if (xi <= 0.0) throw std::invalid_argument("xi must be positive");
    if (max_path_length < 1) throw std::invalid_argument("max_path_length must be >= 1");
    AutotuneSettings s;
    s.xi = xi;
    s.max_path_length = max_path_length;
    s.estimated_goal_count = xi * neg_beta_elbo;

    // One shared cap keeps n_grad = n_explore and n_buffer = l * n_explore
    // true even when a limit binds.
    const std::int64_t cap = std::max<std::int64_t>(
        1, std::min<std::int64_t>({static_cast<std::int64_t>(caps.n_explore),
                                   static_cast<std::int64_t>(caps.n_grad),
                                   caps.n_buffer / max_path_length}));
    const double raw = std::ceil(s.estimated_goal_count);
    std::int64_t n;
    if (raw < 1.0)
        n = 1;
    else if (raw >= static_cast<double>(cap))
        n = cap;
    else
        n = static_cast<std::int64_t>(raw);
    s.n_explore = static_cast<int>(n);
    s.n_grad = static_cast<int>(n);
    s.n_buffer = static_cast<std::int64_t>(max_path_length) * n;
    return s;
}

AutotuneSettings resolve(const TuningMode& mode, const ElboReport& report, int max_path_length,
                         const AutotuneCaps& caps) {
    if (mode.is_auto) return compute_settings(report.neg_beta_elbo, mode.xi, max_path_length, caps);
    if (mode.n_explore < 1 || mode.n_buffer < 1 || mode.n_grad < 1)
        throw std::invalid_argument("fixed tuning values must be >= 1");
    AutotuneSettings s;
    s.xi = 0.0;
    s.max_path_length = max_path_length;
    s.n_explore = mode.n_explore;
    s.n_buffer = mode.n_buffer;
    s.n_grad = mode.n_grad;
    s.estimated_goal_count = 0.0;
    return s;
}

}  // namespace elbotune
