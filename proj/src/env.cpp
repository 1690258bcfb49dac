#include "elbotune/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elbotune {

NavVariant parse_variant(const std::string& name) {
    if (name == "no_wall") return NavVariant::NoWall;
    if (name == "multi_wall") return NavVariant::MultiWall;
    if (name == "multi_color") return NavVariant::MultiColor;
    throw std::invalid_argument("unknown environment variant: " + name);
}

std::string variant_name(NavVariant variant) {
    switch (variant) {
        case NavVariant::NoWall: return "no_wall";
        case NavVariant::MultiWall: return "multi_wall";
        case NavVariant::MultiColor: return "multi_color";
    }
    return "no_wall";
}

double workspace_lo(const NavEnvConfig& config) { return 0.5 - config.workspace_scale / 2.0; }
double workspace_hi(const NavEnvConfig& config) { return 0.5 + config.workspace_scale / 2.0; }

double wall_margin(const NavEnvConfig& config) {
    return 1.0 / std::min(config.image_shape.height, config.image_shape.width);
}

const std::vector<std::vector<WallSegment>>& wall_library() {
    static const std::vector<std::vector<WallSegment>> lib = {
        {{0.50, 0.20, 0.50, 0.80}},
        {{0.20, 0.50, 0.80, 0.50}},
        {{0.30, 0.00, 0.30, 0.60}},
        {{0.70, 0.40, 0.70, 1.00}},
        {{0.40, 0.30, 1.00, 0.30}},
        {{0.00, 0.70, 0.60, 0.70}},
        {{0.50, 0.00, 0.50, 0.40}, {0.50, 0.60, 0.50, 1.00}},
        {{0.00, 0.50, 0.40, 0.50}, {0.60, 0.50, 1.00, 0.50}},
        {{0.35, 0.20, 0.35, 0.80}, {0.65, 0.20, 0.65, 0.80}},
        {{0.20, 0.35, 0.80, 0.35}, {0.20, 0.65, 0.80, 0.65}},
        {{0.50, 0.30, 0.50, 1.00}, {0.30, 0.30, 0.70, 0.30}},
        {{0.20, 0.60, 0.60, 0.60}, {0.60, 0.20, 0.60, 0.60}},
        {{0.25, 0.25, 0.25, 0.75}, {0.25, 0.25, 0.75, 0.25}, {0.75, 0.25, 0.75, 0.75}},
        {{0.30, 0.25, 0.70, 0.25}, {0.30, 0.75, 0.70, 0.75}, {0.30, 0.25, 0.30, 0.75}},
        {{0.40, 0.00, 0.40, 0.50}, {0.60, 0.50, 0.60, 1.00}},
    };
    return lib;
}

namespace {

bool is_vertical(const WallSegment& w) { return w.x0 == w.x1; }

double dist_to_segment(const Eigen::Vector2d& p, const WallSegment& w) {
    const Eigen::Vector2d a(w.x0, w.y0), b(w.x1, w.y1);
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + t * ab)).norm();
}

// Earliest parameter t in (0,1] at which the motion p->q crosses the wall, or
// a negative value when it does not.
double crossing_param(const Eigen::Vector2d& p, const Eigen::Vector2d& q, const WallSegment& w) {
    const int axis = is_vertical(w) ? 0 : 1;     // coordinate the wall pins
    const int span = 1 - axis;                   // coordinate the wall spans
    const double c = axis == 0 ? w.x0 : w.y0;
    const double dp = p[axis] - c;
    const double dq = q[axis] - c;
    if (dp == 0.0) return -1.0;  // never starts on the line (margin backoff)
    if ((dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0)) return -1.0;
    const double t = dp / (dp - dq);
    const double hit = p[span] + t * (q[span] - p[span]);
    const double lo = std::min(axis == 0 ? w.y0 : w.x0, axis == 0 ? w.y1 : w.x1);
    const double hi = std::max(axis == 0 ? w.y0 : w.x0, axis == 0 ? w.y1 : w.x1);
    if (hit < lo || hit > hi) return -1.0;
    return t;
}

Eigen::Vector2d uniform_position(const NavEnvConfig& config,
                                 const std::vector<WallSegment>& walls, Rng& rng) {
    const double lo = workspace_lo(config);
    const double hi = workspace_hi(config);
    const double margin = wall_margin(config);
    Eigen::Vector2d p;
    for (int attempt = 0; attempt < 256; ++attempt) {
        p = {uniform(rng, lo, hi), uniform(rng, lo, hi)};
        bool clear = true;
        for (const WallSegment& w : walls)
            if (dist_to_segment(p, w) < margin) {
                clear = false;
                break;
            }
        if (clear) return p;
    }
    return p;
}

void draw_wall(Image& img, const WallSegment& w) {
    const int h = img.shape.height;
    const int wdt = img.shape.width;
    auto px = [&](double v, int n) { return std::clamp(static_cast<int>(v * n), 0, n - 1); };
    const int x0 = px(std::min(w.x0, w.x1), wdt), x1 = px(std::max(w.x0, w.x1), wdt);
    const int y0 = px(std::min(w.y0, w.y1), h), y1 = px(std::max(w.y0, w.y1), h);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            for (int c = 0; c < img.shape.channels; ++c)
                img.pixels[c * h * wdt + y * wdt + x] = 0.5;
}

}  // namespace

Image render(const NavState& state, const NavEnvConfig& config) {
    Image img;
    img.shape = config.image_shape;
    img.pixels = Eigen::VectorXd::Zero(img.shape.size());
    for (const WallSegment& w : state.active_walls) draw_wall(img, w);
    const int h = img.shape.height;
    const int wdt = img.shape.width;
    const int px = std::clamp(static_cast<int>(state.position.x() * wdt), 0, wdt - 1);
    const int py = std::clamp(static_cast<int>(state.position.y() * h), 0, h - 1);
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const int x = std::min(px + dx, wdt - 1);
            const int y = std::min(py + dy, h - 1);
            for (int c = 0; c < img.shape.channels; ++c)
                img.pixels[c * h * wdt + y * wdt + x] = state.point_color[std::min(c, 2)];
        }
    return img;
}

std::pair<NavState, Image> reset(const NavEnvConfig& config, Rng& rng) {
    if (config.image_shape.height < 8 || config.image_shape.width < 8)
        throw std::invalid_argument("canvas must be at least 8x8");
    if (config.workspace_scale <= 0.0 || config.workspace_scale > 1.0)
        throw std::invalid_argument("workspace_scale must lie in (0,1]");
    NavState state;
    if (config.variant != NavVariant::NoWall) {
        const auto& lib = wall_library();
        const int n = std::min<int>(config.wall_set_size, static_cast<int>(lib.size()));
        state.active_walls = lib[uniform_int(rng, 0, n - 1)];
    }
    if (config.variant == NavVariant::MultiColor)
        state.point_color = {uniform01(rng), uniform01(rng), uniform01(rng)};
    state.position = uniform_position(config, state.active_walls, rng);
    return {state, render(state, config)};
}

std::pair<NavState, Image> step(const NavEnvConfig& config, const NavState& state,
                                const Eigen::Vector2d& action) {
    const double a = config.action_scale;
    Eigen::Vector2d delta{std::clamp(action.x(), -a, a), std::clamp(action.y(), -a, a)};
    const double lo = workspace_lo(config);
    const double hi = workspace_hi(config);
    Eigen::Vector2d target = state.position + delta;
    target = {std::clamp(target.x(), lo, hi), std::clamp(target.y(), lo, hi)};

    double t_hit = 2.0;
    for (const WallSegment& w : state.active_walls) {
        const double t = crossing_param(state.position, target, w);
        if (t >= 0.0 && t < t_hit) t_hit = t;
    }
    NavState next = state;
    if (t_hit <= 1.0) {
        const double len = (target - state.position).norm();
        const double back = len > 0.0 ? wall_margin(config) / len : 0.0;
        const double t_stop = std::max(0.0, t_hit - back);
        next.position = state.position + t_stop * (target - state.position);
    } else {
        next.position = target;
    }
    return {next, render(next, config)};
}

std::pair<Image, Eigen::Vector2d> sample_eval_goal(const NavEnvConfig& config,
                                                   const NavState& context, Rng& rng) {
    NavState goal_state = context;
    goal_state.position = uniform_position(config, context.active_walls, rng);
    return {render(goal_state, config), goal_state.position};
}

double image_distance(const Image& a, const Image& b) {
    if (!(a.shape == b.shape)) throw std::invalid_argument("image shape mismatch");
    return (a.pixels - b.pixels).norm();
}

const NavEnvConfig& curriculum_advance(const std::vector<CurriculumStage>& schedule, int epoch) {
    if (schedule.empty()) throw std::invalid_argument("empty curriculum schedule");
    if (schedule.front().epoch != 0) throw std::invalid_argument("first stage must start at 0");
    const CurriculumStage* best = &schedule.front();
    for (const CurriculumStage& stage : schedule)
        if (stage.epoch <= epoch && stage.epoch >= best->epoch) best = &stage;
    return best->config;
}

}  // namespace elbotune
