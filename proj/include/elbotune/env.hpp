#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/image.hpp"
#include "elbotune/rng.hpp"

namespace elbotune {

enum class NavVariant { NoWall, MultiWall, MultiColor };

NavVariant parse_variant(const std::string& name);
std::string variant_name(NavVariant variant);

// Axis-aligned segment in unit-canvas coordinates: x0==x1 or y0==y1.
struct WallSegment {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

struct NavEnvConfig {
    NavVariant variant = NavVariant::NoWall;
    ImageShape image_shape{3, 16, 16};
    double workspace_scale = 1.0;  // fraction of the unit square, centered
    int max_path_length = 50;
    int wall_set_size = 15;
    double action_scale = 0.15;
};

struct NavState {
    Eigen::Vector2d position{0.5, 0.5};
    Eigen::Vector3d point_color{1.0, 0.0, 0.0};
    std::vector<WallSegment> active_walls;
};

double workspace_lo(const NavEnvConfig& config);
double workspace_hi(const NavEnvConfig& config);
// Points stop one rendered pixel short of a wall.
double wall_margin(const NavEnvConfig& config);

// Fixed library of wall configurations, 1-3 segments each.
const std::vector<std::vector<WallSegment>>& wall_library();

std::pair<NavState, Image> reset(const NavEnvConfig& config, Rng& rng);
std::pair<NavState, Image> step(const NavEnvConfig& config, const NavState& state,
                                const Eigen::Vector2d& action);
Image render(const NavState& state, const NavEnvConfig& config);
std::pair<Image, Eigen::Vector2d> sample_eval_goal(const NavEnvConfig& config,
                                                   const NavState& context, Rng& rng);
double image_distance(const Image& a, const Image& b);

struct CurriculumStage {
    int epoch = 0;
    NavEnvConfig config;
};

const NavEnvConfig& curriculum_advance(const std::vector<CurriculumStage>& schedule, int epoch);

}  // namespace elbotune
