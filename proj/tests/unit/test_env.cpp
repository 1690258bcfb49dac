#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/env.hpp"
#include "elbotune/rng.hpp"

using namespace elbotune;

namespace {

int orientation_sign(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& c) {
    const double cross = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    if (cross > 0.0) return 1;
    if (cross < 0.0) return -1;
    return 0;
}

// Proper (interior) crossing of segments ab and cd.
bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                    const Eigen::Vector2d& d) {
    const int o1 = orientation_sign(a, b, c);
    const int o2 = orientation_sign(a, b, d);
    const int o3 = orientation_sign(c, d, a);
    const int o4 = orientation_sign(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

bool motion_crosses_wall(const Eigen::Vector2d& from, const Eigen::Vector2d& to,
                         const WallSegment& wall) {
    return segments_cross(from, to, Eigen::Vector2d(wall.x0, wall.y0),
                          Eigen::Vector2d(wall.x1, wall.y1));
}

}  // namespace

TEST_CASE("variant names round-trip") {
    for (const char* name : {"no_wall", "multi_wall", "multi_color"})
        CHECK(variant_name(parse_variant(name)) == name);
    CHECK_THROWS(parse_variant("bogus"));
}

TEST_CASE("reset produces no walls in the plain variant") {
    NavEnvConfig config;
    Rng rng = make_rng(1);
    auto [state, image] = reset(config, rng);
    CHECK(state.active_walls.empty());
    CHECK(state.point_color == Eigen::Vector3d(1.0, 0.0, 0.0));
    CHECK(image.pixels.size() == config.image_shape.size());
}

TEST_CASE("multi-wall resets draw from the fixed library") {
    NavEnvConfig config;
    config.variant = NavVariant::MultiWall;
    const auto& library = wall_library();
    REQUIRE(static_cast<int>(library.size()) == 15);
    for (const auto& entry : library) {
        CHECK(entry.size() >= 1);
        CHECK(entry.size() <= 3);
        for (const WallSegment& w : entry) {
            const bool axis_aligned = w.x0 == w.x1 || w.y0 == w.y1;
            CHECK(axis_aligned);
            for (double v : {w.x0, w.y0, w.x1, w.y1}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
    }

    Rng rng = make_rng(2);
    std::set<std::size_t> seen;
    for (int i = 0; i < 200; ++i) {
        auto [state, image] = reset(config, rng);
        bool found = false;
        for (std::size_t k = 0; k < library.size(); ++k) {
            if (library[k].size() != state.active_walls.size()) continue;
            bool same = true;
            for (std::size_t j = 0; j < library[k].size(); ++j) {
                const WallSegment& a = library[k][j];
                const WallSegment& b = state.active_walls[j];
                if (a.x0 != b.x0 || a.y0 != b.y0 || a.x1 != b.x1 || a.y1 != b.y1) same = false;
            }
            if (same) {
                seen.insert(k);
                found = true;
                break;
            }
        }
        CHECK(found);
        CHECK(state.point_color == Eigen::Vector3d(1.0, 0.0, 0.0));
    }
    CHECK(seen.size() > 5);  // 200 draws hit a healthy spread of the 15
}

TEST_CASE("multi-color resets vary the point color") {
    NavEnvConfig config;
    config.variant = NavVariant::MultiColor;
    Rng rng = make_rng(3);
    std::set<std::string> colors;
    for (int i = 0; i < 50; ++i) {
        auto [state, image] = reset(config, rng);
        CHECK(!state.active_walls.empty());
        colors.insert(std::to_string(state.point_color.x()) + "," +
                      std::to_string(state.point_color.y()) + "," +
                      std::to_string(state.point_color.z()));
    }
    CHECK(colors.size() > 40);
}

TEST_CASE("reset is deterministic per seed") {
    NavEnvConfig config;
    config.variant = NavVariant::MultiColor;
    Rng r1 = make_rng(77);
    Rng r2 = make_rng(77);
    auto [s1, i1] = reset(config, r1);
    auto [s2, i2] = reset(config, r2);
    CHECK(s1.position == s2.position);
    CHECK(s1.point_color == s2.point_color);
    CHECK(i1.pixels == i2.pixels);
}

TEST_CASE("zero action leaves the position unchanged") {
    NavEnvConfig config;
    Rng rng = make_rng(4);
    auto [state, image] = reset(config, rng);
    auto [next, next_image] = step(config, state, Eigen::Vector2d(0.0, 0.0));
    CHECK(next.position == state.position);
    CHECK(next_image.pixels == image.pixels);
}

TEST_CASE("pushing through the boundary clamps to it") {
    NavEnvConfig config;
    NavState state;
    state.position = Eigen::Vector2d(workspace_hi(config) - 0.01, 0.5);
    auto [next, image] = step(config, state, Eigen::Vector2d(10.0, 0.0));
    CHECK(next.position.x() == workspace_hi(config));
    CHECK(next.position.y() == 0.5);
}

TEST_CASE("motion stops short of a wall") {
    NavEnvConfig config;
    NavState state;
    state.position = Eigen::Vector2d(0.4, 0.5);
    state.active_walls = {{0.5, 0.2, 0.5, 0.8}};  // vertical wall at x=0.5
    auto [next, image] = step(config, state, Eigen::Vector2d(0.15, 0.0));
    CHECK(next.position.x() < 0.5);
    CHECK(next.position.x() > 0.4);
    CHECK(std::abs(0.5 - next.position.x()) <= wall_margin(config) + 1e-12);
    CHECK(!motion_crosses_wall(state.position, next.position, state.active_walls[0]));
}

TEST_CASE("position stays inside the workspace under a million fuzzed steps") {
    NavEnvConfig config;
    config.workspace_scale = 0.8;
    Rng rng = make_rng(5);
    NavState state = reset(config, rng).first;
    const double lo = workspace_lo(config);
    const double hi = workspace_hi(config);
    int violations = 0;
    for (int i = 0; i < 1000000; ++i) {
        Eigen::Vector2d action(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
        state = step(config, state, action).first;
        if (state.position.x() < lo || state.position.x() > hi || state.position.y() < lo ||
            state.position.y() > hi)
            ++violations;
        if (i % 5000 == 4999) state = reset(config, rng).first;
    }
    CHECK(violations == 0);
}

TEST_CASE("walls are impermeable under fuzzed motion") {
    NavEnvConfig config;
    config.variant = NavVariant::MultiWall;
    Rng rng = make_rng(6);
    int crossings = 0;
    for (int episode = 0; episode < 4000; ++episode) {
        NavState state = reset(config, rng).first;
        for (int t = 0; t < 50; ++t) {
            Eigen::Vector2d action(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
            NavState next = step(config, state, action).first;
            for (const WallSegment& w : state.active_walls)
                if (motion_crosses_wall(state.position, next.position, w)) ++crossings;
            state = next;
        }
    }
    CHECK(crossings == 0);
}

TEST_CASE("rendering is deterministic and separates distant positions") {
    NavEnvConfig config;
    NavState a;
    a.position = Eigen::Vector2d(0.3, 0.6);
    Image i1 = render(a, config);
    Image i2 = render(a, config);
    CHECK(i1.pixels == i2.pixels);

    NavState b = a;
    b.position = Eigen::Vector2d(0.3 + 3.0 / 16.0, 0.6);
    Image i3 = render(b, config);
    CHECK(i1.pixels != i3.pixels);
}

TEST_CASE("center render matches the stored golden image") {
    NavEnvConfig config;
    NavState state;
    state.position = Eigen::Vector2d(0.5, 0.5);
    state.active_walls = {{0.25, 0.25, 0.75, 0.25}};
    Image got = render(state, config);

    const std::string path = std::string(ELBOTUNE_TEST_DATA_DIR) + "/golden_center_render.txt";
    std::ifstream in(path);
    REQUIRE(in.good());
    int channels = 0, height = 0, width = 0;
    in >> channels >> height >> width;
    REQUIRE(channels == 3);
    REQUIRE(height == 16);
    REQUIRE(width == 16);
    Eigen::VectorXd want(channels * height * width);
    for (int i = 0; i < want.size(); ++i) in >> want(i);
    REQUIRE(in.good());
    CHECK(got.pixels == want);
}

TEST_CASE("evaluation goals are deterministic, reachable, and varied") {
    NavEnvConfig config;
    config.variant = NavVariant::MultiWall;
    Rng reset_rng = make_rng(8);
    NavState context = reset(config, reset_rng).first;

    Rng g1 = make_rng(9);
    Rng g2 = make_rng(9);
    auto [img1, pos1] = sample_eval_goal(config, context, g1);
    auto [img2, pos2] = sample_eval_goal(config, context, g2);
    CHECK(pos1 == pos2);
    CHECK(img1.pixels == img2.pixels);

    Rng g3 = make_rng(10);
    std::set<std::string> keys;
    for (int i = 0; i < 30; ++i) {
        auto [img, pos] = sample_eval_goal(config, context, g3);
        CHECK(pos.x() >= workspace_lo(config));
        CHECK(pos.x() <= workspace_hi(config));
        CHECK(pos.y() >= workspace_lo(config));
        CHECK(pos.y() <= workspace_hi(config));
        keys.insert(image_key(img));
    }
    CHECK(keys.size() > 20);
}

TEST_CASE("image distance closed forms") {
    NavEnvConfig config;
    NavState state;
    Image a = render(state, config);
    CHECK(image_distance(a, a) == 0.0);

    Image zeros{config.image_shape, Eigen::VectorXd::Zero(config.image_shape.size())};
    Image ones{config.image_shape, Eigen::VectorXd::Ones(config.image_shape.size())};
    CHECK(image_distance(zeros, ones) ==
          doctest::Approx(std::sqrt(static_cast<double>(config.image_shape.size())))
              .epsilon(1e-12));
    CHECK(image_distance(a, zeros) == image_distance(zeros, a));
    CHECK_THROWS(image_distance(zeros, Image{ImageShape{1, 2, 2}, Eigen::VectorXd::Zero(4)}));
}

TEST_CASE("curriculum picks the latest stage at or before the epoch") {
    NavEnvConfig plain, walls, colors;
    walls.variant = NavVariant::MultiWall;
    colors.variant = NavVariant::MultiColor;
    std::vector<CurriculumStage> schedule{{0, plain}, {50, walls}, {100, colors}};

    CHECK(curriculum_advance(schedule, 0).variant == NavVariant::NoWall);
    CHECK(curriculum_advance(schedule, 49).variant == NavVariant::NoWall);
    CHECK(curriculum_advance(schedule, 50).variant == NavVariant::MultiWall);
    CHECK(curriculum_advance(schedule, 99).variant == NavVariant::MultiWall);
    CHECK(curriculum_advance(schedule, 100).variant == NavVariant::MultiColor);
    CHECK(curriculum_advance(schedule, 1000).variant == NavVariant::MultiColor);
    CHECK_THROWS(curriculum_advance({}, 0));
}
