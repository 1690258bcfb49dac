#pragma once

#include <string>

#include <Eigen/Core>

namespace elbotune {

struct ImageShape {
    int channels = 1;
    int height = 0;
    int width = 0;

    int size() const { return channels * height * width; }
    bool operator==(const ImageShape&) const = default;
};

// Flat pixel vector in [0,1], channel-major: index = c*H*W + y*W + x.
struct Image {
    ImageShape shape;
    Eigen::VectorXd pixels;
};

// Byte-exact hashable key for counting distinct images.
inline std::string image_key(const Image& img) {
    return std::string(reinterpret_cast<const char*>(img.pixels.data()),
                       sizeof(double) * static_cast<std::size_t>(img.pixels.size()));
}

}  // namespace elbotune
