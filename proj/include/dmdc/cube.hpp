// Spectral data model: hyperspectral cubes, RGB images, synthetic scenes.
#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dmdc/common.hpp"

namespace dmdc {

// 3D scene X with nx rows (height), ny columns (width), nlam channels.
// Layout is channel-outermost, row-major within a channel, so plane l is the
// contiguous block data[l*nx*ny .. (l+1)*nx*ny) and shearing a channel is a
// row-wise contiguous copy.
struct HyperspectralCube {
    uint32_t nx = 0, ny = 0, nlam = 0;
    std::vector<double> data;

    HyperspectralCube() = default;
    HyperspectralCube(uint32_t nx_, uint32_t ny_, uint32_t nl_, double fill = 0.0)
        : nx(nx_), ny(ny_), nlam(nl_),
          data(size_t(nx_) * ny_ * nl_, fill) {}

    size_t size() const { return size_t(nx) * ny * nlam; }
    size_t idx(uint32_t l, uint32_t x, uint32_t y) const {
        return (size_t(l) * nx + x) * ny + y;
    }
    double& at(uint32_t l, uint32_t x, uint32_t y) { return data[idx(l, x, y)]; }
    double at(uint32_t l, uint32_t x, uint32_t y) const { return data[idx(l, x, y)]; }
};

// 3-channel measurement g. Channel order R, G, B, same layout rules as cubes.
struct RGBImage {
    uint32_t nx = 0, ny = 0;
    std::vector<double> data;  // 3 * nx * ny

    RGBImage() = default;
    RGBImage(uint32_t nx_, uint32_t ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), data(size_t(3) * nx_ * ny_, fill) {}

    size_t idx(uint32_t c, uint32_t x, uint32_t y) const {
        return (size_t(c) * nx + x) * ny + y;
    }
    double& at(uint32_t c, uint32_t x, uint32_t y) { return data[idx(c, x, y)]; }
    double at(uint32_t c, uint32_t x, uint32_t y) const { return data[idx(c, x, y)]; }
};

struct SceneSpec {
    uint32_t nx = 32, ny = 32, nlam = 8;
    uint32_t blob_count = 4;
    uint64_t seed = 0;
    double spectral_smoothness = 1.0;
};

// Returns the list of violated invariants; empty list means the cube is valid.
std::vector<std::string> validate_cube(const HyperspectralCube& cube);

// Gaussian blobs with Gaussian spectra, deterministic per seed, max value 1.
// Every generated value is rounded through float once so that the f32 file
// format round-trips bit-exactly.
HyperspectralCube synth_scene(const SceneSpec& spec);

}  // namespace dmdc
