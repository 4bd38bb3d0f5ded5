#include "dmdc/cube.hpp"

#include <algorithm>
#include <cmath>

namespace dmdc {

std::vector<std::string> validate_cube(const HyperspectralCube& cube) {
    std::vector<std::string> v;
    if (cube.nx < 1) v.push_back("nx >= 1");
    if (cube.ny < 1) v.push_back("ny >= 1");
    if (cube.nlam < 2) v.push_back("nlam >= 2");
    size_t want = size_t(cube.nx) * cube.ny * cube.nlam;
    if (cube.data.size() != want) {
        v.push_back("data length " + std::to_string(cube.data.size()) +
                    " != nx*ny*nlam = " + std::to_string(want));
        return v;  // indexing below would be meaningless
    }
    for (size_t i = 0; i < cube.data.size(); ++i) {
        if (!std::isfinite(cube.data[i])) {
            v.push_back("non-finite value at flat index " + std::to_string(i));
            break;
        }
    }
    for (size_t i = 0; i < cube.data.size(); ++i) {
        if (cube.data[i] < 0.0) {
            v.push_back("negative value at flat index " + std::to_string(i));
            break;
        }
    }
    return v;
}

HyperspectralCube synth_scene(const SceneSpec& spec) {
    require(spec.nx >= 1 && spec.ny >= 1, "param", "scene dims must be at least 1x1");
    require(spec.nlam >= 2, "param", "scene needs at least 2 channels");
    require(spec.blob_count >= 1, "param", "blob_count must be >= 1");
    require(spec.spectral_smoothness > 0.0, "param", "spectral_smoothness must be > 0");

    HyperspectralCube cube(spec.nx, spec.ny, spec.nlam, 0.0);
    Rng rng(spec.seed);
    double minside = double(std::min(spec.nx, spec.ny));

    for (uint32_t b = 0; b < spec.blob_count; ++b) {
        // draw order is part of the determinism contract; do not reorder
        double cx = rng.uniform() * (spec.nx - 1 + 1e-12);
        double cy = rng.uniform() * (spec.ny - 1 + 1e-12);
        double sx = (0.10 + 0.20 * rng.uniform()) * minside;
        double amp = 0.5 + 0.5 * rng.uniform();
        double mu = rng.uniform() * (spec.nlam - 1);
        // wide spectra: adjacent-channel jumps stay well below the mean level
        double sl = std::max(1.0, spec.spectral_smoothness * spec.nlam / 3.5) *
                    (0.9 + 0.2 * rng.uniform());

        std::vector<double> spat(size_t(spec.nx) * spec.ny);
        for (uint32_t x = 0; x < spec.nx; ++x)
            for (uint32_t y = 0; y < spec.ny; ++y) {
                double dx = x - cx, dy = y - cy;
                spat[size_t(x) * spec.ny + y] =
                    amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sx * sx));
            }
        for (uint32_t l = 0; l < spec.nlam; ++l) {
            double dl = l - mu;
            double g = std::exp(-dl * dl / (2.0 * sl * sl));
            double* plane = cube.data.data() + size_t(l) * spec.nx * spec.ny;
            for (size_t i = 0; i < size_t(spec.nx) * spec.ny; ++i)
                plane[i] += g * spat[i];
        }
    }

    double mx = 0.0;
    for (double v : cube.data) mx = std::max(mx, v);
    if (mx > 0.0)
        for (double& v : cube.data) v /= mx;
    // round through f32 once so the file format round-trips bit-exactly
    for (double& v : cube.data) v = double(float(v));
    return cube;
}

}  // namespace dmdc
