// Dual-camera forward model: RGB projection, mask modulation, dispersion,
// detector integration, the composed operator and its exact adjoint, plus a
// dense-matrix oracle for small instances.
#pragma once
#include <cstdint>
#include <vector>

#include "dmdc/cube.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/response.hpp"

namespace dmdc {

// Sheared 2D detector image of width wy = ny + d*(nlam-1). Records the cube
// dims and dispersion step it came from so the adjoint needs no side channel.
struct CASSIMeasurement {
    uint32_t nx = 0, wy = 0;
    uint32_t ny = 0, nlam = 0, d = 0;
    std::vector<double> data;  // nx * wy, row-major

    CASSIMeasurement() = default;
    CASSIMeasurement(uint32_t nx_, uint32_t ny_, uint32_t nl_, uint32_t d_, double fill = 0.0)
        : nx(nx_), wy(ny_ + d_ * (nl_ - 1)), ny(ny_), nlam(nl_), d(d_),
          data(size_t(nx_) * (ny_ + d_ * (nl_ - 1)), fill) {}

    size_t idx(uint32_t x, uint32_t y) const { return size_t(x) * wy + y; }
    double& at(uint32_t x, uint32_t y) { return data[idx(x, y)]; }
    double at(uint32_t x, uint32_t y) const { return data[idx(x, y)]; }
};

struct NoiseSpec {
    double sigma = 0.0;
    uint64_t seed = 0;
};

std::vector<std::string> validate_measurement(const CASSIMeasurement& m);

// g_c(x,y) = 1/2 * sum_l w_c(l) X(x,y,l) + N(0, sigma^2). The 1/2 is the
// beamsplitter: each camera sees half the light.
RGBImage rgb_project(const HyperspectralCube& cube, const SpectralResponse& response,
                     const NoiseSpec& noise);

// X'(x,y,l) = 1/2 * M(x,y) * X(x,y,l)
HyperspectralCube mask_modulate(const HyperspectralCube& cube, const CodedMask& mask);

// Channel l (0-based) shifts into columns [d*l, d*l+ny). Output cube has
// width ny + d*(nlam-1); entries outside a channel's window are zero.
HyperspectralCube disperse(const HyperspectralCube& cube, uint32_t d);

// Y = sum over channels of the sheared planes, plus per-pixel gaussian noise.
CASSIMeasurement integrate(const HyperspectralCube& sheared, uint32_t ny_orig,
                           uint32_t d, const NoiseSpec& noise);

// integrate(disperse(mask_modulate(cube, mask), d), noise)
CASSIMeasurement cassi_forward(const HyperspectralCube& cube, const CodedMask& mask,
                               uint32_t d, const NoiseSpec& noise);

// Exact transpose of the noiseless forward: un-shear each channel window and
// multiply by 1/2 * M.
HyperspectralCube cassi_adjoint(const CASSIMeasurement& meas, const CodedMask& mask,
                                uint32_t d);

// Both cameras at once; the two detectors draw independent noise streams
// derived from noise.seed.
struct DualMeasurement {
    RGBImage rgb;
    CASSIMeasurement cassi;
};
DualMeasurement dual_measure(const HyperspectralCube& cube, const CodedMask& mask,
                             const SpectralResponse& response, uint32_t d,
                             const NoiseSpec& noise);

// Row-major (nx*wy) x (nx*ny*nlam) matrix whose column j is the noiseless
// forward image of the j-th standard-basis cube. Refuses instances with more
// than 65536 cube entries.
std::vector<double> dense_operator(const CodedMask& mask, uint32_t d,
                                   uint32_t nx, uint32_t ny, uint32_t nlam);

}  // namespace dmdc
