// Noise estimation from the imbalance between the two measurement paths.
// The closed-form estimator lives here; the learned head is in net.hpp.
#pragma once
#include <cstdint>
#include <vector>

#include "dmdc/cube.hpp"
#include "dmdc/optics.hpp"

namespace dmdc {

// Signed per-voxel noise estimate, dims matching the reconstruction cube.
struct NoiseMap {
    uint32_t nx = 0, ny = 0, nlam = 0;
    std::vector<double> data;

    NoiseMap() = default;
    NoiseMap(uint32_t nx_, uint32_t ny_, uint32_t nl_, double fill = 0.0)
        : nx(nx_), ny(ny_), nlam(nl_), data(size_t(nx_) * ny_ * nl_, fill) {}

    size_t idx(uint32_t l, uint32_t x, uint32_t y) const {
        return (size_t(l) * nx + x) * ny + y;
    }
};

// Approximate inverse of the RGB path: a per-pixel 3 -> nlam linear lift,
// precomputed as the minimizer of the half-weighted response fit plus a
// spectral-smoothness penalty, then calibrated so that re-projecting the lift
// reproduces the rgb input exactly. Each pixel's spectrum is independent.
HyperspectralCube backproject_rgb(const RGBImage& yr, const SpectralResponse& response);

// Diagonal-normalized adjoint of the CASSI path: Phi^T y / (Phi^T Phi 1 + 1e-6).
HyperspectralCube backproject_cassi(const CASSIMeasurement& yc, const CodedMask& mask,
                                    uint32_t d);

// Robust noise level read off the uncoded rgb arm: median absolute value of a
// 3x3 high-pass filter response, rescaled for gaussian noise. Near zero for
// clean smooth images.
double rgb_noise_sigma(const RGBImage& yr);

// Closed-form noise estimate from the imbalance of the two arms: back-project
// the part of the coded measurement that the rgb arm's reconstruction cannot
// explain, shrunk by the fraction of its energy attributable to noise at the
// level rgb_noise_sigma reports,
//   nm = alpha * backproject_cassi(Yc - forward_noiseless(backproject_rgb(Yr)))
// Finite for finite inputs; zero when both inputs are zero.
NoiseMap estimate_noise_analytic(const CASSIMeasurement& yc, const RGBImage& yr,
                                 const CodedMask& mask, const SpectralResponse& response,
                                 uint32_t d);

}  // namespace dmdc
