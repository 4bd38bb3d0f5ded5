// Reconstruction quality metrics on [0,1]-scaled cubes.
#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dmdc/cube.hpp"

namespace dmdc {

// 10*log10(1 / MSE), capped at 100 dB; identical cubes report exactly 100.
double psnr(const HyperspectralCube& a, const HyperspectralCube& b);

// Mean structural similarity: 11x11 gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, dynamic range 1. Windows are fully inside the image (no padding);
// per-channel means are averaged. Needs nx, ny >= 11.
double ssim(const HyperspectralCube& a, const HyperspectralCube& b);

// Mean |pred - truth| / truth over voxels where truth >= 1e-4. Refuses cubes
// where every voxel falls under the guard.
double mrae(const HyperspectralCube& pred, const HyperspectralCube& truth);

double rmse(const HyperspectralCube& a, const HyperspectralCube& b);

struct MetricReport {
    double psnr_db = 0.0, ssim = 0.0, mrae = 0.0, rmse = 0.0;
};
MetricReport evaluate(const HyperspectralCube& pred, const HyperspectralCube& truth);

// Mean value per channel over the half-open region [x0,x1) x [y0,y1).
std::vector<double> spectral_curve(const HyperspectralCube& cube, uint32_t x0,
                                   uint32_t y0, uint32_t x1, uint32_t y1);

// "channel,value" lines with a header row
std::string spectral_curve_csv(const std::vector<double>& curve);

}  // namespace dmdc
