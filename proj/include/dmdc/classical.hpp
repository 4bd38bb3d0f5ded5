// Training-free reconstruction: each stage back-projects the measurement
// residual, optionally anchored by the RGB camera, and applies TV denoising.
#pragma once
#include <cstdint>

#include "dmdc/estimation.hpp"
#include "dmdc/tv.hpp"

namespace dmdc {

struct ReconConfig {
    int stages = 30;
    double tv_weight = 0.005;
    int tv_iters = 12;
    double step_size = 0.0;       // <= 0 means: use default_step_size(mask, d, nlam)
    double rgb_beta = 0.5;        // anchor strength toward the RGB back-projection
    bool use_noise_estimate = false;
    bool use_rgb = true;
};

// 1 / max over detector pixels of sum_l (1/2 M)^2 falling on that pixel.
// Keeps the residual iteration inside the operator's spectral radius.
double default_step_size(const CodedMask& mask, uint32_t d, uint32_t nlam);

// One refinement:
//   r       = Yc - Phi0(noise_map) - Phi0(x_n)          (Phi0 = noiseless forward)
//   anchor  = rgb_beta * (backproject_rgb(Yr) - x_n)     when use_rgb, else 0
//   x_{n+1} = x_n + tv_denoise(step_size * adjoint(r) + anchor)
HyperspectralCube classical_stage(const HyperspectralCube& x_n, const CASSIMeasurement& yc,
                                  const RGBImage& yr, const NoiseMap& noise_map,
                                  const CodedMask& mask, const SpectralResponse& response,
                                  uint32_t d, const ReconConfig& cfg);

// x_0 = backproject_cassi(Yc); cfg.stages refinements; final clamp to [0,1].
// noise_map comes from estimate_noise_analytic when cfg.use_noise_estimate.
HyperspectralCube reconstruct_classical(const CASSIMeasurement& yc, const RGBImage& yr,
                                        const CodedMask& mask, const SpectralResponse& response,
                                        uint32_t d, const ReconConfig& cfg);

}  // namespace dmdc
