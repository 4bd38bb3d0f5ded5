// Spatial total-variation denoiser (Chambolle dual projection), applied per
// channel. The prior term of the classical reconstruction.
#pragma once
#include "dmdc/cube.hpp"

namespace dmdc {

// Approximates argmin_u 1/2 ||u - cube||^2 + tv_weight * TV_spatial(u) with
// tv_iters dual fixed-point iterations per channel. Non-expansive: the output
// is clamped to the input's [min, max] range.
HyperspectralCube tv_denoise(const HyperspectralCube& cube, double tv_weight, int tv_iters);

}  // namespace dmdc
