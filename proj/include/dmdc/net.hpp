// Unrolled dual-camera reconstruction network: channel-token and windowed
// pixel-token attention blocks, an RGB guidance stream, a learned noise head,
// and the measurement-driven mask generator. All graphs build on ad::Tape.
#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dmdc/autodiff.hpp"
#include "dmdc/cube.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/optics.hpp"
#include "dmdc/params.hpp"
#include "dmdc/response.hpp"

namespace dmdc {

struct NetConfig {
    uint32_t stages = 1;
    uint32_t embed_dim = 16;  // divisible by heads
    uint32_t heads = 2;
    uint32_t window = 8;      // spatial attention window edge; divides nx and ny
    bool with_rgb = true;
    bool with_cross = true;
    bool with_noise_estimator = false;
    double xi = 0.5;          // measurement consistency weight in the loss
};

// Creates every entry the configured network reads, gaussian-initialized from
// `seed`. Each entry's draws depend only on (seed, entry name), so toggling a
// flag never reshuffles the surviving entries.
ModelParams init_dmdc_params(const NetConfig& cfg, uint32_t nlam, uint64_t seed);

// Adds the mask generator head ("maskhead.*"). Initialization passes the
// template through unchanged until training moves the weights.
void add_mask_head_params(ModelParams& p, uint32_t channels, double threshold,
                          uint64_t seed);

// ---- graph builders (exposed so gradient checks can probe each one) ----

// Channel-token cross attention: q supplies queries, kv keys/values; both are
// (C, S) with channels as tokens and flattened space as the embedding. The
// self variant is this block applied to (x, x).
ad::Var cross_ab(ad::Tape& t, ad::Var q, ad::Var kv, ModelParams& p,
                 const std::string& prefix, uint32_t heads);
ad::Var spectral_ab(ad::Tape& t, ad::Var x, ModelParams& p,
                    const std::string& prefix, uint32_t heads);

// Windowed pixel-token self attention over (C, H*W) input.
ad::Var spatial_ab(ad::Tape& t, ad::Var x, ModelParams& p,
                   const std::string& prefix, uint32_t heads, uint32_t window,
                   uint32_t H, uint32_t W);

// Two-stream fusion block used by the first stage; fr may be invalid when the
// RGB stream is disabled.
ad::Var das_forward(ad::Tape& t, ad::Var fc, ad::Var fr, ModelParams& p,
                    const NetConfig& cfg, uint32_t H, uint32_t W);
// Single-stream block shared by the later stages.
ad::Var sas_forward(ad::Tape& t, ad::Var fc, ad::Var fr, ModelParams& p,
                    const NetConfig& cfg, uint32_t H, uint32_t W);

// 1x1 MLP lifting a (3, S) RGB image to an (nlam, S) guidance volume.
ad::Var rgb_init(ad::Tape& t, ad::Var rgb, ModelParams& p, uint32_t nlam);

// Learned noise head: shared-weight branch applied to both back-projected
// volumes, outputs branch(xc) - branch(xr) + eps. Inputs are (nlam, nx, ny).
ad::Var learned_noise_estimate(ad::Tape& t, ad::Var xc, ad::Var xr,
                               ModelParams& p, uint32_t nx, uint32_t ny);

// Full unrolled reconstruction. yc is (nx, wy), mask is (nx, ny); yr enters
// as constants (the RGB path does not depend on the mask).
ad::Var dmdc_forward_graph(ad::Tape& t, ad::Var yc, ad::Var mask,
                           const RGBImage& yr, uint32_t d, ModelParams& p,
                           const NetConfig& cfg, const SpectralResponse& resp);

// Convenience eager wrapper; no gradients.
HyperspectralCube dmdc_forward(const CASSIMeasurement& yc, const RGBImage& yr,
                               const CodedMask& mask, ModelParams& p,
                               const NetConfig& cfg, const SpectralResponse& resp);

// L = sum (x_out - truth)^2 + xi * sum (forward(x_out) - x_in)^2
ad::Var loss_fn(ad::Tape& t, ad::Var x_out, const HyperspectralCube& truth,
                ad::Var mask, uint32_t d, ad::Var x_in, double xi);

// Measurement-driven binary mask. rgb3 is (3, H, W); H and W must be
// divisible by 4. Returns the keep probabilities before thresholding.
ad::Var mask_probs_graph(ad::Tape& t, ad::Var rgb3, const CodedMask& templ,
                         ModelParams& p);
ad::Var mask_from_probs(ad::Var probs, double threshold);

// Eager wrapper: generates the binary mask for one RGB measurement; optionally
// writes the probability map to prob_out.
CodedMask dynamic_mask(const RGBImage& rgb, const CodedMask& templ,
                       ModelParams& p, std::vector<double>* prob_out = nullptr);

// threshold stored alongside the head weights in "maskhead.cfg"
double mask_head_threshold(const ModelParams& p);
uint32_t mask_head_channels(const ModelParams& p);

}  // namespace dmdc
