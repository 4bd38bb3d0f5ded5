// Spectral response curves of the RGB detector.
#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dmdc/cube.hpp"

namespace dmdc {

// Three per-channel weight curves, stored R, G, B. When `normalized` is set
// each curve sums to 1 across channels.
struct SpectralResponse {
    uint32_t nlam = 0;
    std::vector<double> curves;  // 3 * nlam, curve-outermost
    bool normalized = false;

    double at(uint32_t c, uint32_t l) const { return curves[size_t(c) * nlam + l]; }
    double& at(uint32_t c, uint32_t l) { return curves[size_t(c) * nlam + l]; }
};

std::vector<std::string> validate_response(const SpectralResponse& r);

// Gaussian-profile curves centered at 5/6 (R), 1/2 (G), 1/6 (B) of the channel
// range, each normalized to sum 1. Width sigma = max(0.6, nlam/5) channels:
// broad overlapping passbands, so each curve sees every channel and the three
// together constrain the whole spectrum.
SpectralResponse default_spectral_response(uint32_t nlam);

// Partition-of-unity variant: same Gaussian centers but columns (not rows)
// normalized, so the three curves sum to exactly 1 at every channel. This is
// the response family under which the beamsplitter energy split is exact;
// `normalized` is left false because rows do not sum to 1.
SpectralResponse partition_response(uint32_t nlam);

}  // namespace dmdc
