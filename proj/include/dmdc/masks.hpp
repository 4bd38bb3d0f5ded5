// Coded mask generators: manual template, random, normal, plus statistics.
// The RGB-driven dynamic mask lives in net.hpp (it owns a small conv net).
#pragma once
#include <cstdint>
#include <vector>

#include "dmdc/common.hpp"

namespace dmdc {

struct CodedMask {
    uint32_t nx = 0, ny = 0;
    std::vector<double> data;  // values in [0,1], row-major
    bool binary = false;

    CodedMask() = default;
    CodedMask(uint32_t nx_, uint32_t ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), data(size_t(nx_) * ny_, fill) {}

    size_t idx(uint32_t x, uint32_t y) const { return size_t(x) * ny + y; }
    double& at(uint32_t x, uint32_t y) { return data[idx(x, y)]; }
    double at(uint32_t x, uint32_t y) const { return data[idx(x, y)]; }
};

std::vector<std::string> validate_mask(const CodedMask& m);

// Fixed Bernoulli(open_ratio) pattern; doubles as the mask template fed to the
// dynamic-mask net. open_ratio must lie strictly inside (0,1).
CodedMask template_mask(uint32_t nx, uint32_t ny, double open_ratio, uint64_t seed);

// Bernoulli(0.5), intended to be redrawn per scene.
CodedMask random_mask(uint32_t nx, uint32_t ny, uint64_t seed);

// i.i.d. Gaussian(0.5, 0.25^2) clipped to [0,1]; continuous-valued.
CodedMask normal_mask(uint32_t nx, uint32_t ny, uint64_t seed);

struct MaskStats {
    double open_ratio = 0.0;          // mean value
    double row_open_variance = 0.0;   // variance of per-row means
};
MaskStats mask_stats(const CodedMask& m);

}  // namespace dmdc
