#include "dmdc/masks.hpp"

#include <algorithm>
#include <cmath>

namespace dmdc {

std::vector<std::string> validate_mask(const CodedMask& m) {
    std::vector<std::string> v;
    if (m.nx < 1 || m.ny < 1) v.push_back("dims must be at least 1x1");
    if (m.data.size() != size_t(m.nx) * m.ny) { v.push_back("data length != nx*ny"); return v; }
    for (double x : m.data) {
        if (!(x >= 0.0 && x <= 1.0)) { v.push_back("values must lie in [0,1]"); break; }
    }
    if (m.binary)
        for (double x : m.data)
            if (x != 0.0 && x != 1.0) { v.push_back("binary flag set but values not in {0,1}"); break; }
    return v;
}

CodedMask template_mask(uint32_t nx, uint32_t ny, double open_ratio, uint64_t seed) {
    require(open_ratio > 0.0 && open_ratio < 1.0, "param",
            "open_ratio must lie strictly inside (0,1)");
    CodedMask m(nx, ny);
    m.binary = true;
    Rng rng(seed);
    for (auto& v : m.data) v = rng.bernoulli(open_ratio) ? 1.0 : 0.0;
    return m;
}

CodedMask random_mask(uint32_t nx, uint32_t ny, uint64_t seed) {
    CodedMask m(nx, ny);
    m.binary = true;
    Rng rng(seed);
    for (auto& v : m.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    return m;
}

CodedMask normal_mask(uint32_t nx, uint32_t ny, uint64_t seed) {
    CodedMask m(nx, ny);
    m.binary = false;
    Rng rng(seed);
    for (auto& v : m.data) v = std::clamp(0.5 + 0.25 * rng.gaussian(), 0.0, 1.0);
    return m;
}

MaskStats mask_stats(const CodedMask& m) {
    MaskStats s;
    double total = 0.0;
    std::vector<double> row_means(m.nx, 0.0);
    for (uint32_t x = 0; x < m.nx; ++x) {
        double rs = 0.0;
        for (uint32_t y = 0; y < m.ny; ++y) rs += m.at(x, y);
        row_means[x] = rs / m.ny;
        total += rs;
    }
    s.open_ratio = total / (double(m.nx) * m.ny);
    double var = 0.0;
    for (double rm : row_means) var += (rm - s.open_ratio) * (rm - s.open_ratio);
    s.row_open_variance = var / m.nx;
    return s;
}

}  // namespace dmdc
