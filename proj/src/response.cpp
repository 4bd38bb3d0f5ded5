#include "dmdc/response.hpp"

#include <algorithm>
#include <cmath>

namespace dmdc {

std::vector<std::string> validate_response(const SpectralResponse& r) {
    std::vector<std::string> v;
    if (r.nlam < 2) v.push_back("nlam >= 2");
    if (r.curves.size() != size_t(3) * r.nlam) {
        v.push_back("curves length != 3*nlam");
        return v;
    }
    for (double w : r.curves)
        if (!(w >= 0.0) || !std::isfinite(w)) { v.push_back("weights must be finite and >= 0"); break; }
    for (int c = 0; c < 3; ++c) {
        double mx = 0.0, sum = 0.0;
        for (uint32_t l = 0; l < r.nlam; ++l) { mx = std::max(mx, r.at(c, l)); sum += r.at(c, l); }
        if (mx <= 0.0) v.push_back("curve " + std::to_string(c) + " has no positive weight");
        if (r.normalized && std::abs(sum - 1.0) > 1e-9)
            v.push_back("curve " + std::to_string(c) + " does not sum to 1");
    }
    return v;
}

static void fill_gaussians(SpectralResponse& r, double sigma) {
    // stored R, G, B; centers at 5/6, 1/2, 1/6 of the channel range
    const double centers[3] = {5.0 / 6.0, 0.5, 1.0 / 6.0};
    for (int c = 0; c < 3; ++c) {
        double mu = centers[c] * (r.nlam - 1);
        for (uint32_t l = 0; l < r.nlam; ++l) {
            double dl = l - mu;
            r.at(c, l) = std::exp(-dl * dl / (2.0 * sigma * sigma));
        }
    }
}

SpectralResponse default_spectral_response(uint32_t nlam) {
    require(nlam >= 2, "param", "response needs at least 2 channels");
    SpectralResponse r;
    r.nlam = nlam;
    r.curves.assign(size_t(3) * nlam, 0.0);
    // broad, overlapping curves: a camera whose channels see only one band
    // apiece would make the second detector useless for spectral recovery
    fill_gaussians(r, std::max(0.6, nlam / 5.0));
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (uint32_t l = 0; l < nlam; ++l) sum += r.at(c, l);
        for (uint32_t l = 0; l < nlam; ++l) r.at(c, l) /= sum;
    }
    r.normalized = true;
    return r;
}

SpectralResponse partition_response(uint32_t nlam) {
    require(nlam >= 2, "param", "response needs at least 2 channels");
    SpectralResponse r;
    r.nlam = nlam;
    r.curves.assign(size_t(3) * nlam, 0.0);
    fill_gaussians(r, std::max(1.0, nlam / 4.0));
    // normalize columns: the three curves sum to exactly 1 at every channel
    for (uint32_t l = 0; l < nlam; ++l) {
        double col = r.at(0, l) + r.at(1, l) + r.at(2, l);
        for (int c = 0; c < 3; ++c) r.at(c, l) /= col;
    }
    r.normalized = false;
    return r;
}

}  // namespace dmdc
