#include "dmdc/classical.hpp"

#include <algorithm>
#include <cmath>

namespace dmdc {

double default_step_size(const CodedMask& mask, uint32_t d, uint32_t nlam) {
    // max over detector pixels of sum_l (1/2 M)^2 landing there = ||diag(Phi Phi^T)||_inf
    uint32_t wy = mask.ny + d * (nlam - 1);
    double mx = 0.0;
    for (uint32_t x = 0; x < mask.nx; ++x)
        for (uint32_t yy = 0; yy < wy; ++yy) {
            double acc = 0.0;
            for (uint32_t l = 0; l < nlam; ++l) {
                int64_t y = int64_t(yy) - int64_t(d) * l;
                if (y < 0 || y >= int64_t(mask.ny)) continue;
                double hm = 0.5 * mask.at(x, uint32_t(y));
                acc += hm * hm;
            }
            mx = std::max(mx, acc);
        }
    return mx > 0.0 ? 1.0 / mx : 1.0;
}

HyperspectralCube classical_stage(const HyperspectralCube& x_n, const CASSIMeasurement& yc,
                                  const RGBImage& yr, const NoiseMap& noise_map,
                                  const CodedMask& mask, const SpectralResponse& response,
                                  uint32_t d, const ReconConfig& cfg) {
    require(x_n.nx == yc.nx && x_n.ny == yc.ny && x_n.nlam == yc.nlam, "dim",
            "state dims do not match measurement");
    NoiseSpec quiet{0.0, 0};
    double step = cfg.step_size > 0.0 ? cfg.step_size : default_step_size(mask, d, x_n.nlam);

    // r = Yc - Phi0(noise_map) - Phi0(x_n)
    CASSIMeasurement fx = cassi_forward(x_n, mask, d, quiet);
    std::vector<double> r(yc.data.size());
    for (size_t i = 0; i < r.size(); ++i) r[i] = yc.data[i] - fx.data[i];
    if (!noise_map.data.empty()) {
        HyperspectralCube nm(x_n.nx, x_n.ny, x_n.nlam);
        nm.data = noise_map.data;
        CASSIMeasurement fn = cassi_forward(nm, mask, d, quiet);
        for (size_t i = 0; i < r.size(); ++i) r[i] -= fn.data[i];
    }
    CASSIMeasurement rm(yc.nx, yc.ny, yc.nlam, d);
    rm.data = std::move(r);
    HyperspectralCube upd = cassi_adjoint(rm, mask, d);
    for (double& v : upd.data) v *= step;

    if (cfg.use_rgb) {
        HyperspectralCube anchor = backproject_rgb(yr, response);
        for (size_t i = 0; i < upd.data.size(); ++i)
            upd.data[i] += cfg.rgb_beta * (anchor.data[i] - x_n.data[i]);
    }
    HyperspectralCube den = tv_denoise(upd, cfg.tv_weight, cfg.tv_iters);
    for (size_t i = 0; i < den.data.size(); ++i) den.data[i] += x_n.data[i];
    return den;
}

HyperspectralCube reconstruct_classical(const CASSIMeasurement& yc, const RGBImage& yr,
                                        const CodedMask& mask, const SpectralResponse& response,
                                        uint32_t d, const ReconConfig& cfg) {
    require(cfg.stages >= 1, "param", "stages must be >= 1");
    require(cfg.tv_weight > 0.0, "param", "tv_weight must be > 0");
    NoiseMap nm;  // empty = zero map
    if (cfg.use_noise_estimate)
        nm = estimate_noise_analytic(yc, yr, mask, response, d);
    HyperspectralCube x = backproject_cassi(yc, mask, d);
    for (int s = 0; s < cfg.stages; ++s)
        x = classical_stage(x, yc, yr, nm, mask, response, d, cfg);
    for (double& v : x.data) v = std::clamp(v, 0.0, 1.0);
    return x;
}

}  // namespace dmdc
