#include "dmdc/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "dmdc/common.hpp"

namespace dmdc {

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 1e-4;   // (0.01 * 1)^2
constexpr double kC2 = 9e-4;   // (0.03 * 1)^2
constexpr double kTruthGuard = 1e-4;

void check_pair(const HyperspectralCube& a, const HyperspectralCube& b,
                const char* op) {
    auto ba = validate_cube(a);
    require(ba.empty(), "invalid",
            std::string(op) + ": invalid first cube: " + (ba.empty() ? "" : ba.front()));
    auto bb = validate_cube(b);
    require(bb.empty(), "invalid",
            std::string(op) + ": invalid second cube: " + (bb.empty() ? "" : bb.front()));
    require(a.nx == b.nx && a.ny == b.ny && a.nlam == b.nlam, "shape",
            std::string(op) + ": cube shapes differ");
}

double mse(const HyperspectralCube& a, const HyperspectralCube& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / double(a.data.size());
}

const std::vector<double>& gauss_window() {
    static const std::vector<double> w = [] {
        std::vector<double> g(kWin * kWin);
        const double sigma = 1.5;
        double total = 0.0;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                const double dy = i - (kWin - 1) / 2.0;
                const double dx = j - (kWin - 1) / 2.0;
                g[size_t(i) * kWin + j] =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                total += g[size_t(i) * kWin + j];
            }
        for (double& v : g) v /= total;
        return g;
    }();
    return w;
}

}  // namespace

double psnr(const HyperspectralCube& a, const HyperspectralCube& b) {
    check_pair(a, b, "psnr");
    const double m = mse(a, b);
    if (m == 0.0) return 100.0;
    return std::min(10.0 * std::log10(1.0 / m), 100.0);
}

double ssim(const HyperspectralCube& a, const HyperspectralCube& b) {
    check_pair(a, b, "ssim");
    require(a.nx >= kWin && a.ny >= kWin, "shape",
            "ssim needs both spatial dims >= 11");
    const auto& w = gauss_window();
    double channel_sum = 0.0;
    for (uint32_t l = 0; l < a.nlam; ++l) {
        double pos_sum = 0.0;
        size_t count = 0;
        for (uint32_t x0 = 0; x0 + kWin <= a.nx; ++x0)
            for (uint32_t y0 = 0; y0 + kWin <= a.ny; ++y0) {
                double ma = 0.0, mb = 0.0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        const double wi = w[size_t(i) * kWin + j];
                        ma += wi * a.at(l, x0 + i, y0 + j);
                        mb += wi * b.at(l, x0 + i, y0 + j);
                    }
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        const double wi = w[size_t(i) * kWin + j];
                        const double da = a.at(l, x0 + i, y0 + j) - ma;
                        const double db = b.at(l, x0 + i, y0 + j) - mb;
                        va += wi * da * da;
                        vb += wi * db * db;
                        cov += wi * da * db;
                    }
                pos_sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                           ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
                ++count;
            }
        channel_sum += pos_sum / double(count);
    }
    return channel_sum / double(a.nlam);
}

double mrae(const HyperspectralCube& pred, const HyperspectralCube& truth) {
    check_pair(pred, truth, "mrae");
    double s = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        if (truth.data[i] < kTruthGuard) continue;
        s += std::abs(pred.data[i] - truth.data[i]) / truth.data[i];
        ++count;
    }
    require(count > 0, "metric",
            "mrae undefined: every reference voxel is below the 1e-4 guard");
    return s / double(count);
}

double rmse(const HyperspectralCube& a, const HyperspectralCube& b) {
    check_pair(a, b, "rmse");
    return std::sqrt(mse(a, b));
}

MetricReport evaluate(const HyperspectralCube& pred, const HyperspectralCube& truth) {
    MetricReport r;
    r.psnr_db = psnr(pred, truth);
    r.ssim = ssim(pred, truth);
    r.mrae = mrae(pred, truth);
    r.rmse = rmse(pred, truth);
    return r;
}

std::vector<double> spectral_curve(const HyperspectralCube& cube, uint32_t x0,
                                   uint32_t y0, uint32_t x1, uint32_t y1) {
    auto bad = validate_cube(cube);
    require(bad.empty(), "invalid",
            "spectral_curve: invalid cube: " + (bad.empty() ? "" : bad.front()));
    require(x0 < x1 && x1 <= cube.nx && y0 < y1 && y1 <= cube.ny, "param",
            "spectral_curve region must be non-empty and inside the cube");
    std::vector<double> out(cube.nlam, 0.0);
    const double inv = 1.0 / (double(x1 - x0) * double(y1 - y0));
    for (uint32_t l = 0; l < cube.nlam; ++l) {
        double s = 0.0;
        for (uint32_t x = x0; x < x1; ++x)
            for (uint32_t y = y0; y < y1; ++y) s += cube.at(l, x, y);
        out[l] = s * inv;
    }
    return out;
}

std::string spectral_curve_csv(const std::vector<double>& curve) {
    std::string out = "channel,value\n";
    char buf[64];
    for (size_t l = 0; l < curve.size(); ++l) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", l, curve[l]);
        out += buf;
    }
    return out;
}

}  // namespace dmdc
