#include "dmdc/estimation.hpp"

#include "dmdc/classical.hpp"
#include "dmdc/tv.hpp"

#include <algorithm>
#include <cmath>


namespace dmdc {

// solves A x = b in place for symmetric positive definite A (n x n, row-major)
static void spd_solve(std::vector<double>& a, std::vector<double>& b, uint32_t n,
                      uint32_t nrhs) {
    // unpivoted Cholesky; A carries a ridge so it is safely positive definite
    for (uint32_t k = 0; k < n; ++k) {
        double piv = a[k * n + k];
        for (uint32_t j = 0; j < k; ++j) piv -= a[k * n + j] * a[k * n + j];
        require(piv > 0.0, "numeric", "spectral lift system is not positive definite");
        piv = std::sqrt(piv);
        a[k * n + k] = piv;
        for (uint32_t i = k + 1; i < n; ++i) {
            double s = a[i * n + k];
            for (uint32_t j = 0; j < k; ++j) s -= a[i * n + j] * a[k * n + j];
            a[i * n + k] = s / piv;
        }
    }
    for (uint32_t r = 0; r < nrhs; ++r) {
        for (uint32_t i = 0; i < n; ++i) {
            double s = b[i * nrhs + r];
            for (uint32_t j = 0; j < i; ++j) s -= a[i * n + j] * b[j * nrhs + r];
            b[i * nrhs + r] = s / a[i * n + i];
        }
        for (uint32_t i = n; i-- > 0;) {
            double s = b[i * nrhs + r];
            for (uint32_t j = i + 1; j < n; ++j) s -= a[j * n + i] * b[j * nrhs + r];
            b[i * nrhs + r] = s / a[i * n + i];
        }
    }
}

// 3 -> nlam lift matrix for one pixel's spectrum: the minimizer of
//   || Yr - 1/2 W x ||^2 + mu || D2 x ||^2 + eps || x ||^2
// with D2 the second difference along the spectrum. The smoothness term is what
// makes three broadband samples recover more than three degrees of freedom.
static std::vector<double> rgb_lift_matrix(const SpectralResponse& resp) {
    const uint32_t n = resp.nlam;
    const double mu = 0.05, eps = 1e-6;
    std::vector<double> a(size_t(n) * n, 0.0);
    for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int c = 0; c < 3; ++c) s += resp.at(c, i) * resp.at(c, j);
            a[i * n + j] = 0.25 * s;
        }
    for (uint32_t i = 0; i + 2 < n; ++i) {
        const uint32_t idx[3] = {i, i + 1, i + 2};
        const double coef[3] = {1.0, -2.0, 1.0};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                a[idx[p] * n + idx[q]] += mu * coef[p] * coef[q];
    }
    for (uint32_t i = 0; i < n; ++i) a[i * n + i] += eps;
    std::vector<double> lift(size_t(n) * 3);
    for (uint32_t l = 0; l < n; ++l)
        for (int c = 0; c < 3; ++c) lift[l * 3 + c] = 0.5 * resp.at(c, l);
    spd_solve(a, lift, n, 3);
    // re-projecting the lifted spectrum must reproduce the rgb input exactly,
    // so fold the inverse of the 3x3 re-projection into the lift
    std::vector<double> proj(9, 0.0);
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) {
            double s = 0.0;
            for (uint32_t l = 0; l < n; ++l) s += 0.5 * resp.at(c, l) * lift[l * 3 + k];
            proj[c * 3 + k] = s;
        }
    std::vector<double> rows(size_t(3) * n);
    for (uint32_t l = 0; l < n; ++l)
        for (int c = 0; c < 3; ++c) rows[c * n + l] = lift[l * 3 + c];
    spd_solve(proj, rows, 3, n);
    for (uint32_t l = 0; l < n; ++l)
        for (int c = 0; c < 3; ++c) lift[l * 3 + c] = rows[c * n + l];
    return lift;
}

HyperspectralCube backproject_rgb(const RGBImage& yr, const SpectralResponse& response) {
    const std::vector<double> lift = rgb_lift_matrix(response);
    HyperspectralCube out(yr.nx, yr.ny, response.nlam, 0.0);
    const size_t plane_sz = size_t(yr.nx) * yr.ny;
    for (uint32_t l = 0; l < response.nlam; ++l) {
        double* plane = out.data.data() + size_t(l) * plane_sz;
        for (int c = 0; c < 3; ++c) {
            const double w = lift[l * 3 + c];
            const double* yc = yr.data.data() + size_t(c) * plane_sz;
            for (size_t i = 0; i < plane_sz; ++i) plane[i] += w * yc[i];
        }
    }
    return out;
}

HyperspectralCube backproject_cassi(const CASSIMeasurement& yc, const CodedMask& mask,
                                    uint32_t d) {
    HyperspectralCube num = cassi_adjoint(yc, mask, d);
    // Phi^T Phi 1: push the all-ones cube through the noiseless model and back
    HyperspectralCube ones(yc.nx, yc.ny, yc.nlam, 1.0);
    NoiseSpec quiet{0.0, 0};
    HyperspectralCube den = cassi_adjoint(cassi_forward(ones, mask, d, quiet), mask, d);
    for (size_t i = 0; i < num.data.size(); ++i) num.data[i] /= den.data[i] + 1e-6;
    return num;
}

double rgb_noise_sigma(const RGBImage& yr) {
    // 3x3 high-pass [1 -2 1; -2 4 -2; 1 -2 1]: zero on linear ramps, and on
    // iid gaussian noise its output is gaussian with standard deviation
    // 6 sigma. The median of |output| over the image gives a robust scale.
    std::vector<double> mags;
    if (yr.nx >= 3 && yr.ny >= 3)
        mags.reserve(size_t(3) * (yr.nx - 2) * (yr.ny - 2));
    for (uint32_t c = 0; c < 3; ++c)
        for (uint32_t x = 1; x + 1 < yr.nx; ++x)
            for (uint32_t y = 1; y + 1 < yr.ny; ++y) {
                const double v = 4.0 * yr.at(c, x, y) -
                                 2.0 * (yr.at(c, x - 1, y) + yr.at(c, x + 1, y) +
                                        yr.at(c, x, y - 1) + yr.at(c, x, y + 1)) +
                                 yr.at(c, x - 1, y - 1) + yr.at(c, x - 1, y + 1) +
                                 yr.at(c, x + 1, y - 1) + yr.at(c, x + 1, y + 1);
                mags.push_back(std::abs(v));
            }
    if (mags.empty()) return 0.0;
    const size_t mid = mags.size() / 2;
    std::nth_element(mags.begin(), mags.begin() + mid, mags.end());
    // median(|N(0,s)|) = 0.6745 s
    return mags[mid] / (0.6745 * 6.0);
}

NoiseMap estimate_noise_analytic(const CASSIMeasurement& yc, const RGBImage& yr,
                                 const CodedMask& mask, const SpectralResponse& response,
                                 uint32_t d) {
    require(yr.nx == yc.nx && yr.ny == yc.ny, "dim", "RGB and CASSI dims disagree");
    require(response.nlam == yc.nlam, "dim", "response channels do not match measurement");
    // Noise on the rgb arm is what actually poisons the joint solve: the
    // spectral lift amplifies it and every stage re-anchors on the result.
    // That noise is estimable, because the scene is spatially structured while
    // the lifted noise is not, and the uncoded arm gives a clean read of the
    // noise level. The map is scaled so that subtracting its noiseless forward
    // from the coded residual cancels the anchor's noise term inside a stage:
    //   step * Phi^T Phi nm  ~=  beta * (lifted-noise)
    // inverted voxelwise with the same diagonal and guard the back-projection
    // uses. A residual-mean term keeps a pure coded-arm bias visible.
    HyperspectralCube lifted = backproject_rgb(yr, response);
    const double sigma = rgb_noise_sigma(yr);
    HyperspectralCube anchor_noise(yc.nx, yc.ny, yc.nlam, 0.0);
    if (sigma > 1e-8) {
        HyperspectralCube smooth = tv_denoise(lifted, 4.0 * sigma, 20);
        for (size_t i = 0; i < anchor_noise.data.size(); ++i)
            anchor_noise.data[i] = lifted.data[i] - smooth.data[i];
    }
    NoiseSpec quiet{0.0, 0};
    CASSIMeasurement pred = cassi_forward(lifted, mask, d, quiet);
    double resid_mean = 0.0;
    for (size_t i = 0; i < yc.data.size(); ++i) resid_mean += yc.data[i] - pred.data[i];
    resid_mean /= double(yc.data.size());

    HyperspectralCube ones(yc.nx, yc.ny, yc.nlam, 1.0);
    HyperspectralCube den = cassi_adjoint(cassi_forward(ones, mask, d, quiet), mask, d);
    const double beta = 0.5;  // rgb anchor strength the solver defaults to
    const double scale = beta / default_step_size(mask, d, yc.nlam);
    NoiseMap out(yc.nx, yc.ny, yc.nlam);
    for (size_t i = 0; i < out.data.size(); ++i) {
        // voxels the coded arm never sees cannot carry a correction
        out.data[i] = den.data[i] < 1e-3
                          ? 0.0
                          : (scale * anchor_noise.data[i] + resid_mean) / den.data[i];
    }
    return out;
}

}  // namespace dmdc
