#include "dmdc/tv.hpp"

#include <algorithm>
#include <cmath>

namespace dmdc {

// Chambolle's dual projection for the ROF model, one 2D field per channel.
// p is the dual variable (two components per pixel); u = f - w*div(p).
HyperspectralCube tv_denoise(const HyperspectralCube& cube, double tv_weight, int tv_iters) {
    require(tv_weight > 0.0, "param", "tv_weight must be > 0");
    require(tv_iters >= 1, "param", "tv_iters must be >= 1");
    const uint32_t nx = cube.nx, ny = cube.ny;
    const size_t npix = size_t(nx) * ny;
    const double tau = 0.25;  // stable for the 4-neighbour divergence

    double lo = cube.data[0], hi = cube.data[0];
    for (double v : cube.data) { lo = std::min(lo, v); hi = std::max(hi, v); }

    HyperspectralCube out(nx, ny, cube.nlam);
    std::vector<double> px(npix), py(npix), div(npix), gx(npix), gy(npix);

    for (uint32_t l = 0; l < cube.nlam; ++l) {
        const double* f = cube.data.data() + size_t(l) * npix;
        std::fill(px.begin(), px.end(), 0.0);
        std::fill(py.begin(), py.end(), 0.0);
        std::fill(div.begin(), div.end(), 0.0);

        for (int it = 0; it < tv_iters; ++it) {
            // gradient of (div p - f/w), forward differences, Neumann border
            for (uint32_t x = 0; x < nx; ++x)
                for (uint32_t y = 0; y < ny; ++y) {
                    size_t i = size_t(x) * ny + y;
                    double c = div[i] - f[i] / tv_weight;
                    gx[i] = (x + 1 < nx) ? (div[i + ny] - f[i + ny] / tv_weight) - c : 0.0;
                    gy[i] = (y + 1 < ny) ? (div[i + 1] - f[i + 1] / tv_weight) - c : 0.0;
                }
            for (size_t i = 0; i < npix; ++i) {
                double denom = 1.0 + tau * std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
                px[i] = (px[i] + tau * gx[i]) / denom;
                py[i] = (py[i] + tau * gy[i]) / denom;
            }
            // divergence with the matching adjoint stencil
            for (uint32_t x = 0; x < nx; ++x)
                for (uint32_t y = 0; y < ny; ++y) {
                    size_t i = size_t(x) * ny + y;
                    double dxv = px[i] - ((x > 0) ? px[i - ny] : 0.0);
                    if (x + 1 == nx) dxv = (x > 0) ? -px[i - ny] : 0.0;
                    double dyv = py[i] - ((y > 0) ? py[i - 1] : 0.0);
                    if (y + 1 == ny) dyv = (y > 0) ? -py[i - 1] : 0.0;
                    div[i] = dxv + dyv;
                }
        }
        double* o = out.data.data() + size_t(l) * npix;
        for (size_t i = 0; i < npix; ++i)
            o[i] = std::clamp(f[i] - tv_weight * div[i], lo, hi);
    }
    return out;
}

}  // namespace dmdc
