#include "dmdc/optics.hpp"

#include <cmath>

namespace dmdc {

std::vector<std::string> validate_measurement(const CASSIMeasurement& m) {
    std::vector<std::string> v;
    if (m.nx < 1 || m.ny < 1) v.push_back("dims must be at least 1x1");
    if (m.nlam < 1) v.push_back("nlam >= 1");
    if (m.nlam >= 1 && m.wy != m.ny + m.d * (m.nlam - 1))
        v.push_back("wy != ny + d*(nlam-1)");
    if (m.data.size() != size_t(m.nx) * m.wy) { v.push_back("data length != nx*wy"); return v; }
    for (double x : m.data)
        if (!std::isfinite(x)) { v.push_back("non-finite value"); break; }
    return v;
}

RGBImage rgb_project(const HyperspectralCube& cube, const SpectralResponse& response,
                     const NoiseSpec& noise) {
    require(response.nlam == cube.nlam, "dim",
            "response has " + std::to_string(response.nlam) + " channels, cube has " +
                std::to_string(cube.nlam));
    RGBImage out(cube.nx, cube.ny);
    for (int c = 0; c < 3; ++c)
        for (uint32_t l = 0; l < cube.nlam; ++l) {
            double w = 0.5 * response.at(c, l);
            if (w == 0.0) continue;
            const double* plane = cube.data.data() + size_t(l) * cube.nx * cube.ny;
            double* oc = out.data.data() + size_t(c) * cube.nx * cube.ny;
            for (size_t i = 0; i < size_t(cube.nx) * cube.ny; ++i) oc[i] += w * plane[i];
        }
    if (noise.sigma > 0.0) {
        Rng rng(noise.seed);
        for (double& v : out.data) v += noise.sigma * rng.gaussian();
    }
    return out;
}

HyperspectralCube mask_modulate(const HyperspectralCube& cube, const CodedMask& mask) {
    require(mask.nx == cube.nx && mask.ny == cube.ny, "dim",
            "mask dims do not match cube dims");
    HyperspectralCube out(cube.nx, cube.ny, cube.nlam);
    for (uint32_t l = 0; l < cube.nlam; ++l) {
        const double* plane = cube.data.data() + size_t(l) * cube.nx * cube.ny;
        double* op = out.data.data() + size_t(l) * cube.nx * cube.ny;
        for (size_t i = 0; i < size_t(cube.nx) * cube.ny; ++i)
            op[i] = 0.5 * mask.data[i] * plane[i];
    }
    return out;
}

HyperspectralCube disperse(const HyperspectralCube& cube, uint32_t d) {
    uint32_t wy = cube.ny + d * (cube.nlam - 1);
    HyperspectralCube out(cube.nx, wy, cube.nlam, 0.0);
    // channel l shifts right by d*l columns; rows copy contiguously
    for (uint32_t l = 0; l < cube.nlam; ++l)
        for (uint32_t x = 0; x < cube.nx; ++x) {
            const double* src = cube.data.data() + (size_t(l) * cube.nx + x) * cube.ny;
            double* dst = out.data.data() + (size_t(l) * cube.nx + x) * wy + size_t(d) * l;
            for (uint32_t y = 0; y < cube.ny; ++y) dst[y] = src[y];
        }
    return out;
}

CASSIMeasurement integrate(const HyperspectralCube& sheared, uint32_t ny_orig,
                           uint32_t d, const NoiseSpec& noise) {
    require(sheared.ny == ny_orig + d * (sheared.nlam - 1), "dim",
            "sheared volume width does not match ny + d*(nlam-1)");
    CASSIMeasurement out(sheared.nx, ny_orig, sheared.nlam, d);
    for (uint32_t l = 0; l < sheared.nlam; ++l) {
        const double* plane = sheared.data.data() + size_t(l) * sheared.nx * sheared.ny;
        for (size_t i = 0; i < size_t(sheared.nx) * sheared.ny; ++i) out.data[i] += plane[i];
    }
    if (noise.sigma > 0.0) {
        Rng rng(noise.seed);
        for (double& v : out.data) v += noise.sigma * rng.gaussian();
    }
    return out;
}

CASSIMeasurement cassi_forward(const HyperspectralCube& cube, const CodedMask& mask,
                               uint32_t d, const NoiseSpec& noise) {
    return integrate(disperse(mask_modulate(cube, mask), d), cube.ny, d, noise);
}

HyperspectralCube cassi_adjoint(const CASSIMeasurement& meas, const CodedMask& mask,
                                uint32_t d) {
    require(mask.nx == meas.nx && mask.ny == meas.ny, "dim",
            "mask dims do not match measurement dims");
    require(d == meas.d, "dim", "dispersion step does not match measurement");
    HyperspectralCube out(meas.nx, meas.ny, meas.nlam);
    for (uint32_t l = 0; l < meas.nlam; ++l)
        for (uint32_t x = 0; x < meas.nx; ++x) {
            const double* src = meas.data.data() + size_t(x) * meas.wy + size_t(d) * l;
            double* dst = out.data.data() + (size_t(l) * meas.nx + x) * meas.ny;
            const double* mrow = mask.data.data() + size_t(x) * meas.ny;
            for (uint32_t y = 0; y < meas.ny; ++y) dst[y] = 0.5 * mrow[y] * src[y];
        }
    return out;
}

DualMeasurement dual_measure(const HyperspectralCube& cube, const CodedMask& mask,
                             const SpectralResponse& response, uint32_t d,
                             const NoiseSpec& noise) {
    DualMeasurement out;
    NoiseSpec nr{noise.sigma, derive_seed(noise.seed, 'R')};
    NoiseSpec nc{noise.sigma, derive_seed(noise.seed, 'C')};
    out.rgb = rgb_project(cube, response, nr);
    out.cassi = cassi_forward(cube, mask, d, nc);
    return out;
}

std::vector<double> dense_operator(const CodedMask& mask, uint32_t d,
                                   uint32_t nx, uint32_t ny, uint32_t nlam) {
    require(mask.nx == nx && mask.ny == ny, "dim", "mask dims do not match requested dims");
    size_t ncols = size_t(nx) * ny * nlam;
    require(ncols <= 65536, "size-cap",
            "dense operator limited to nx*ny*nlam <= 65536 entries, got " +
                std::to_string(ncols));
    uint32_t wy = ny + d * (nlam - 1);
    size_t nrows = size_t(nx) * wy;
    std::vector<double> mat(nrows * ncols, 0.0);
    HyperspectralCube basis(nx, ny, nlam, 0.0);
    NoiseSpec quiet{0.0, 0};
    for (size_t j = 0; j < ncols; ++j) {
        basis.data[j] = 1.0;
        CASSIMeasurement col = cassi_forward(basis, mask, d, quiet);
        basis.data[j] = 0.0;
        for (size_t i = 0; i < nrows; ++i)
            if (col.data[i] != 0.0) mat[i * ncols + j] = col.data[i];
    }
    return mat;
}

}  // namespace dmdc
