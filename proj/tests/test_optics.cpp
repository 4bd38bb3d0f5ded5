#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "dmdc/common.hpp"
#include "dmdc/cube.hpp"
#include "dmdc/estimation.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/metrics.hpp"
#include "dmdc/optics.hpp"
#include "dmdc/response.hpp"

using namespace dmdc;

namespace {

const NoiseSpec kQuiet{0.0, 0};

template <class F>
std::string error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// Reference system matrix built from the measurement equation alone, by
// direct index arithmetic: detector pixel (x, y + d*l) accumulates
// 1/2 M(x,y) X(l,x,y). Shares no code with the library implementation.
struct DenseRef {
    uint32_t nx, ny, nlam, d, wy;
    std::vector<double> a;  // (nx*wy) rows by (nlam*nx*ny) cols

    DenseRef(const CodedMask& mask, uint32_t d_, uint32_t nlam_)
        : nx(mask.nx), ny(mask.ny), nlam(nlam_), d(d_), wy(mask.ny + d_ * (nlam_ - 1)) {
        size_t rows = size_t(nx) * wy, cols = size_t(nlam) * nx * ny;
        a.assign(rows * cols, 0.0);
        for (uint32_t l = 0; l < nlam; ++l)
            for (uint32_t x = 0; x < nx; ++x)
                for (uint32_t y = 0; y < ny; ++y) {
                    size_t row = size_t(x) * wy + (y + d * l);
                    size_t col = (size_t(l) * nx + x) * ny + y;
                    a[row * cols + col] = 0.5 * mask.at(x, y);
                }
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        size_t rows = size_t(nx) * wy, cols = a.size() / rows;
        std::vector<double> out(rows, 0.0);
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) out[r] += a[r * cols + c] * x[c];
        return out;
    }

    std::vector<double> apply_t(const std::vector<double>& y) const {
        size_t rows = size_t(nx) * wy, cols = a.size() / rows;
        std::vector<double> out(cols, 0.0);
        for (size_t r = 0; r < rows; ++r)
            for (size_t c = 0; c < cols; ++c) out[c] += a[r * cols + c] * y[r];
        return out;
    }
};

HyperspectralCube random_cube(uint32_t nx, uint32_t ny, uint32_t nlam, uint64_t seed) {
    HyperspectralCube c(nx, ny, nlam);
    Rng r(seed);
    for (double& v : c.data) v = r.uniform();
    return c;
}

double rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

double vec_sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

// Gauss-Jordan with partial pivoting; deliberately a different algorithm from
// the library's factorization so the lift oracle is independent.
std::vector<double> gj_solve(std::vector<double> a, std::vector<double> b,
                             uint32_t n, uint32_t nrhs) {
    for (uint32_t col = 0; col < n; ++col) {
        uint32_t piv = col;
        for (uint32_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (piv != col) {
            for (uint32_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[piv * n + k]);
            for (uint32_t k = 0; k < nrhs; ++k)
                std::swap(b[col * nrhs + k], b[piv * nrhs + k]);
        }
        double inv = 1.0 / a[col * n + col];
        for (uint32_t k = 0; k < n; ++k) a[col * n + k] *= inv;
        for (uint32_t k = 0; k < nrhs; ++k) b[col * nrhs + k] *= inv;
        for (uint32_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = a[r * n + col];
            if (f == 0.0) continue;
            for (uint32_t k = 0; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            for (uint32_t k = 0; k < nrhs; ++k) b[r * nrhs + k] -= f * b[col * nrhs + k];
        }
    }
    return b;
}

}  // namespace

// ---- forward operator against the reference matrix -------------------------

TEST_CASE("forward and adjoint match the reference matrix over random instances") {
    int inst = 0;
    for (uint32_t d : {0u, 1u, 2u})
        for (int rep = 0; rep < 3; ++rep) {
            uint64_t seed = 100 * d + rep;
            Rng dims(seed);
            uint32_t nx = 3 + uint32_t(dims.uniform() * 9);
            uint32_t ny = 3 + uint32_t(dims.uniform() * 9);
            uint32_t nlam = 2 + uint32_t(dims.uniform() * 4);
            CodedMask mask = (rep % 2 == 0) ? random_mask(nx, ny, seed + 1)
                                            : normal_mask(nx, ny, seed + 1);
            DenseRef ref(mask, d, nlam);

            HyperspectralCube x = random_cube(nx, ny, nlam, seed + 2);
            CASSIMeasurement fx = cassi_forward(x, mask, d, kQuiet);
            CHECK_LT(rel_err(fx.data, ref.apply(x.data)), 1e-12);

            CASSIMeasurement y(nx, ny, nlam, d);
            Rng ry(seed + 3);
            for (double& v : y.data) v = ry.uniform() - 0.5;
            HyperspectralCube aty = cassi_adjoint(y, mask, d);
            CHECK_LT(rel_err(aty.data, ref.apply_t(y.data)), 1e-12);
            ++inst;
        }
    CHECK_EQ(inst, 9);
}

TEST_CASE("dense_operator reproduces the reference matrix entrywise") {
    CodedMask mask = normal_mask(5, 4, 17);
    for (uint32_t d : {0u, 1u, 2u}) {
        DenseRef ref(mask, d, 3);
        std::vector<double> lib = dense_operator(mask, d, 5, 4, 3);
        REQUIRE_EQ(lib.size(), ref.a.size());
        for (size_t i = 0; i < lib.size(); ++i) CHECK_EQ(lib[i], ref.a[i]);
    }
}

TEST_CASE("dense_operator refuses oversized instances") {
    CodedMask mask(64, 64, 1.0);
    CHECK_EQ(error_code_of([&] { dense_operator(mask, 1, 64, 64, 17); }), "size-cap");
    CHECK_EQ(error_code_of([&] { dense_operator(mask, 1, 8, 8, 4); }), "dim");
}

TEST_CASE("adjoint satisfies the inner product identity") {
    for (int rep = 0; rep < 20; ++rep) {
        Rng r(500 + rep);
        uint32_t nx = 4 + uint32_t(r.uniform() * 12);
        uint32_t ny = 4 + uint32_t(r.uniform() * 12);
        uint32_t nlam = 2 + uint32_t(r.uniform() * 6);
        uint32_t d = uint32_t(r.uniform() * 3);
        CodedMask mask = normal_mask(nx, ny, 600 + rep);
        HyperspectralCube x = random_cube(nx, ny, nlam, 700 + rep);
        CASSIMeasurement y(nx, ny, nlam, d);
        for (double& v : y.data) v = r.uniform() - 0.5;

        CASSIMeasurement fx = cassi_forward(x, mask, d, kQuiet);
        HyperspectralCube aty = cassi_adjoint(y, mask, d);
        double lhs = 0.0, rhs = 0.0, nfx = 0.0, nyv = 0.0;
        for (size_t i = 0; i < fx.data.size(); ++i) {
            lhs += fx.data[i] * y.data[i];
            nfx += fx.data[i] * fx.data[i];
            nyv += y.data[i] * y.data[i];
        }
        for (size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * aty.data[i];
        CHECK_LT(std::abs(lhs - rhs) / (std::sqrt(nfx) * std::sqrt(nyv)), 1e-6);
    }
}

TEST_CASE("forward model is linear") {
    CodedMask mask = normal_mask(8, 8, 1);
    HyperspectralCube x1 = random_cube(8, 8, 4, 2), x2 = random_cube(8, 8, 4, 3);
    HyperspectralCube mix(8, 8, 4);
    for (size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = 1.5 * x1.data[i] + 0.25 * x2.data[i];
    CASSIMeasurement f1 = cassi_forward(x1, mask, 1, kQuiet);
    CASSIMeasurement f2 = cassi_forward(x2, mask, 1, kQuiet);
    CASSIMeasurement fm = cassi_forward(mix, mask, 1, kQuiet);
    for (size_t i = 0; i < fm.data.size(); ++i)
        CHECK_EQ(fm.data[i], doctest::Approx(1.5 * f1.data[i] + 0.25 * f2.data[i])
                                 .epsilon(1e-12));
}

// ---- stage-by-stage behavior ----------------------------------------------

TEST_CASE("measurement width follows the dispersion geometry") {
    for (uint32_t ny : {5u, 8u, 31u})
        for (uint32_t d : {0u, 1u, 2u, 3u})
            for (uint32_t nlam : {2u, 6u, 9u}) {
                HyperspectralCube c = random_cube(4, ny, nlam, ny + d + nlam);
                CodedMask mask(4, ny, 1.0);
                CASSIMeasurement m = cassi_forward(c, mask, d, kQuiet);
                CHECK_EQ(m.wy, ny + d * (nlam - 1));
                CHECK(validate_measurement(m).empty());
            }
}

TEST_CASE("validate_measurement flags broken geometry") {
    CASSIMeasurement m(4, 5, 3, 1);
    CHECK(validate_measurement(m).empty());
    m.wy = 6;  // truth is 7
    m.data.assign(size_t(4) * 6, 0.0);
    CHECK_FALSE(validate_measurement(m).empty());
    m = CASSIMeasurement(4, 5, 3, 1);
    m.data[3] = std::nan("");
    CHECK_FALSE(validate_measurement(m).empty());
}

TEST_CASE("disperse shifts channel l by d*l columns") {
    const uint32_t nx = 3, ny = 4, nlam = 3, d = 2;
    for (uint32_t l = 0; l < nlam; ++l)
        for (uint32_t x = 0; x < nx; ++x)
            for (uint32_t y = 0; y < ny; ++y) {
                HyperspectralCube c(nx, ny, nlam);
                c.at(l, x, y) = 2.5;
                HyperspectralCube s = disperse(c, d);
                CHECK_EQ(s.ny, ny + d * (nlam - 1));
                double total = 0.0;
                for (double v : s.data) total += v;
                CHECK_EQ(total, 2.5);  // a shift moves mass, never creates it
                CHECK_EQ(s.at(l, x, y + d * l), 2.5);
            }
}

TEST_CASE("mask_modulate halves and gates the cube") {
    CodedMask mask = normal_mask(6, 5, 3);
    HyperspectralCube c = random_cube(6, 5, 4, 4);
    HyperspectralCube m = mask_modulate(c, mask);
    for (uint32_t l = 0; l < 4; ++l)
        for (uint32_t x = 0; x < 6; ++x)
            for (uint32_t y = 0; y < 5; ++y)
                CHECK_EQ(m.at(l, x, y), 0.5 * mask.at(x, y) * c.at(l, x, y));

    CodedMask wrong(5, 5, 1.0);
    CHECK_EQ(error_code_of([&] { mask_modulate(c, wrong); }), "dim");
}

TEST_CASE("integrate collapses channels by summation") {
    HyperspectralCube sheared = random_cube(4, 9, 3, 5);  // width 9 = 5 + 2*2
    CASSIMeasurement m = integrate(sheared, 5, 2, kQuiet);
    for (uint32_t x = 0; x < 4; ++x)
        for (uint32_t y = 0; y < 9; ++y) {
            double want = 0.0;
            for (uint32_t l = 0; l < 3; ++l) want += sheared.at(l, x, y);
            CHECK_EQ(m.at(x, y), doctest::Approx(want).epsilon(1e-15));
        }
    CHECK_EQ(error_code_of([&] { integrate(sheared, 6, 2, kQuiet); }), "dim");
}

TEST_CASE("rgb projection matches the response-weighted sum") {
    SpectralResponse resp = default_spectral_response(5);
    HyperspectralCube c = random_cube(4, 3, 5, 6);
    RGBImage g = rgb_project(c, resp, kQuiet);
    for (int ch = 0; ch < 3; ++ch)
        for (uint32_t x = 0; x < 4; ++x)
            for (uint32_t y = 0; y < 3; ++y) {
                double want = 0.0;
                for (uint32_t l = 0; l < 5; ++l)
                    want += 0.5 * resp.at(ch, l) * c.at(l, x, y);
                CHECK_EQ(g.at(ch, x, y), doctest::Approx(want).epsilon(1e-14));
            }
    SpectralResponse wrong = default_spectral_response(6);
    CHECK_EQ(error_code_of([&] { rgb_project(c, wrong, kQuiet); }), "dim");
}

// ---- noise streams ---------------------------------------------------------

TEST_CASE("measurement noise is deterministic per seed and separated per arm") {
    HyperspectralCube c = random_cube(8, 8, 4, 7);
    CodedMask mask = random_mask(8, 8, 8);
    SpectralResponse resp = default_spectral_response(4);
    NoiseSpec n{0.05, 42};

    CASSIMeasurement a = cassi_forward(c, mask, 1, n);
    CASSIMeasurement b = cassi_forward(c, mask, 1, n);
    CHECK(a.data == b.data);
    CASSIMeasurement c2 = cassi_forward(c, mask, 1, NoiseSpec{0.05, 43});
    CHECK(a.data != c2.data);

    DualMeasurement dm = dual_measure(c, mask, resp, 1, n);
    RGBImage want_rgb = rgb_project(c, resp, NoiseSpec{0.05, derive_seed(42, 'R')});
    CASSIMeasurement want_yc = cassi_forward(c, mask, 1, NoiseSpec{0.05, derive_seed(42, 'C')});
    CHECK(dm.rgb.data == want_rgb.data);
    CHECK(dm.cassi.data == want_yc.data);
}

TEST_CASE("noiseless dual measurement carries no randomness") {
    HyperspectralCube c = random_cube(6, 6, 3, 9);
    CodedMask mask(6, 6, 1.0);
    SpectralResponse resp = default_spectral_response(3);
    DualMeasurement a = dual_measure(c, mask, resp, 1, NoiseSpec{0.0, 1});
    DualMeasurement b = dual_measure(c, mask, resp, 1, NoiseSpec{0.0, 999});
    CHECK(a.rgb.data == b.rgb.data);
    CHECK(a.cassi.data == b.cassi.data);
}

TEST_CASE("beamsplitter sends half the flux down each arm") {
    // unit mask and a response whose three curves sum to 1 at every channel:
    // the rgb detector then counts every photon once, as the cassi one does
    HyperspectralCube c = synth_scene(SceneSpec{16, 16, 6, 4, 33, 1.0});
    CodedMask unit(16, 16, 1.0);
    SpectralResponse resp = partition_response(6);
    DualMeasurement dm = dual_measure(c, unit, resp, 1, kQuiet);
    double scene = vec_sum(c.data);
    CHECK_LT(std::abs(vec_sum(dm.rgb.data) - 0.5 * scene), 1e-9);
    CHECK_LT(std::abs(vec_sum(dm.cassi.data) - 0.5 * scene), 1e-9);
}

// ---- rgb back-projection ---------------------------------------------------

TEST_CASE("rgb lift matches an independently solved system") {
    // same calibrated least-squares problem, different solver: assemble
    // A = 1/4 W^T W + 0.05 D2^T D2 + 1e-6 I, solve A L0 = 1/2 W^T by
    // Gauss-Jordan, then right-multiply by the inverse of the 3x3
    // re-projection P = 1/2 W L0
    SpectralResponse resp = default_spectral_response(8);
    const uint32_t n = 8;
    std::vector<double> a(n * n, 0.0);
    for (uint32_t i = 0; i < n; ++i)
        for (uint32_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (int ch = 0; ch < 3; ++ch) s += resp.at(ch, i) * resp.at(ch, j);
            a[i * n + j] = 0.25 * s;
        }
    for (uint32_t i = 0; i + 2 < n; ++i) {
        const uint32_t idx[3] = {i, i + 1, i + 2};
        const double co[3] = {1.0, -2.0, 1.0};
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q) a[idx[p] * n + idx[q]] += 0.05 * co[p] * co[q];
    }
    for (uint32_t i = 0; i < n; ++i) a[i * n + i] += 1e-6;
    std::vector<double> rhs(n * 3);
    for (uint32_t l = 0; l < n; ++l)
        for (int ch = 0; ch < 3; ++ch) rhs[l * 3 + ch] = 0.5 * resp.at(ch, l);
    std::vector<double> l0 = gj_solve(a, rhs, n, 3);
    std::vector<double> p(9, 0.0);
    for (int ch = 0; ch < 3; ++ch)
        for (int k = 0; k < 3; ++k)
            for (uint32_t l = 0; l < n; ++l)
                p[ch * 3 + k] += 0.5 * resp.at(ch, l) * l0[l * 3 + k];
    std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::vector<double> pinv = gj_solve(p, eye, 3, 3);
    std::vector<double> lift(n * 3, 0.0);
    for (uint32_t l = 0; l < n; ++l)
        for (int k = 0; k < 3; ++k)
            for (int ch = 0; ch < 3; ++ch)
                lift[l * 3 + k] += l0[l * 3 + ch] * pinv[ch * 3 + k];

    // push unit rgb pixels through the library and compare column by column
    for (int ch = 0; ch < 3; ++ch) {
        RGBImage g(1, 1);
        g.at(uint32_t(ch), 0, 0) = 1.0;
        HyperspectralCube got = backproject_rgb(g, resp);
        for (uint32_t l = 0; l < n; ++l)
            CHECK_EQ(got.at(l, 0, 0), doctest::Approx(lift[l * 3 + ch]).epsilon(1e-9));
    }
}

TEST_CASE("reprojecting the rgb lift reproduces the input exactly") {
    SpectralResponse resp = default_spectral_response(8);
    HyperspectralCube c = synth_scene(SceneSpec{12, 10, 8, 4, 5, 1.0});
    RGBImage g = rgb_project(c, resp, kQuiet);
    HyperspectralCube lifted = backproject_rgb(g, resp);
    RGBImage back = rgb_project(lifted, resp, kQuiet);
    for (size_t i = 0; i < g.data.size(); ++i)
        CHECK_EQ(back.data[i], doctest::Approx(g.data[i]).epsilon(1e-12));
}

TEST_CASE("rgb lift is local: each pixel's spectrum depends only on its own rgb") {
    SpectralResponse resp = default_spectral_response(6);
    RGBImage g(4, 4, 0.3);
    HyperspectralCube base = backproject_rgb(g, resp);
    g.at(1, 2, 2) += 0.5;
    HyperspectralCube poked = backproject_rgb(g, resp);
    for (uint32_t l = 0; l < 6; ++l)
        for (uint32_t x = 0; x < 4; ++x)
            for (uint32_t y = 0; y < 4; ++y) {
                if (x == 2 && y == 2) continue;
                CHECK_EQ(poked.at(l, x, y), base.at(l, x, y));
            }
    CHECK_NE(poked.at(0, 2, 2), base.at(0, 2, 2));
}

TEST_CASE("rgb lift recovers smooth scenes well") {
    SpectralResponse resp = default_spectral_response(8);
    double worst = 1e9;
    for (uint64_t seed : {0ull, 1ull, 2ull}) {
        HyperspectralCube truth = synth_scene(SceneSpec{32, 32, 8, 4, seed, 1.0});
        RGBImage g = rgb_project(truth, resp, kQuiet);
        HyperspectralCube lifted = backproject_rgb(g, resp);
        for (double& v : lifted.data) v = std::clamp(v, 0.0, 1.0);
        worst = std::min(worst, psnr(lifted, truth));
    }
    // three broadband samples plus smoothness pin the blob spectra closely
    CHECK_GT(worst, 25.0);
}

// ---- cassi back-projection -------------------------------------------------

TEST_CASE("cassi back-projection matches its dense definition") {
    for (uint32_t d : {0u, 1u, 2u}) {
        CodedMask mask = random_mask(6, 5, 21 + d);
        DenseRef ref(mask, d, 4);
        HyperspectralCube x = random_cube(6, 5, 4, 22);
        CASSIMeasurement y = cassi_forward(x, mask, d, kQuiet);

        std::vector<double> num = ref.apply_t(y.data);
        std::vector<double> den = ref.apply_t(ref.apply(std::vector<double>(num.size(), 1.0)));
        HyperspectralCube got = backproject_cassi(y, mask, d);
        for (size_t i = 0; i < num.size(); ++i)
            CHECK_EQ(got.data[i], doctest::Approx(num[i] / (den[i] + 1e-6)).epsilon(1e-12));
    }
}

TEST_CASE("cassi back-projection is exact where columns do not overlap") {
    // with d large enough that no two channels share a detector column, the
    // diagonal-normalized adjoint inverts the model on open mask pixels
    HyperspectralCube x = random_cube(4, 3, 3, 31);
    CodedMask mask = random_mask(4, 3, 32);
    uint32_t d = 3;  // ny = 3, so channel windows are disjoint
    CASSIMeasurement y = cassi_forward(x, mask, d, kQuiet);
    HyperspectralCube bp = backproject_cassi(y, mask, d);
    for (uint32_t l = 0; l < 3; ++l)
        for (uint32_t xx = 0; xx < 4; ++xx)
            for (uint32_t yy = 0; yy < 3; ++yy) {
                if (mask.at(xx, yy) == 0.0) continue;
                CHECK_EQ(bp.at(l, xx, yy),
                         doctest::Approx(x.at(l, xx, yy)).epsilon(2e-5));
            }
}

// ---- noise level and noise map --------------------------------------------

TEST_CASE("rgb noise sigma reads the level off a noisy flat image") {
    for (double sigma : {0.01, 0.02, 0.05}) {
        RGBImage g(64, 64, 0.5);
        Rng r(55);
        for (double& v : g.data) v += sigma * r.gaussian();
        double est = rgb_noise_sigma(g);
        CHECK_GT(est, 0.75 * sigma);
        CHECK_LT(est, 1.25 * sigma);
    }
}

TEST_CASE("rgb noise sigma is zero on ramps and degenerate images") {
    RGBImage ramp(16, 16);
    for (uint32_t c = 0; c < 3; ++c)
        for (uint32_t x = 0; x < 16; ++x)
            for (uint32_t y = 0; y < 16; ++y)
                ramp.at(c, x, y) = 0.1 * x + 0.05 * y + 0.2 * c;
    CHECK_LT(rgb_noise_sigma(ramp), 1e-12);
    RGBImage tiny(2, 2, 0.5);
    CHECK_EQ(rgb_noise_sigma(tiny), 0.0);
}

TEST_CASE("rgb noise sigma stays close on a structured noisy scene") {
    SpectralResponse resp = default_spectral_response(8);
    HyperspectralCube truth = synth_scene(SceneSpec{32, 32, 8, 4, 9, 1.0});
    RGBImage g = rgb_project(truth, resp, NoiseSpec{0.02, 77});
    double est = rgb_noise_sigma(g);
    CHECK_GT(est, 0.015);
    CHECK_LT(est, 0.027);
}

TEST_CASE("analytic noise map is benign on clean input") {
    SpectralResponse resp = default_spectral_response(8);
    HyperspectralCube truth = synth_scene(SceneSpec{32, 32, 8, 4, 13, 1.0});
    CodedMask mask = template_mask(32, 32, 0.5, 14);
    DualMeasurement dm = dual_measure(truth, mask, resp, 1, kQuiet);
    NoiseMap nm = estimate_noise_analytic(dm.cassi, dm.rgb, mask, resp, 1);
    double nm_rms = 0.0, cube_rms = 0.0;
    for (double v : nm.data) nm_rms += v * v;
    for (double v : truth.data) cube_rms += v * v;
    nm_rms = std::sqrt(nm_rms / double(nm.data.size()));
    cube_rms = std::sqrt(cube_rms / double(truth.data.size()));
    CHECK_LT(nm_rms, 0.05 * cube_rms);
}

TEST_CASE("analytic noise map tracks a constant coded-arm bias upward") {
    SpectralResponse resp = default_spectral_response(6);
    HyperspectralCube truth = synth_scene(SceneSpec{24, 24, 6, 4, 15, 1.0});
    CodedMask mask = template_mask(24, 24, 0.5, 16);
    DualMeasurement dm = dual_measure(truth, mask, resp, 1, kQuiet);

    NoiseMap base = estimate_noise_analytic(dm.cassi, dm.rgb, mask, resp, 1);
    CASSIMeasurement biased = dm.cassi;
    for (double& v : biased.data) v += 0.05;
    NoiseMap shifted = estimate_noise_analytic(biased, dm.rgb, mask, resp, 1);
    CHECK_GT(vec_sum(shifted.data) / double(shifted.data.size()),
             vec_sum(base.data) / double(base.data.size()));
}

TEST_CASE("analytic noise map handles zero input and checks dims") {
    SpectralResponse resp = default_spectral_response(4);
    CodedMask mask = template_mask(8, 8, 0.5, 1);
    CASSIMeasurement yc(8, 8, 4, 1);
    RGBImage yr(8, 8);
    NoiseMap nm = estimate_noise_analytic(yc, yr, mask, resp, 1);
    for (double v : nm.data) CHECK_EQ(v, 0.0);

    RGBImage wrong(7, 8);
    CHECK_EQ(error_code_of([&] { estimate_noise_analytic(yc, wrong, mask, resp, 1); }),
             "dim");
    SpectralResponse wrong_resp = default_spectral_response(5);
    CHECK_EQ(error_code_of([&] { estimate_noise_analytic(yc, yr, mask, wrong_resp, 1); }),
             "dim");
}
