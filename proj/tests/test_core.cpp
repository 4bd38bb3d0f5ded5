#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dmdc/common.hpp"
#include "dmdc/cube.hpp"
#include "dmdc/io.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/params.hpp"
#include "dmdc/response.hpp"

using namespace dmdc;

namespace {

// runs f and returns the error code it threw, or "" if it did not throw
template <class F>
std::string error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

// scratch directory removed on scope exit
struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("dmdc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

// ---- rng and seed derivation ----------------------------------------------

TEST_CASE("derive_seed separates streams and is deterministic") {
    CHECK_EQ(derive_seed(42, 'R'), derive_seed(42, 'R'));
    CHECK_NE(derive_seed(42, 'R'), derive_seed(42, 'C'));
    CHECK_NE(derive_seed(42, 'R'), derive_seed(43, 'R'));
    // adjacent seeds and salts should not collide either
    CHECK_NE(derive_seed(0, 0), derive_seed(0, 1));
    CHECK_NE(derive_seed(0, 0), derive_seed(1, 0));
}

TEST_CASE("rng reproduces the same stream per seed") {
    Rng a(7), b(7), c(8);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double va = a.uniform();
        if (va != b.uniform()) all_equal = false;
        if (va != c.uniform()) any_diff = true;
        CHECK_GE(va, 0.0);
        CHECK_LT(va, 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng gaussian and bernoulli have sane first moments") {
    Rng r(123);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = r.gaussian();
        sum += g;
        sumsq += g * g;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK_LT(std::abs(mean), 0.01);
    CHECK_LT(std::abs(var - 1.0), 0.02);

    Rng r2(456);
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += r2.bernoulli(0.3) ? 1 : 0;
    CHECK_LT(std::abs(double(hits) / n - 0.3), 0.01);
}

TEST_CASE("rng interval uniform stays inside the interval") {
    Rng r(9);
    for (int i = 0; i < 1000; ++i) {
        double v = r.uniform(-2.0, 5.0);
        CHECK_GE(v, -2.0);
        CHECK_LT(v, 5.0);
    }
}

// ---- synthetic scenes ------------------------------------------------------

TEST_CASE("synth_scene is deterministic and seed-sensitive") {
    SceneSpec spec;
    spec.seed = 77;
    HyperspectralCube a = synth_scene(spec);
    HyperspectralCube b = synth_scene(spec);
    CHECK(a.data == b.data);
    spec.seed = 78;
    HyperspectralCube c = synth_scene(spec);
    CHECK(a.data != c.data);
}

TEST_CASE("synth_scene output is a valid unit-peak cube") {
    SceneSpec spec;
    spec.nx = 24;
    spec.ny = 20;
    spec.nlam = 6;
    spec.seed = 3;
    HyperspectralCube c = synth_scene(spec);
    CHECK_EQ(c.nx, 24);
    CHECK_EQ(c.ny, 20);
    CHECK_EQ(c.nlam, 6);
    CHECK(validate_cube(c).empty());
    double mx = 0.0;
    for (double v : c.data) mx = std::max(mx, v);
    CHECK_EQ(mx, 1.0);  // peak normalization, and 1.0 survives the f32 round
    // every value is already representable in f32, so file IO cannot move it
    for (double v : c.data) CHECK_EQ(v, double(float(v)));
}

TEST_CASE("synth_scene rejects degenerate specs") {
    SceneSpec spec;
    spec.nlam = 1;
    CHECK_EQ(error_code_of([&] { synth_scene(spec); }), "param");
    spec = SceneSpec{};
    spec.blob_count = 0;
    CHECK_EQ(error_code_of([&] { synth_scene(spec); }), "param");
    spec = SceneSpec{};
    spec.spectral_smoothness = 0.0;
    CHECK_EQ(error_code_of([&] { synth_scene(spec); }), "param");
}

TEST_CASE("validate_cube reports each violated invariant") {
    HyperspectralCube c(4, 4, 3, 0.5);
    CHECK(validate_cube(c).empty());

    c.data[5] = -0.1;
    CHECK_FALSE(validate_cube(c).empty());
    c.data[5] = std::nan("");
    CHECK_FALSE(validate_cube(c).empty());
    c.data[5] = 0.5;

    c.data.pop_back();
    CHECK_FALSE(validate_cube(c).empty());
    c.data.push_back(0.5);

    HyperspectralCube flat(4, 4, 1, 0.5);
    CHECK_FALSE(validate_cube(flat).empty());
}

// ---- spectral responses ----------------------------------------------------

TEST_CASE("default response curves are normalized and ordered by band") {
    for (uint32_t nlam : {2u, 4u, 8u, 16u, 28u}) {
        SpectralResponse r = default_spectral_response(nlam);
        CHECK(validate_response(r).empty());
        CHECK(r.normalized);
        for (int c = 0; c < 3; ++c) {
            double sum = 0.0;
            for (uint32_t l = 0; l < nlam; ++l) {
                CHECK_GT(r.at(c, l), 0.0);  // broad curves see every channel
                sum += r.at(c, l);
            }
            CHECK_LT(std::abs(sum - 1.0), 1e-12);
        }
        // R peaks at the top of the range, B at the bottom, G between;
        // with only 2 channels G sits exactly halfway and the order ties
        if (nlam >= 4) {
            auto argmax = [&](int c) {
                uint32_t best = 0;
                for (uint32_t l = 1; l < nlam; ++l)
                    if (r.at(c, l) > r.at(c, best)) best = l;
                return best;
            };
            CHECK_GT(argmax(0), argmax(1));
            CHECK_GT(argmax(1), argmax(2));
        }
    }
}

TEST_CASE("partition response columns sum to one at every channel") {
    for (uint32_t nlam : {2u, 5u, 8u, 16u}) {
        SpectralResponse r = partition_response(nlam);
        CHECK(validate_response(r).empty());
        CHECK_FALSE(r.normalized);
        for (uint32_t l = 0; l < nlam; ++l) {
            double col = r.at(0, l) + r.at(1, l) + r.at(2, l);
            CHECK_LT(std::abs(col - 1.0), 1e-12);
        }
    }
}

TEST_CASE("validate_response catches malformed curves") {
    SpectralResponse r = default_spectral_response(6);
    r.curves[2] = -0.5;
    CHECK_FALSE(validate_response(r).empty());

    r = default_spectral_response(6);
    r.curves.pop_back();
    CHECK_FALSE(validate_response(r).empty());

    r = default_spectral_response(6);
    r.at(1, 0) += 0.1;  // breaks the sum-to-1 claim
    CHECK_FALSE(validate_response(r).empty());

    CHECK_EQ(error_code_of([] { default_spectral_response(1); }), "param");
}

// ---- coded masks -----------------------------------------------------------

TEST_CASE("template mask is binary with the requested open ratio") {
    CodedMask m = template_mask(64, 64, 0.3, 5);
    CHECK(m.binary);
    CHECK(validate_mask(m).empty());
    for (double v : m.data) CHECK((v == 0.0 || v == 1.0));
    MaskStats s = mask_stats(m);
    CHECK_LT(std::abs(s.open_ratio - 0.3), 0.03);
    CHECK(template_mask(64, 64, 0.3, 5).data == m.data);
    CHECK(template_mask(64, 64, 0.3, 6).data != m.data);
}

TEST_CASE("template mask rejects boundary open ratios") {
    CHECK_EQ(error_code_of([] { template_mask(8, 8, 0.0, 1); }), "param");
    CHECK_EQ(error_code_of([] { template_mask(8, 8, 1.0, 1); }), "param");
}

TEST_CASE("random mask is a fair binary coin") {
    CodedMask m = random_mask(64, 64, 11);
    CHECK(m.binary);
    for (double v : m.data) CHECK((v == 0.0 || v == 1.0));
    CHECK_LT(std::abs(mask_stats(m).open_ratio - 0.5), 0.03);
    CHECK(random_mask(64, 64, 12).data != m.data);
}

TEST_CASE("normal mask is continuous, clipped and centered") {
    CodedMask m = normal_mask(64, 64, 13);
    CHECK_FALSE(m.binary);
    CHECK(validate_mask(m).empty());
    bool fractional = false;
    for (double v : m.data) {
        CHECK_GE(v, 0.0);
        CHECK_LE(v, 1.0);
        if (v != 0.0 && v != 1.0) fractional = true;
    }
    CHECK(fractional);
    CHECK_LT(std::abs(mask_stats(m).open_ratio - 0.5), 0.03);
}

TEST_CASE("mask_stats matches a hand computation") {
    CodedMask m(2, 2);
    m.at(0, 0) = 1.0;
    m.at(0, 1) = 0.0;  // row 0 mean 0.5
    m.at(1, 0) = 1.0;
    m.at(1, 1) = 1.0;  // row 1 mean 1.0
    MaskStats s = mask_stats(m);
    CHECK_EQ(s.open_ratio, doctest::Approx(0.75).epsilon(1e-12));
    // population variance of {0.5, 1.0} around 0.75
    CHECK_EQ(s.row_open_variance, doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("validate_mask flags out-of-range and fake-binary data") {
    CodedMask m(3, 3, 0.5);
    CHECK(validate_mask(m).empty());
    m.data[0] = 1.5;
    CHECK_FALSE(validate_mask(m).empty());
    m.data[0] = 0.5;
    m.binary = true;
    CHECK_FALSE(validate_mask(m).empty());
}

// ---- binary file formats ---------------------------------------------------

TEST_CASE("cube files round-trip bit-exactly") {
    TempDir td;
    SceneSpec spec;
    spec.seed = 21;
    HyperspectralCube c = synth_scene(spec);
    save_cube(c, td.file("a.hsc"));
    HyperspectralCube back = load_cube(td.file("a.hsc"));
    CHECK_EQ(back.nx, c.nx);
    CHECK_EQ(back.ny, c.ny);
    CHECK_EQ(back.nlam, c.nlam);
    CHECK(back.data == c.data);  // generator pre-rounds through f32
}

TEST_CASE("saving an invalid cube is refused") {
    TempDir td;
    HyperspectralCube c(4, 4, 3, 0.5);
    c.data[0] = -1.0;
    CHECK_EQ(error_code_of([&] { save_cube(c, td.file("bad.hsc")); }), "invalid");
    CHECK_FALSE(std::filesystem::exists(td.file("bad.hsc")));
}

TEST_CASE("rgb files round-trip through f32") {
    TempDir td;
    RGBImage img(5, 7);
    Rng r(2);
    for (double& v : img.data) v = r.uniform();
    save_rgb(img, td.file("a.hsr"));
    RGBImage back = load_rgb(td.file("a.hsr"));
    CHECK_EQ(back.nx, img.nx);
    CHECK_EQ(back.ny, img.ny);
    for (size_t i = 0; i < img.data.size(); ++i)
        CHECK_EQ(back.data[i], double(float(img.data[i])));
}

TEST_CASE("measurement files keep geometry and payload") {
    TempDir td;
    CASSIMeasurement m(6, 5, 4, 2);
    Rng r(3);
    for (double& v : m.data) v = r.uniform();
    save_measurement(m, td.file("a.hsm"));
    CASSIMeasurement back = load_measurement(td.file("a.hsm"));
    CHECK_EQ(back.nx, 6);
    CHECK_EQ(back.ny, 5);
    CHECK_EQ(back.nlam, 4);
    CHECK_EQ(back.d, 2);
    CHECK_EQ(back.wy, 5 + 2 * 3);
    for (size_t i = 0; i < m.data.size(); ++i)
        CHECK_EQ(back.data[i], double(float(m.data[i])));
}

TEST_CASE("mask files preserve the binary flag") {
    TempDir td;
    CodedMask bin = template_mask(9, 9, 0.5, 1);
    save_mask(bin, td.file("b.hsk"));
    CodedMask back = load_mask(td.file("b.hsk"));
    CHECK(back.binary);
    CHECK(back.data == bin.data);

    CodedMask gray = normal_mask(9, 9, 1);
    save_mask(gray, td.file("g.hsk"));
    back = load_mask(td.file("g.hsk"));
    CHECK_FALSE(back.binary);
    for (size_t i = 0; i < gray.data.size(); ++i)
        CHECK_EQ(back.data[i], double(float(gray.data[i])));
}

TEST_CASE("loaders reject wrong magic, truncation and missing files") {
    TempDir td;
    write_file_atomic(td.file("junk.hsc"), "NOPE this is not a cube");
    CHECK_EQ(error_code_of([&] { load_cube(td.file("junk.hsc")); }), "format");

    // valid header, payload cut short
    HyperspectralCube c(4, 4, 3, 0.25);
    save_cube(c, td.file("t.hsc"));
    std::ifstream in(td.file("t.hsc"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    write_file_atomic(td.file("cut.hsc"), bytes.substr(0, bytes.size() - 7));
    CHECK_EQ(error_code_of([&] { load_cube(td.file("cut.hsc")); }), "format");

    CHECK_EQ(error_code_of([&] { load_cube(td.file("absent.hsc")); }), "io");

    // cube payload under a mask magic must not parse as a mask
    CHECK_EQ(error_code_of([&] { load_mask(td.file("t.hsc")); }), "format");
}

TEST_CASE("measurement loader rejects inconsistent geometry") {
    TempDir td;
    CASSIMeasurement m(4, 4, 3, 1);
    save_measurement(m, td.file("a.hsm"));
    std::ifstream in(td.file("a.hsm"), std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // wy lives at offset 12 (magic+version+reserved+nx); corrupt it
    bytes[12] = char(99);
    write_file_atomic(td.file("bad.hsm"), bytes);
    CHECK_EQ(error_code_of([&] { load_measurement(td.file("bad.hsm")); }), "format");
}

TEST_CASE("write_file_atomic leaves no temp files behind") {
    TempDir td;
    write_file_atomic(td.file("out.txt"), "payload\n");
    std::ifstream in(td.file("out.txt"));
    std::string got((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK_EQ(got, "payload\n");
    size_t entries = 0;
    for (auto& e : std::filesystem::directory_iterator(td.path)) {
        (void)e;
        ++entries;
    }
    CHECK_EQ(entries, 1);
}

// ---- parameter checkpoints -------------------------------------------------

TEST_CASE("parameter store enforces unique known names") {
    ModelParams p;
    p.add("w", {2, 3});
    CHECK(p.has("w"));
    CHECK_EQ(p.entry("w").value.size(), 6);
    CHECK_EQ(error_code_of([&] { p.add("w", {1}); }), "param");
    CHECK_EQ(error_code_of([&] { p.entry("missing"); }), "param");
    CHECK_EQ(error_code_of([&] { p.add("z", {0, 2}); }), "param");
    p.entry("w").grad.assign(6, 1.0);
    p.zero_grads();
    for (double g : p.entry("w").grad) CHECK_EQ(g, 0.0);
}

TEST_CASE("checkpoints round-trip names, shapes and f32 values") {
    TempDir td;
    ModelParams p;
    Rng r(8);
    p.add("block.w", {3, 4});
    p.add("block.b", {4});
    p.add("cfg", {2});
    // fill after all adds: the store may relocate entries while growing
    for (double& v : p.entry("block.w").value) v = r.gaussian();
    for (double& v : p.entry("block.b").value) v = r.gaussian();
    p.entry("cfg").value = {8.0, 0.5};
    save_params(td.file("ck.hsp"), p);

    ModelParams back = load_params(td.file("ck.hsp"));
    CHECK_EQ(back.entry_count(), 3);
    CHECK_EQ(back.names(), p.names());  // order preserved
    CHECK(back.entry("block.w").shape == std::vector<uint32_t>{3, 4});
    for (size_t i = 0; i < p.entry("block.w").value.size(); ++i)
        CHECK_EQ(back.entry("block.w").value[i],
                 double(float(p.entry("block.w").value[i])));
    CHECK_EQ(back.entry("cfg").value[0], 8.0);
    for (double g : back.entry("block.w").grad) CHECK_EQ(g, 0.0);
}

TEST_CASE("checkpoint loader rejects corrupt headers") {
    TempDir td;
    write_file_atomic(td.file("bad.hsp"), "HSPX garbage");
    CHECK_EQ(error_code_of([&] { load_params(td.file("bad.hsp")); }), "format");
}

TEST_CASE("adam matches a hand-stepped reference") {
    ModelParams p;
    p.add("w", {2}).value = {1.0, -2.0};
    p.entry("w").grad = {0.5, -1.5};
    AdamState st;
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    adam_step(p, st, lr, b1, b2, eps);

    // one step by hand: m = (1-b1) g, v = (1-b2) g^2, with bias correction
    // the update reduces to -lr * g / (|g| + eps)
    double w0 = 1.0 - lr * 0.5 / (std::sqrt(0.5 * 0.5) + eps);
    double w1 = -2.0 - lr * (-1.5) / (std::sqrt(1.5 * 1.5) + eps);
    CHECK_EQ(p.entry("w").value[0], doctest::Approx(w0).epsilon(1e-12));
    CHECK_EQ(p.entry("w").value[1], doctest::Approx(w1).epsilon(1e-12));

    // second step with fresh gradients, tracked against the full recurrence
    p.entry("w").grad = {0.25, 0.75};
    double m0 = (1 - b1) * 0.5, v0 = (1 - b2) * 0.25;
    double m1 = (1 - b1) * (-1.5), v1 = (1 - b2) * 2.25;
    m0 = b1 * m0 + (1 - b1) * 0.25;
    v0 = b2 * v0 + (1 - b2) * 0.0625;
    m1 = b1 * m1 + (1 - b1) * 0.75;
    v1 = b2 * v1 + (1 - b2) * 0.5625;
    double bc1 = 1 - b1 * b1, bc2 = 1 - b2 * b2;
    w0 -= lr * (m0 / bc1) / (std::sqrt(v0 / bc2) + eps);
    w1 -= lr * (m1 / bc1) / (std::sqrt(v1 / bc2) + eps);
    adam_step(p, st, lr, b1, b2, eps);
    CHECK_EQ(p.entry("w").value[0], doctest::Approx(w0).epsilon(1e-12));
    CHECK_EQ(p.entry("w").value[1], doctest::Approx(w1).epsilon(1e-12));
}
