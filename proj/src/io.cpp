#include "dmdc/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "dmdc/io_detail.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

namespace dmdc {

using detail::Reader;
using detail::Writer;

namespace {

// guards nx*ny*nlam against u64 overflow and absurd allocations
size_t checked_count(uint64_t a, uint64_t b, uint64_t c, const std::string& path) {
    uint64_t n = a * b;
    if (b != 0 && n / b != a) fail("format", "dimension overflow in " + path);
    uint64_t m = n * c;
    if (c != 0 && m / c != n) fail("format", "dimension overflow in " + path);
    if (m > (uint64_t(1) << 31)) fail("format", "dimension overflow in " + path);
    return size_t(m);
}

void write_atomic_bytes(const std::string& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp" + std::to_string(uint64_t(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(bool(out), "io", "cannot write " + tmp.string());
        out.write(bytes.data(), std::streamsize(bytes.size()));
        require(bool(out), "io", "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail("io", "cannot rename into " + path + ": " + ec.message());
    }
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    write_atomic_bytes(path, content);
}

// --- HSC1 cubes -----------------------------------------------------------

void save_cube(const HyperspectralCube& cube, const std::string& path) {
    auto bad = validate_cube(cube);
    if (!bad.empty()) fail("invalid", "refusing to save invalid cube: " + bad.front());
    Writer w;
    w.magic("HSC1");
    w.u16(1);
    w.u16(0);
    w.u32(cube.nx);
    w.u32(cube.ny);
    w.u32(cube.nlam);
    w.f32s(cube.data);
    write_atomic_bytes(path, w.buf);
}

HyperspectralCube load_cube(const std::string& path) {
    Reader r(path);
    r.expect_magic("HSC1");
    r.version_check("HSC1");
    HyperspectralCube c;
    c.nx = r.u32("nx");
    c.ny = r.u32("ny");
    c.nlam = r.u32("nlam");
    size_t n = checked_count(c.nx, c.ny, c.nlam, path);
    c.data = r.f32s(n);
    return c;
}

// --- HSR1 RGB images ------------------------------------------------------

void save_rgb(const RGBImage& img, const std::string& path) {
    require(img.data.size() == size_t(3) * img.nx * img.ny, "invalid",
            "rgb data length mismatch");
    Writer w;
    w.magic("HSR1");
    w.u16(1);
    w.u16(0);
    w.u32(img.nx);
    w.u32(img.ny);
    w.u32(3);
    w.f32s(img.data);
    write_atomic_bytes(path, w.buf);
}

RGBImage load_rgb(const std::string& path) {
    Reader r(path);
    r.expect_magic("HSR1");
    r.version_check("HSR1");
    RGBImage img;
    img.nx = r.u32("nx");
    img.ny = r.u32("ny");
    uint32_t ch = r.u32("channels");
    if (ch != 3) fail("format", "HSR1 channel count must be 3 in " + path);
    size_t n = checked_count(img.nx, img.ny, 3, path);
    img.data = r.f32s(n);
    return img;
}

// --- HSM1 measurements ----------------------------------------------------

void save_measurement(const CASSIMeasurement& m, const std::string& path) {
    auto bad = validate_measurement(m);
    if (!bad.empty())
        fail("invalid", "refusing to save invalid measurement: " + bad.front());
    Writer w;
    w.magic("HSM1");
    w.u16(1);
    w.u16(0);
    w.u32(m.nx);
    w.u32(m.wy);
    w.u32(m.ny);
    w.u32(m.nlam);
    w.u32(m.d);
    w.f32s(m.data);
    write_atomic_bytes(path, w.buf);
}

CASSIMeasurement load_measurement(const std::string& path) {
    Reader r(path);
    r.expect_magic("HSM1");
    r.version_check("HSM1");
    CASSIMeasurement m;
    m.nx = r.u32("nx");
    m.wy = r.u32("wy");
    m.ny = r.u32("ny");
    m.nlam = r.u32("nlam");
    m.d = r.u32("d");
    if (m.nlam < 1 || m.wy != m.ny + m.d * (m.nlam - 1))
        fail("format", "inconsistent measurement dims in " + path);
    size_t n = checked_count(m.nx, m.wy, 1, path);
    m.data = r.f32s(n);
    return m;
}

// --- HSK1 masks -----------------------------------------------------------

void save_mask(const CodedMask& m, const std::string& path) {
    auto bad = validate_mask(m);
    if (!bad.empty()) fail("invalid", "refusing to save invalid mask: " + bad.front());
    Writer w;
    w.magic("HSK1");
    w.u16(1);
    w.u16(0);
    w.u32(m.nx);
    w.u32(m.ny);
    w.u32(1);  // channel count, fixed
    w.u8(m.binary ? 1 : 0);
    w.f32s(m.data);
    write_atomic_bytes(path, w.buf);
}

CodedMask load_mask(const std::string& path) {
    Reader r(path);
    r.expect_magic("HSK1");
    r.version_check("HSK1");
    CodedMask m;
    m.nx = r.u32("nx");
    m.ny = r.u32("ny");
    uint32_t ch = r.u32("channels");
    if (ch != 1) fail("format", "HSK1 channel count must be 1 in " + path);
    m.binary = r.u8("binary flag") != 0;
    size_t n = checked_count(m.nx, m.ny, 1, path);
    m.data = r.f32s(n);
    auto bad = validate_mask(m);
    if (!bad.empty()) fail("format", "invalid mask in " + path + ": " + bad.front());
    return m;
}

}  // namespace dmdc
