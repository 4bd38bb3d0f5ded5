// Shared byte-buffer writer/reader for the binary formats. Kept out of io.hpp
// so only the format implementations (files, checkpoints) see it.
#pragma once
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dmdc/common.hpp"

namespace dmdc::detail {

struct Writer {
    std::string buf;
    void u16(uint16_t v) { buf.append(reinterpret_cast<const char*>(&v), 2); }
    void u32(uint32_t v) { buf.append(reinterpret_cast<const char*>(&v), 4); }
    void u8(uint8_t v) { buf.push_back(char(v)); }
    void magic(const char* m) { buf.append(m, 4); }
    void bytes(const char* p, size_t n) { buf.append(p, n); }
    void f32s(const std::vector<double>& xs) {
        size_t base = buf.size();
        buf.resize(base + 4 * xs.size());
        for (size_t i = 0; i < xs.size(); ++i) {
            float f = float(xs[i]);
            std::memcpy(buf.data() + base + 4 * i, &f, 4);
        }
    }
};

struct Reader {
    std::string buf;
    size_t pos = 0;
    std::string path;

    explicit Reader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary);
        require(bool(in), "io", "cannot open " + p);
        std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        buf = std::move(s);
    }
    void need(size_t n, const char* field) {
        if (pos + n > buf.size())
            fail("format", std::string("truncated ") + field + " in " + path);
    }
    void expect_magic(const char* m) {
        need(4, "header");
        if (std::memcmp(buf.data() + pos, m, 4) != 0)
            fail("format", std::string("bad magic in ") + path + " (want " + m + ")");
        pos += 4;
    }
    uint16_t u16(const char* field) {
        need(2, field);
        uint16_t v;
        std::memcpy(&v, buf.data() + pos, 2);
        pos += 2;
        return v;
    }
    uint32_t u32(const char* field) {
        need(4, field);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint8_t u8(const char* field) {
        need(1, field);
        return uint8_t(buf[pos++]);
    }
    std::string str(size_t n, const char* field) {
        need(n, field);
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }
    std::vector<double> f32s(size_t n) {
        need(4 * n, "payload");
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, buf.data() + pos + 4 * i, 4);
            out[i] = double(f);
        }
        pos += 4 * n;
        return out;
    }
    void version_check(const char* fmt) {
        uint16_t ver = u16("version");
        if (ver != 1)
            fail("format", std::string("unsupported ") + fmt + " version " +
                               std::to_string(ver) + " in " + path);
        u16("reserved");
    }
};

}  // namespace dmdc::detail
