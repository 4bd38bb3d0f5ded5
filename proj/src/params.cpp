#include "dmdc/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dmdc/common.hpp"
#include "dmdc/io.hpp"
#include "dmdc/io_detail.hpp"

namespace dmdc {

ParamEntry& ModelParams::add(const std::string& name, std::vector<uint32_t> shape) {
    require(!name.empty(), "param", "parameter name must not be empty");
    require(index_.find(name) == index_.end(), "param",
            "duplicate parameter name " + name);
    size_t n = 1;
    for (uint32_t d : shape) {
        require(d > 0, "param", "zero dimension in parameter " + name);
        n *= d;
    }
    ParamEntry e;
    e.name = name;
    e.shape = std::move(shape);
    e.value.assign(n, 0.0);
    e.grad.assign(n, 0.0);
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back();
}

bool ModelParams::has(const std::string& name) const {
    return index_.find(name) != index_.end();
}

ParamEntry& ModelParams::entry(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "param", "unknown parameter " + name);
    return entries_[it->second];
}

const ParamEntry& ModelParams::entry(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "param", "unknown parameter " + name);
    return entries_[it->second];
}

void ModelParams::zero_grads() {
    for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

size_t ModelParams::param_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

std::vector<std::string> ModelParams::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

void adam_step(ModelParams& params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (state.m.size() != params.entry_count()) {
        state.m.assign(params.entry_count(), {});
        state.v.assign(params.entry_count(), {});
        for (size_t i = 0; i < params.entry_count(); ++i) {
            size_t n = params.entry_at(i).value.size();
            state.m[i].assign(n, 0.0);
            state.v[i].assign(n, 0.0);
        }
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(beta2, double(state.t));
    for (size_t i = 0; i < params.entry_count(); ++i) {
        ParamEntry& e = params.entry_at(i);
        require(state.m[i].size() == e.value.size(), "param",
                "optimizer state does not match parameter shapes");
        for (size_t k = 0; k < e.value.size(); ++k) {
            const double g = e.grad[k];
            state.m[i][k] = beta1 * state.m[i][k] + (1.0 - beta1) * g;
            state.v[i][k] = beta2 * state.v[i][k] + (1.0 - beta2) * g * g;
            const double mh = state.m[i][k] / bc1;
            const double vh = state.v[i][k] / bc2;
            e.value[k] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

// Checkpoint layout: "HSP1", u16 version=1, u16 reserved, u32 entry count,
// then per entry: u32 name length, name bytes, u32 rank, u32 dims, f32 values.
void save_params(const std::string& path, const ModelParams& params) {
    detail::Writer w;
    w.magic("HSP1");
    w.u16(1);
    w.u16(0);
    w.u32(uint32_t(params.entry_count()));
    for (size_t i = 0; i < params.entry_count(); ++i) {
        const ParamEntry& e = params.entry_at(i);
        w.u32(uint32_t(e.name.size()));
        w.bytes(e.name.data(), e.name.size());
        w.u32(uint32_t(e.shape.size()));
        for (uint32_t d : e.shape) w.u32(d);
        w.f32s(e.value);
    }
    write_file_atomic(path, w.buf);
}

ModelParams load_params(const std::string& path) {
    detail::Reader r(path);
    r.expect_magic("HSP1");
    r.version_check("HSP1");
    const uint32_t count = r.u32("entry count");
    ModelParams out;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t nlen = r.u32("name length");
        require(nlen > 0 && nlen <= 256, "format",
                "parameter name length out of range in " + path);
        std::string name = r.str(nlen, "name");
        const uint32_t rank = r.u32("rank");
        require(rank >= 1 && rank <= 4, "format",
                "parameter rank out of range in " + path);
        std::vector<uint32_t> shape(rank);
        size_t n = 1;
        for (uint32_t k = 0; k < rank; ++k) {
            shape[k] = r.u32("dim");
            require(shape[k] > 0, "format", "zero parameter dim in " + path);
            n *= shape[k];
            require(n <= (size_t(1) << 31), "format", "dimension overflow");
        }
        ParamEntry& e = out.add(name, shape);
        e.value = r.f32s(n);
    }
    return out;
}

}  // namespace dmdc
