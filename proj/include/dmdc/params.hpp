// Named parameter store shared by the networks, plus Adam and checkpoint IO.
#pragma once
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dmdc {

struct ParamEntry {
    std::string name;
    std::vector<uint32_t> shape;
    std::vector<double> value;
    std::vector<double> grad;
};

class ModelParams {
public:
    // adds a zero-initialized entry; duplicate names are an error
    ParamEntry& add(const std::string& name, std::vector<uint32_t> shape);
    bool has(const std::string& name) const;
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    void zero_grads();
    size_t param_count() const;  // total scalar count over all entries
    size_t entry_count() const { return entries_.size(); }
    ParamEntry& entry_at(size_t i) { return entries_[i]; }
    const ParamEntry& entry_at(size_t i) const { return entries_[i]; }
    std::vector<std::string> names() const;

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, size_t> index_;
};

struct AdamState {
    // first/second moment buffers parallel to the entry list
    std::vector<std::vector<double>> m, v;
    int64_t t = 0;
};

// one Adam update from the gradients currently stored in params;
// lazily sizes the state buffers on first use
void adam_step(ModelParams& params, AdamState& state, double lr, double beta1,
               double beta2, double eps = 1e-8);

void save_params(const std::string& path, const ModelParams& params);
ModelParams load_params(const std::string& path);

}  // namespace dmdc
