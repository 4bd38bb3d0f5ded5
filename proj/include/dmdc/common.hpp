// Shared plumbing: error type, deterministic RNG, seed derivation.
#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dmdc {

// Every failure carries a short machine-readable code plus a human message.
// The CLI prints these as "error: <code>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const { return code_; }
private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
    throw Error(code, msg);
}

inline void require(bool ok, const std::string& code, const std::string& msg) {
    if (!ok) fail(code, msg);
}

// splitmix64: cheap avalanche mix used to derive independent sub-seeds so the
// two detectors, per-scene noise draws etc. never share a stream.
inline uint64_t derive_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic RNG. mt19937_64 gives the same stream on every platform;
// gaussians use an explicit Box-Muller so no library-defined distribution
// (whose algorithm the standard leaves open) can change the bytes we emit.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return double(eng_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        if (have_spare_) { have_spare_ = false; return spare_; }
        // u1 in (0,1] keeps the log finite
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace dmdc
