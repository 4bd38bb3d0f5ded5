// End-to-end benchmark: synthesize scenes, measure, reconstruct, score.
#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "dmdc/classical.hpp"
#include "dmdc/cube.hpp"
#include "dmdc/net.hpp"
#include "dmdc/params.hpp"
#include "dmdc/response.hpp"

namespace dmdc {

struct BenchConfig {
    uint32_t nx = 32, ny = 32, nlam = 8;
    uint32_t blob_count = 4;
    double spectral_smoothness = 1.0;
    std::vector<uint64_t> scene_seeds;
    std::vector<std::string> mask_types;  // manual, rand, normal, dynamic
    std::string method = "classical";     // classical or dmdc
    uint32_t d = 1;
    double sigma = 0.0;
    uint64_t noise_seed = 7;
    double open_ratio = 0.5;
    uint64_t mask_seed = 11;
    ReconConfig rcfg;              // classical settings
    NetConfig ncfg;                // dmdc settings
    ModelParams* model = nullptr;  // dmdc weights and/or mask head
    bool fps_probe = true;
};

struct BenchRow {
    std::string scene_seed;  // decimal seed, or "mean" for aggregates
    std::string mask_type;
    std::string method;
    int stages = 0;
    bool use_rgb = false, use_ne = false, use_cross = false;
    double psnr_db = 0.0, ssim = 0.0, mrae = 0.0, rmse = 0.0;
    double seconds = 0.0;
};

struct BenchResult {
    std::vector<BenchRow> rows;  // per-scene rows, then one "mean" row per mask type
    double fps = 0.0;            // from the probe; 0 when disabled
};

BenchResult run_benchmark(const BenchConfig& cfg);

// header + rows; timing column is wall-clock and not reproducible
std::string bench_csv(const BenchResult& result);

}  // namespace dmdc
