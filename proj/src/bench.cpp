#include "dmdc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "dmdc/common.hpp"
#include "dmdc/metrics.hpp"
#include "dmdc/optics.hpp"
#include "dmdc/train.hpp"

namespace dmdc {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct ScenePack {
    HyperspectralCube truth;
    RGBImage yr;
    CASSIMeasurement yc;
    CodedMask mask;
};

ScenePack prepare(const BenchConfig& cfg, const std::string& mask_type,
                  size_t scene_index, uint64_t scene_seed,
                  const SpectralResponse& resp, const CodedMask& templ) {
    ScenePack p;
    SceneSpec spec;
    spec.nx = cfg.nx;
    spec.ny = cfg.ny;
    spec.nlam = cfg.nlam;
    spec.blob_count = cfg.blob_count;
    spec.spectral_smoothness = cfg.spectral_smoothness;
    spec.seed = scene_seed;
    p.truth = synth_scene(spec);

    const uint64_t nbase = derive_seed(cfg.noise_seed, scene_seed);
    const MaskPolicy policy = mask_policy_from_name(mask_type);
    switch (policy) {
        case MaskPolicy::Manual:
            p.mask = templ;
            break;
        case MaskPolicy::Random:
            p.mask = random_mask(cfg.nx, cfg.ny,
                                 derive_seed(cfg.mask_seed, scene_seed));
            break;
        case MaskPolicy::Normal:
            p.mask = normal_mask(cfg.nx, cfg.ny,
                                 derive_seed(cfg.mask_seed, scene_seed));
            break;
        case MaskPolicy::Dynamic:
            require(cfg.model != nullptr && cfg.model->has("maskhead.cfg"), "param",
                    "dynamic mask requires trained mask head weights");
            // the RGB camera is maskless, so its image exists before the mask
            p.yr = rgb_project(p.truth, resp,
                               NoiseSpec{cfg.sigma, derive_seed(nbase, 'R')});
            p.mask = dynamic_mask(p.yr, templ, *cfg.model);
            break;
    }
    if (policy != MaskPolicy::Dynamic)
        p.yr = rgb_project(p.truth, resp,
                           NoiseSpec{cfg.sigma, derive_seed(nbase, 'R')});
    p.yc = cassi_forward(p.truth, p.mask, cfg.d,
                         NoiseSpec{cfg.sigma, derive_seed(nbase, 'C')});
    (void)scene_index;
    return p;
}

HyperspectralCube reconstruct_one(const BenchConfig& cfg, const ScenePack& p,
                                  const SpectralResponse& resp) {
    if (cfg.method == "classical")
        return reconstruct_classical(p.yc, p.yr, p.mask, resp, cfg.d, cfg.rcfg);
    require(cfg.model != nullptr, "param",
            "dmdc benchmark needs trained network weights");
    return dmdc_forward(p.yc, p.yr, p.mask, *cfg.model, cfg.ncfg, resp);
}

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg) {
    require(!cfg.scene_seeds.empty(), "param", "benchmark needs scene seeds");
    require(!cfg.mask_types.empty(), "param", "benchmark needs mask types");
    require(cfg.method == "classical" || cfg.method == "dmdc", "param",
            "unknown method " + cfg.method + " (expected classical or dmdc)");
    for (const auto& m : cfg.mask_types) mask_policy_from_name(m);  // validate early

    const SpectralResponse resp = default_spectral_response(cfg.nlam);
    const CodedMask templ = template_mask(cfg.nx, cfg.ny, cfg.open_ratio, cfg.mask_seed);

    const int stages = (cfg.method == "classical") ? cfg.rcfg.stages
                                                   : int(cfg.ncfg.stages);
    const bool use_rgb = (cfg.method == "classical") ? cfg.rcfg.use_rgb
                                                     : cfg.ncfg.with_rgb;
    const bool use_ne = (cfg.method == "classical")
                            ? cfg.rcfg.use_noise_estimate
                            : cfg.ncfg.with_noise_estimator;
    const bool use_cross = (cfg.method == "classical") ? false : cfg.ncfg.with_cross;

    BenchResult out;
    for (const auto& mask_type : cfg.mask_types) {
        double agg_psnr = 0.0, agg_ssim = 0.0, agg_mrae = 0.0, agg_rmse = 0.0,
               agg_sec = 0.0;
        for (size_t si = 0; si < cfg.scene_seeds.size(); ++si) {
            ScenePack p = prepare(cfg, mask_type, si, cfg.scene_seeds[si], resp, templ);
            const double t0 = now_seconds();
            HyperspectralCube rec = reconstruct_one(cfg, p, resp);
            const double sec = now_seconds() - t0;
            MetricReport r = evaluate(rec, p.truth);
            BenchRow row;
            row.scene_seed = std::to_string(cfg.scene_seeds[si]);
            row.mask_type = mask_type;
            row.method = cfg.method;
            row.stages = stages;
            row.use_rgb = use_rgb;
            row.use_ne = use_ne;
            row.use_cross = use_cross;
            row.psnr_db = r.psnr_db;
            row.ssim = r.ssim;
            row.mrae = r.mrae;
            row.rmse = r.rmse;
            row.seconds = sec;
            out.rows.push_back(row);
            agg_psnr += r.psnr_db;
            agg_ssim += r.ssim;
            agg_mrae += r.mrae;
            agg_rmse += r.rmse;
            agg_sec += sec;
        }
        const double inv = 1.0 / double(cfg.scene_seeds.size());
        BenchRow mean;
        mean.scene_seed = "mean";
        mean.mask_type = mask_type;
        mean.method = cfg.method;
        mean.stages = stages;
        mean.use_rgb = use_rgb;
        mean.use_ne = use_ne;
        mean.use_cross = use_cross;
        mean.psnr_db = agg_psnr * inv;
        mean.ssim = agg_ssim * inv;
        mean.mrae = agg_mrae * inv;
        mean.rmse = agg_rmse * inv;
        mean.seconds = agg_sec * inv;
        out.rows.push_back(mean);
    }

    if (cfg.fps_probe) {
        ScenePack p =
            prepare(cfg, cfg.mask_types[0], 0, cfg.scene_seeds[0], resp, templ);
        reconstruct_one(cfg, p, resp);  // warmup
        std::vector<double> times(5);
        for (double& t : times) {
            const double t0 = now_seconds();
            reconstruct_one(cfg, p, resp);
            t = now_seconds() - t0;
        }
        std::sort(times.begin(), times.end());
        const double median = times[2];
        out.fps = median > 0.0 ? 1.0 / median : 0.0;
    }
    return out;
}

std::string bench_csv(const BenchResult& result) {
    std::string out =
        "scene_seed,mask_type,method,stages,use_rgb,use_ne,use_cross,"
        "psnr_db,ssim,mrae,rmse,seconds\n";
    char buf[256];
    for (const auto& r : result.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%d,%d,%d,%.10g,%.10g,%.10g,%.10g,%.6f\n",
                      r.scene_seed.c_str(), r.mask_type.c_str(), r.method.c_str(),
                      r.stages, r.use_rgb ? 1 : 0, r.use_ne ? 1 : 0,
                      r.use_cross ? 1 : 0, r.psnr_db, r.ssim, r.mrae, r.rmse,
                      r.seconds);
        out += buf;
    }
    return out;
}

}  // namespace dmdc
