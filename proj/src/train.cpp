#include "dmdc/train.hpp"

#include <algorithm>
#include <cmath>

#include "dmdc/common.hpp"
#include "dmdc/estimation.hpp"
#include "dmdc/optics.hpp"

namespace dmdc {

using ad::Tape;
using ad::Tensor;
using ad::Var;

MaskPolicy mask_policy_from_name(const std::string& name) {
    if (name == "manual") return MaskPolicy::Manual;
    if (name == "rand") return MaskPolicy::Random;
    if (name == "normal") return MaskPolicy::Normal;
    if (name == "dynamic") return MaskPolicy::Dynamic;
    fail("param", "unknown mask type " + name +
                      " (expected manual, rand, normal, or dynamic)");
}

std::string mask_policy_name(MaskPolicy p) {
    switch (p) {
        case MaskPolicy::Manual: return "manual";
        case MaskPolicy::Random: return "rand";
        case MaskPolicy::Normal: return "normal";
        case MaskPolicy::Dynamic: return "dynamic";
    }
    fail("param", "invalid mask policy value");
}

namespace {

// fixed salt bases for the per-scene draws; part of the run's contract
constexpr uint64_t kMaskSalt = 1000;
constexpr uint64_t kNoiseSalt = 2000;

Tensor cube_tensor(const HyperspectralCube& c) {
    Tensor t({c.nlam, c.nx, c.ny});
    t.v = c.data;
    return t;
}

Tensor meas_tensor(const CASSIMeasurement& m) {
    Tensor t({m.nx, m.wy});
    t.v = m.data;
    return t;
}

}  // namespace

TrainResult train_dmdc(const std::vector<HyperspectralCube>& scenes,
                       MaskPolicy policy, const CodedMask& mask_template,
                       const NetConfig& ncfg, const TrainConfig& tcfg, uint32_t d,
                       double sigma, const SpectralResponse& resp,
                       uint32_t mask_channels, double mask_threshold) {
    require(!scenes.empty(), "param", "training needs at least one scene");
    require(tcfg.batch >= 1, "param", "batch size must be at least 1");
    require(tcfg.halve_every >= 1, "param", "halve_every must be at least 1");
    require(tcfg.lr > 0.0, "param", "learning rate must be positive");
    require(sigma >= 0.0, "param", "noise level must be non-negative");
    const uint32_t nx = scenes[0].nx, ny = scenes[0].ny, nlam = scenes[0].nlam;
    for (const auto& s : scenes) {
        auto bad = validate_cube(s);
        require(bad.empty(), "invalid",
                "invalid training scene: " + (bad.empty() ? "" : bad.front()));
        require(s.nx == nx && s.ny == ny && s.nlam == nlam, "shape",
                "all training scenes must share one shape");
    }
    require(resp.nlam == nlam, "shape",
            "response channel count must match the scenes");
    require(mask_template.nx == nx && mask_template.ny == ny, "shape",
            "mask template dims must match the scenes");

    const size_t n = scenes.size();
    const bool dynamic = (policy == MaskPolicy::Dynamic);

    TrainResult out;
    out.params = init_dmdc_params(ncfg, nlam, tcfg.seed);
    if (dynamic)
        add_mask_head_params(out.params, mask_channels, mask_threshold, tcfg.seed);

    // per-scene fixed draws: mask (static policies), RGB image, and the
    // CASSI noise field (kept separate so the dynamic policy can re-apply the
    // same realization to a changing mask)
    std::vector<CodedMask> masks(n);
    std::vector<RGBImage> rgbs(n);
    std::vector<CASSIMeasurement> meas(n);
    std::vector<std::vector<double>> cassi_noise(n);
    const uint32_t wy = ny + d * (nlam - 1);
    for (size_t i = 0; i < n; ++i) {
        const uint64_t base = derive_seed(tcfg.seed, kNoiseSalt + i);
        switch (policy) {
            case MaskPolicy::Manual:
            case MaskPolicy::Dynamic:
                masks[i] = mask_template;
                break;
            case MaskPolicy::Random:
                masks[i] = random_mask(nx, ny, derive_seed(tcfg.seed, kMaskSalt + i));
                break;
            case MaskPolicy::Normal:
                masks[i] = normal_mask(nx, ny, derive_seed(tcfg.seed, kMaskSalt + i));
                break;
        }
        rgbs[i] = rgb_project(scenes[i], resp, NoiseSpec{sigma, derive_seed(base, 'R')});
        if (dynamic) {
            cassi_noise[i].assign(size_t(nx) * wy, 0.0);
            if (sigma > 0.0) {
                // same flat draw order the detector integration uses
                Rng rng(derive_seed(base, 'C'));
                for (double& v : cassi_noise[i]) v += sigma * rng.gaussian();
            }
        } else {
            meas[i] = cassi_forward(scenes[i], masks[i], d,
                                    NoiseSpec{sigma, derive_seed(base, 'C')});
        }
    }

    AdamState state;
    std::vector<double> scene_loss(n, 0.0);
    for (uint32_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        const double lr =
            tcfg.lr / std::pow(2.0, std::floor(double(epoch - 1) / tcfg.halve_every));
        for (size_t b0 = 0; b0 < n; b0 += tcfg.batch) {
            const size_t b1 = std::min(n, b0 + size_t(tcfg.batch));
            out.params.zero_grads();
            for (size_t i = b0; i < b1; ++i) {
                Tape tape;
                Var maskv, ycv;
                if (dynamic) {
                    Tensor rt({3, nx, ny});
                    rt.v = rgbs[i].data;
                    Var probs = mask_probs_graph(tape, tape.constant(std::move(rt)),
                                                 mask_template, out.params);
                    maskv = ad::reshape(mask_from_probs(probs, mask_threshold),
                                        {nx, ny});
                    Var clean = ad::cassi_forward_op(
                        tape.constant(cube_tensor(scenes[i])), maskv, d);
                    Tensor gt({nx, wy});
                    gt.v = cassi_noise[i];
                    ycv = ad::add(clean, tape.constant(std::move(gt)));
                } else {
                    maskv = tape.constant(Tensor({nx, ny}));
                    tape.val(maskv).v = masks[i].data;
                    ycv = tape.constant(meas_tensor(meas[i]));
                }
                Var x_out = dmdc_forward_graph(tape, ycv, maskv, rgbs[i], d,
                                               out.params, ncfg, resp);
                Var loss = loss_fn(tape, x_out, scenes[i], maskv, d, ycv, ncfg.xi);
                scene_loss[i] = tape.val(loss).v[0];
                tape.backward(loss);
                tape.flush_param_grads();
            }
            const double inv = 1.0 / double(b1 - b0);
            for (size_t e = 0; e < out.params.entry_count(); ++e)
                for (double& g : out.params.entry_at(e).grad) g *= inv;
            adam_step(out.params, state, lr, tcfg.beta1, tcfg.beta2);
        }
        double mean = 0.0;
        for (double v : scene_loss) mean += v;
        out.epoch_loss.push_back(mean / double(n));
        out.epoch_lr.push_back(lr);
    }
    return out;
}

}  // namespace dmdc
