// Adam training loop for the unrolled reconstruction network, with optional
// joint training of the measurement-driven mask head.
#pragma once
#include <cstdint>
#include <vector>

#include "dmdc/cube.hpp"
#include "dmdc/masks.hpp"
#include "dmdc/net.hpp"
#include "dmdc/params.hpp"
#include "dmdc/response.hpp"

namespace dmdc {

struct TrainConfig {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    uint32_t epochs = 50;
    uint32_t halve_every = 50;  // lr = lr / 2^floor((epoch-1)/halve_every)
    uint32_t batch = 4;
    uint64_t seed = 0;
};

enum class MaskPolicy { Manual, Random, Normal, Dynamic };

MaskPolicy mask_policy_from_name(const std::string& name);
std::string mask_policy_name(MaskPolicy p);

struct TrainResult {
    ModelParams params;
    std::vector<double> epoch_loss;  // mean per-scene loss, one entry per epoch
    std::vector<double> epoch_lr;
};

// Scenes are visited in the given order every epoch (no shuffling; the run is
// a reproducibility contract). Static policies draw each scene's mask and
// measurement noise once up front; the dynamic policy regenerates its mask
// in-graph every step so the head trains jointly with the network.
TrainResult train_dmdc(const std::vector<HyperspectralCube>& scenes,
                       MaskPolicy policy, const CodedMask& mask_template,
                       const NetConfig& ncfg, const TrainConfig& tcfg,
                       uint32_t d, double sigma, const SpectralResponse& resp,
                       uint32_t mask_channels = 8, double mask_threshold = 0.5);

}  // namespace dmdc
