#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "wattscope/model_key.hpp"
#include "wattscope/nn/network.hpp"

namespace wattscope::nn {

inline constexpr char kModelMagic[] = "WSM1";

// Immutable once trained; safe to share across threads for inference.
struct TrainedModel {
    NetworkConfig config;
    std::vector<double> weights;
    double input_mean = 0.0;
    double input_std = 1.0;
    double target_scale = 200.0;  // per-job cap in watts
    ModelKey key;

    // Exactly config.window aggregate readings in watts, oldest first.
    // Returns the job estimate in [0, target_scale]. Throws nn.ShapeMismatch.
    double predict(std::span<const double> window_w) const;

    // Scaled network output before clamping.
    double predict_scaled(std::span<const double> window_w) const;
};

// Directory with meta.json (config, normalization, key, slice manifest) and
// weights.bin ("WSM1", u64 count, count little-endian f64).
void save_trained_model(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_trained_model(const std::filesystem::path& dir);

}  // namespace wattscope::nn
