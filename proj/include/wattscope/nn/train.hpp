#pragma once

#include <functional>
#include <span>
#include <vector>

#include "wattscope/nn/model.hpp"

namespace wattscope::nn {

// One training stream: the aggregate the model sees and the job it predicts.
struct SeriesPair {
    std::vector<double> aggregate_w;
    std::vector<double> target_w;
};

struct TrainingData {
    std::vector<SeriesPair> pairs;
    double cap_w = 200.0;
};

struct TrainOptions {
    ModelKey key;
    // Called after each epoch with the mean training loss (scaled MSE).
    std::function<void(int epoch, double loss)> on_epoch;
};

// The window ending at index t, front-padded with copies of series[0].
std::vector<double> window_at(std::span<const double> series, std::size_t t, int window);

// Adam (beta 0.9/0.999) on scaled MSE with inverted dropout, seeded from
// config.seed. Throws nn.EmptyDataset, nn.DegenerateTarget, nn.ShapeMismatch.
TrainedModel train(const NetworkConfig& config, const TrainingData& data, const TrainOptions& options = {});

// Predicts every timestep of an aggregate series.
std::vector<double> predict_series(const TrainedModel& model, std::span<const double> aggregate_w);

struct GradCheckSample {
    std::vector<std::vector<double>> windows;  // standardized, config.window each
    std::vector<double> targets;               // scaled
    bool dropout_frozen = false;               // sample one mask set and reuse it
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t parameter_count = 0;
};

// Analytic gradient against central differences (h = 1e-5) for every
// parameter; relative error uses max(|a|, |b|, 1e-8) as denominator.
GradCheckResult grad_check(const NetworkConfig& config, const GradCheckSample& sample);

}  // namespace wattscope::nn
