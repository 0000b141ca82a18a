#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wattscope/nn/config.hpp"
#include "wattscope/nn/layout.hpp"

namespace wattscope::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Inverted-dropout multipliers: each entry is 0 or 1/(1-p).
struct DropoutMasks {
    Matrix recurrent;  // (2*gru1_units) x (L*B), applied to the first bi-GRU output
    Matrix dense;      // dense1_units x B, applied after dense1
};

// Stateless evaluator for a given configuration. Parameters live in a flat
// vector laid out by ParamLayout; sequences are stored as
// features x (L*B) matrices with column t*B + b.
class SlidingWindowNet {
public:
    explicit SlidingWindowNet(NetworkConfig config);

    const NetworkConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    std::size_t parameter_count() const noexcept { return layout_.total(); }

    // Glorot-uniform kernels, orthogonal recurrent blocks, zero biases.
    std::vector<double> initialize(std::uint64_t seed) const;

    DropoutMasks sample_masks(int batch, std::mt19937_64& rng) const;

    // windows: window x B, already standardized. Returns B scaled outputs.
    Vector forward(std::span<const double> params, const Matrix& windows, const DropoutMasks* masks) const;

    // Mean squared error against scaled targets. Writes d(loss)/d(params)
    // into grad when it is non-empty (grad is overwritten, not accumulated).
    double loss(std::span<const double> params, const Matrix& windows, const Vector& targets,
                const DropoutMasks* masks, std::span<double> grad) const;

    // Single standardized window, dropout inert. Matrix-vector path used for
    // serving; agrees with forward() up to rounding.
    double infer(std::span<const double> params, std::span<const double> window) const;

private:
    NetworkConfig config_;
    ParamLayout layout_;
};

}  // namespace wattscope::nn
