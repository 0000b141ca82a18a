#pragma once

#include <memory>
#include <span>

#include <Eigen/Dense>

#include "wattscope/nn/config.hpp"

namespace wattscope::nn {

struct TrainedModel;

// Weights repacked into contiguous matrices of the target precision, with
// both directions' input projections stacked so each bi-GRU layer does one
// matrix product per window. Immutable; share freely across threads.
template <typename Scalar>
class InferenceEngine {
public:
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    // Scratch buffers for one caller; not shareable between threads.
    struct Workspace {
        Mat input;
        Mat conv;
        Mat xproj1;
        Mat seq1;
        Mat xproj2;
        Vec h;
        Vec zr;
        Vec n;
        Vec rh;
        Vec features;
        Vec dense;
    };

    InferenceEngine(const NetworkConfig& config, std::span<const double> params);

    const NetworkConfig& config() const noexcept { return config_; }
    Workspace make_workspace() const;

    // Standardized window in, scaled output out (no clamping).
    double run(std::span<const double> window, Workspace& ws) const;

private:
    struct GruDir {
        Mat wh_zr;  // 2H x H
        Mat wh_n;   // H x H
    };
    struct BiGru {
        Mat wx;    // 6H x in: fwd gates then bwd gates
        Vec bias;  // 6H
        GruDir fwd;
        GruDir bwd;
        int units = 0;
    };

    void run_direction(const BiGru& layer, const GruDir& dir, const Mat& xproj, Eigen::Index row0, bool reverse,
                       Workspace& ws, Mat* seq, Eigen::Index seq_row0) const;

    NetworkConfig config_;
    int pad_left_ = 0;
    Mat conv_w;  // F x K
    Vec conv_b;
    BiGru gru1_;
    BiGru gru2_;
    Mat dense1_w;
    Vec dense1_b;
    Vec dense2_w;
    Scalar dense2_b = 0;
};

extern template class InferenceEngine<float>;
extern template class InferenceEngine<double>;

// Serving wrapper around a trained model: standardizes, runs the compiled
// float32 engine and rescales to watts. One Predictor per stream.
class Predictor {
public:
    explicit Predictor(const TrainedModel& model);

    int window() const noexcept { return engine_->config().window; }
    double target_scale() const noexcept { return target_scale_; }

    // Exactly window() readings in watts; result clamped to [0, target_scale].
    double predict(std::span<const double> window_w);

private:
    std::shared_ptr<const InferenceEngine<float>> engine_;
    InferenceEngine<float>::Workspace ws_;
    std::vector<double> scratch_;
    double input_mean_ = 0.0;
    double input_std_ = 1.0;
    double target_scale_ = 1.0;
};

}  // namespace wattscope::nn
