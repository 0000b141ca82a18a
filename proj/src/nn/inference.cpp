#include "wattscope/nn/inference.hpp"

#include <algorithm>

#include "wattscope/error.hpp"
#include "wattscope/nn/layout.hpp"
#include "wattscope/nn/model.hpp"

namespace wattscope::nn {

namespace {

template <typename Mat>
Mat slice(std::span<const double> params, const ParamLayout& layout, const std::string& name) {
    const auto& s = layout.at(name);
    return Eigen::Map<const Eigen::MatrixXd>(params.data() + s.offset, s.rows, s.cols).cast<typename Mat::Scalar>();
}

template <typename A>
auto sigmoid(const A& a) {
    return (typename A::Scalar(1) + (-a).exp()).inverse();
}

}  // namespace

template <typename Scalar>
InferenceEngine<Scalar>::InferenceEngine(const NetworkConfig& config, std::span<const double> params)
    : config_(config) {
    validate(config);
    const ParamLayout layout(config);
    if (params.size() != layout.total()) throw Error("nn", "ShapeMismatch", "parameter vector size mismatch");
    const int L = config.conv_out_length();
    pad_left_ = std::max((L - 1) * config.conv_stride + config.conv_kernel - config.window, 0) / 2;

    conv_w = slice<Mat>(params, layout, "conv.weight");
    conv_b = slice<Mat>(params, layout, "conv.bias");
    auto load = [&](BiGru& g, const std::string& prefix, int units) {
        g.units = units;
        const Mat wxf = slice<Mat>(params, layout, prefix + ".fwd.wx");
        const Mat wxb = slice<Mat>(params, layout, prefix + ".bwd.wx");
        g.wx.resize(6 * units, wxf.cols());
        g.wx << wxf, wxb;
        g.bias.resize(6 * units);
        g.bias << slice<Mat>(params, layout, prefix + ".fwd.bias"), slice<Mat>(params, layout, prefix + ".bwd.bias");
        for (auto [dir, name] : {std::pair{&g.fwd, ".fwd.wh"}, std::pair{&g.bwd, ".bwd.wh"}}) {
            const Mat wh = slice<Mat>(params, layout, prefix + name);
            dir->wh_zr = wh.topRows(2 * units);
            dir->wh_n = wh.bottomRows(units);
        }
    };
    if (!config.bypass_recurrent) {
        load(gru1_, "gru1", config.gru1_units);
        load(gru2_, "gru2", config.gru2_units);
    }
    dense1_w = slice<Mat>(params, layout, "dense1.weight");
    dense1_b = slice<Mat>(params, layout, "dense1.bias");
    dense2_w = slice<Mat>(params, layout, "dense2.weight").transpose();
    dense2_b = static_cast<Scalar>(params[layout.at("dense2.bias").offset]);
}

template <typename Scalar>
typename InferenceEngine<Scalar>::Workspace InferenceEngine<Scalar>::make_workspace() const {
    const int L = config_.conv_out_length();
    Workspace ws;
    ws.input.resize(config_.window, 1);
    ws.conv.resize(config_.conv_filters, L);
    if (!config_.bypass_recurrent) {
        ws.xproj1.resize(6 * gru1_.units, L);
        ws.seq1.resize(2 * gru1_.units, L);
        ws.xproj2.resize(6 * gru2_.units, L);
        const int hmax = std::max(gru1_.units, gru2_.units);
        ws.h.resize(hmax);
        ws.zr.resize(2 * hmax);
        ws.n.resize(hmax);
        ws.rh.resize(hmax);
    }
    ws.features.resize(config_.dense1_inputs());
    ws.dense.resize(config_.dense1_units);
    return ws;
}

template <typename Scalar>
void InferenceEngine<Scalar>::run_direction(const BiGru& layer, const GruDir& dir, const Mat& xproj,
                                            Eigen::Index row0, bool reverse, Workspace& ws, Mat* seq,
                                            Eigen::Index seq_row0) const {
    const Eigen::Index H = layer.units;
    const int L = static_cast<int>(xproj.cols());
    auto h = ws.h.head(H);
    auto zr = ws.zr.head(2 * H);
    auto n = ws.n.head(H);
    auto rh = ws.rh.head(H);
    h.setZero();
    for (int s = 0; s < L; ++s) {
        const int t = reverse ? L - 1 - s : s;
        zr.noalias() = dir.wh_zr * h;
        zr += xproj.col(t).segment(row0, 2 * H);
        zr = sigmoid(zr.array()).matrix();
        rh = zr.tail(H).cwiseProduct(h);
        n.noalias() = dir.wh_n * rh;
        n += xproj.col(t).segment(row0 + 2 * H, H);
        n = n.array().tanh().matrix();
        h = (n.array() + zr.head(H).array() * (h.array() - n.array())).matrix();
        if (seq) seq->col(t).segment(seq_row0, H) = h;
    }
}

template <typename Scalar>
double InferenceEngine<Scalar>::run(std::span<const double> window, Workspace& ws) const {
    const auto& c = config_;
    if (window.size() != static_cast<std::size_t>(c.window)) {
        throw Error("nn", "ShapeMismatch", "expected " + std::to_string(c.window) + " window values");
    }
    const int L = c.conv_out_length();
    for (int t = 0; t < L; ++t) {
        auto col = ws.conv.col(t);
        col = conv_b;
        for (int k = 0; k < c.conv_kernel; ++k) {
            const int idx = t * c.conv_stride + k - pad_left_;
            if (idx < 0 || idx >= c.window) continue;
            col += conv_w.col(k) * static_cast<Scalar>(window[static_cast<std::size_t>(idx)]);
        }
        if (!c.linear_activations) col = col.cwiseMax(Scalar(0));
    }

    if (c.bypass_recurrent) {
        ws.features = Eigen::Map<const Vec>(ws.conv.data(), ws.conv.size());
    } else {
        ws.xproj1.noalias() = gru1_.wx * ws.conv;
        ws.xproj1.colwise() += gru1_.bias;
        run_direction(gru1_, gru1_.fwd, ws.xproj1, 0, false, ws, &ws.seq1, 0);
        run_direction(gru1_, gru1_.bwd, ws.xproj1, 3 * gru1_.units, true, ws, &ws.seq1, gru1_.units);

        ws.xproj2.noalias() = gru2_.wx * ws.seq1;
        ws.xproj2.colwise() += gru2_.bias;
        const Eigen::Index H2 = gru2_.units;
        run_direction(gru2_, gru2_.fwd, ws.xproj2, 0, false, ws, nullptr, 0);
        ws.features.head(H2) = ws.h.head(H2);
        run_direction(gru2_, gru2_.bwd, ws.xproj2, 3 * H2, true, ws, nullptr, 0);
        ws.features.tail(H2) = ws.h.head(H2);
    }

    ws.dense.noalias() = dense1_w * ws.features;
    ws.dense += dense1_b;
    if (!c.linear_activations) ws.dense = ws.dense.cwiseMax(Scalar(0));
    return static_cast<double>(dense2_w.dot(ws.dense) + dense2_b);
}

template class InferenceEngine<float>;
template class InferenceEngine<double>;

Predictor::Predictor(const TrainedModel& model)
    : engine_(std::make_shared<const InferenceEngine<float>>(model.config, model.weights)),
      ws_(engine_->make_workspace()),
      scratch_(static_cast<std::size_t>(model.config.window)),
      input_mean_(model.input_mean),
      input_std_(model.input_std),
      target_scale_(model.target_scale) {}

double Predictor::predict(std::span<const double> window_w) {
    if (window_w.size() != scratch_.size()) {
        throw Error("nn", "ShapeMismatch", "expected " + std::to_string(scratch_.size()) + " window values, got " +
                                               std::to_string(window_w.size()));
    }
    for (std::size_t i = 0; i < window_w.size(); ++i) scratch_[i] = (window_w[i] - input_mean_) / input_std_;
    return std::clamp(engine_->run(scratch_, ws_) * target_scale_, 0.0, target_scale_);
}

}  // namespace wattscope::nn
