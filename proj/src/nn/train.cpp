#include "wattscope/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "wattscope/error.hpp"
#include "wattscope/util.hpp"

namespace wattscope::nn {

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("nn", kind, detail);
}

constexpr int kMaxMicroBatch = 256;

using AlignedBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

class Adam {
public:
    Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

    void step(AlignedBuffer& params, const std::vector<double>& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, t_);
        const double c2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    double lr_;
    int t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace

std::vector<double> window_at(std::span<const double> series, std::size_t t, int window) {
    std::vector<double> out(static_cast<std::size_t>(window));
    for (int j = 0; j < window; ++j) {
        const auto offset = static_cast<std::ptrdiff_t>(t) - (window - 1) + j;
        out[static_cast<std::size_t>(j)] = series[static_cast<std::size_t>(std::max<std::ptrdiff_t>(offset, 0))];
    }
    return out;
}

TrainedModel train(const NetworkConfig& config, const TrainingData& data, const TrainOptions& options) {
    validate(config);
    if (!(data.cap_w > 0.0)) fail("ShapeMismatch", "cap must be positive");
    std::size_t total = 0;
    double target_max = 0.0;
    for (const auto& p : data.pairs) {
        if (p.aggregate_w.size() != p.target_w.size()) fail("ShapeMismatch", "aggregate and target lengths differ");
        if (!p.aggregate_w.empty() && p.aggregate_w.size() < static_cast<std::size_t>(config.window)) {
            fail("ShapeMismatch", "series shorter than the window");
        }
        total += p.aggregate_w.size();
        for (double v : p.target_w) target_max = std::max(target_max, v);
    }
    if (total == 0) fail("EmptyDataset", "no training samples");
    if (!(target_max > 0.0)) fail("DegenerateTarget", "targets are identically zero");

    TrainedModel model;
    model.config = config;
    model.target_scale = data.cap_w;
    model.key = options.key;

    {
        double s = 0.0;
        double s2 = 0.0;
        for (const auto& p : data.pairs) {
            for (double v : p.aggregate_w) {
                s += v;
                s2 += v * v;
            }
        }
        const double n = static_cast<double>(total);
        model.input_mean = s / n;
        const double var = std::max(0.0, s2 / n - model.input_mean * model.input_mean);
        const double sd = std::sqrt(var);
        model.input_std = sd > 1e-9 ? sd : 1.0;
    }

    const int w = config.window;
    Matrix all_windows(w, static_cast<Eigen::Index>(total));
    Vector all_targets(static_cast<Eigen::Index>(total));
    {
        Eigen::Index col = 0;
        for (const auto& p : data.pairs) {
            for (std::size_t t = 0; t < p.aggregate_w.size(); ++t, ++col) {
                for (int j = 0; j < w; ++j) {
                    const auto offset = static_cast<std::ptrdiff_t>(t) - (w - 1) + j;
                    const double v = p.aggregate_w[static_cast<std::size_t>(std::max<std::ptrdiff_t>(offset, 0))];
                    all_windows(j, col) = (v - model.input_mean) / model.input_std;
                }
                all_targets(col) = p.target_w[t] / data.cap_w;
            }
        }
    }

    const SlidingWindowNet net(config);
    const std::vector<double> init = net.initialize(derive_seed(config.seed, 1));
    AlignedBuffer weights(init.begin(), init.end());
    Adam adam(weights.size(), config.learning_rate);
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 2));
    std::mt19937_64 dropout_rng(derive_seed(config.seed, 3));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::vector<double> grad(weights.size());
    AlignedBuffer micro_grad(weights.size());
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const auto bsize = static_cast<double>(end - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t ms = start; ms < end; ms += kMaxMicroBatch) {
                const std::size_t me = std::min(end, ms + kMaxMicroBatch);
                const auto mb = static_cast<Eigen::Index>(me - ms);
                Matrix xb(w, mb);
                Vector yb(mb);
                for (Eigen::Index i = 0; i < mb; ++i) {
                    const auto src = order[ms + static_cast<std::size_t>(i)];
                    xb.col(i) = all_windows.col(src);
                    yb(i) = all_targets(src);
                }
                const DropoutMasks masks = net.sample_masks(static_cast<int>(mb), dropout_rng);
                const double l = net.loss(weights, xb, yb, &masks, micro_grad);
                const double weight = static_cast<double>(mb) / bsize;
                for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += weight * micro_grad[i];
                epoch_loss += l * static_cast<double>(mb);
            }
            adam.step(weights, grad);
        }
        if (options.on_epoch) options.on_epoch(epoch, epoch_loss / static_cast<double>(total));
    }
    model.weights.assign(weights.begin(), weights.end());
    return model;
}

std::vector<double> predict_series(const TrainedModel& model, std::span<const double> aggregate_w) {
    std::vector<double> out(aggregate_w.size());
    for (std::size_t t = 0; t < aggregate_w.size(); ++t) {
        out[t] = model.predict(window_at(aggregate_w, t, model.config.window));
    }
    return out;
}

GradCheckResult grad_check(const NetworkConfig& config, const GradCheckSample& sample) {
    const SlidingWindowNet net(config);
    if (net.parameter_count() > 2000) fail("ConfigTooLarge", "grad_check is limited to 2000 parameters");
    if (sample.windows.empty() || sample.windows.size() != sample.targets.size()) {
        fail("ShapeMismatch", "grad_check needs one target per window");
    }
    const auto B = static_cast<Eigen::Index>(sample.windows.size());
    Matrix x(config.window, B);
    Vector y(B);
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto& win = sample.windows[static_cast<std::size_t>(b)];
        if (win.size() != static_cast<std::size_t>(config.window)) fail("ShapeMismatch", "window length mismatch");
        for (int j = 0; j < config.window; ++j) x(j, b) = win[static_cast<std::size_t>(j)];
        y(b) = sample.targets[static_cast<std::size_t>(b)];
    }

    std::vector<double> params = net.initialize(derive_seed(config.seed, 1));
    // Non-zero biases so every bias path carries gradient.
    std::mt19937_64 rng(derive_seed(config.seed, 4));
    std::uniform_real_distribution<double> small(-0.1, 0.1);
    for (const auto& s : net.layout().slices()) {
        if (s.name.ends_with("bias")) {
            for (std::size_t i = 0; i < s.size(); ++i) params[s.offset + i] = small(rng);
        }
    }

    std::optional<DropoutMasks> masks;
    if (sample.dropout_frozen) {
        std::mt19937_64 mask_rng(derive_seed(config.seed, 3));
        masks = net.sample_masks(static_cast<int>(B), mask_rng);
    }
    const DropoutMasks* mp = masks ? &*masks : nullptr;

    std::vector<double> analytic(params.size());
    net.loss(params, x, y, mp, analytic);

    constexpr double h = 1e-5;
    GradCheckResult result;
    result.parameter_count = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = net.loss(params, x, y, mp, {});
        params[i] = saved - h;
        const double down = net.loss(params, x, y, mp, {});
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > result.max_relative_error) {
            result.max_relative_error = rel;
            result.worst_index = i;
        }
    }
    return result;
}

}  // namespace wattscope::nn
