#include "wattscope/nn/network.hpp"

#include <cmath>

#include "wattscope/error.hpp"

namespace wattscope::nn {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;
using Array = Eigen::ArrayXXd;

ConstMap view(std::span<const double> params, const ParamSlice& s) {
    return ConstMap(params.data() + s.offset, s.rows, s.cols);
}

MutMap view(std::span<double> grad, const ParamSlice& s) {
    return MutMap(grad.data() + s.offset, s.rows, s.cols);
}

template <typename Derived>
Array sigmoid(const Eigen::ArrayBase<Derived>& a) {
    return (1.0 + (-a).exp()).inverse();
}

struct GruWeights {
    ConstMap wx;
    ConstMap wh;
    ConstMap bias;
};

struct GruGrads {
    MutMap wx;
    MutMap wh;
    MutMap bias;
};

GruWeights gru_weights(std::span<const double> params, const ParamLayout& layout, const std::string& prefix) {
    return GruWeights{view(params, layout.at(prefix + ".wx")), view(params, layout.at(prefix + ".wh")),
                      view(params, layout.at(prefix + ".bias"))};
}

GruGrads gru_grads(std::span<double> grad, const ParamLayout& layout, const std::string& prefix) {
    return GruGrads{view(grad, layout.at(prefix + ".wx")), view(grad, layout.at(prefix + ".wh")),
                    view(grad, layout.at(prefix + ".bias"))};
}

// Per-direction activations kept for backpropagation; every matrix is
// H x (L*B) except xproj (3H x (L*B)).
struct GruCache {
    Matrix xproj;
    Matrix z;
    Matrix r;
    Matrix n;
    Matrix hprev;
    Matrix rh;
    Matrix out;
};

//   z = s(Wxz x + Whz h + bz)      r = s(Wxr x + Whr h + br)
//   n = tanh(Wxn x + Whn (r*h) + bn)
//   h' = (1 - z) * n + z * h
void gru_forward(const GruWeights& w, const Matrix& x, int L, int B, bool reverse, GruCache& c) {
    const auto H = w.wh.cols();
    const Eigen::Index LB = static_cast<Eigen::Index>(L) * B;
    c.xproj.noalias() = w.wx * x;
    c.xproj.colwise() += w.bias.col(0);
    c.z.resize(H, LB);
    c.r.resize(H, LB);
    c.n.resize(H, LB);
    c.hprev.resize(H, LB);
    c.rh.resize(H, LB);
    c.out.resize(H, LB);

    Matrix h = Matrix::Zero(H, B);
    Matrix zr(2 * H, B);
    Matrix nn_pre(H, B);
    for (int s = 0; s < L; ++s) {
        const int t = reverse ? L - 1 - s : s;
        const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
        zr.noalias() = w.wh.topRows(2 * H) * h;
        zr += c.xproj.block(0, col, 2 * H, B);
        auto z = c.z.middleCols(col, B);
        auto r = c.r.middleCols(col, B);
        z = sigmoid(zr.topRows(H).array()).matrix();
        r = sigmoid(zr.bottomRows(H).array()).matrix();
        c.hprev.middleCols(col, B) = h;
        c.rh.middleCols(col, B) = r.cwiseProduct(h);
        nn_pre.noalias() = w.wh.bottomRows(H) * c.rh.middleCols(col, B);
        nn_pre += c.xproj.block(2 * H, col, H, B);
        auto n = c.n.middleCols(col, B);
        n = nn_pre.array().tanh().matrix();
        h = ((1.0 - z.array()) * n.array() + z.array() * h.array()).matrix();
        c.out.middleCols(col, B) = h;
    }
}

// dout: H x (L*B) gradient w.r.t. each step's output. Accumulates into g and dx.
struct BackwardScratch {
    Matrix dxp;
    Matrix dh_next;
    Matrix drh;
    Matrix dhp;
};

void gru_backward(const GruWeights& w, GruGrads& g, const Matrix& x, const GruCache& c, const Matrix& dout, int L,
                  int B, bool reverse, Matrix& dx, BackwardScratch& bs) {
    const auto H = w.wh.cols();
    const Eigen::Index LB = static_cast<Eigen::Index>(L) * B;
    Matrix& dxp = bs.dxp;
    Matrix& dh_next = bs.dh_next;
    Matrix& drh = bs.drh;
    Matrix& dhp = bs.dhp;
    dxp.resize(3 * H, LB);
    dh_next.setZero(H, B);
    drh.resize(H, B);
    for (int s = L - 1; s >= 0; --s) {
        const int t = reverse ? L - 1 - s : s;
        const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
        const Array dh = (dout.middleCols(col, B) + dh_next).array();
        const Array z = c.z.middleCols(col, B).array();
        const Array r = c.r.middleCols(col, B).array();
        const Array n = c.n.middleCols(col, B).array();
        const Array hp = c.hprev.middleCols(col, B).array();

        const Array dan = dh * (1.0 - z) * (1.0 - n * n);
        dxp.block(2 * H, col, H, B) = dan.matrix();
        drh.noalias() = w.wh.bottomRows(H).transpose() * dan.matrix();
        const Array dar = drh.array() * hp * r * (1.0 - r);
        const Array daz = dh * (hp - n) * z * (1.0 - z);
        dxp.block(0, col, H, B) = daz.matrix();
        dxp.block(H, col, H, B) = dar.matrix();

        g.wh.topRows(2 * H).noalias() += dxp.block(0, col, 2 * H, B) * hp.matrix().transpose();
        g.wh.bottomRows(H).noalias() += dan.matrix() * c.rh.middleCols(col, B).transpose();

        dhp = (dh * z + drh.array() * r).matrix();
        dhp.noalias() += w.wh.topRows(2 * H).transpose() * dxp.block(0, col, 2 * H, B);
        dh_next.swap(dhp);
    }
    g.wx.noalias() += dxp * x.transpose();
    g.bias.col(0) += dxp.rowwise().sum();
    dx.noalias() += w.wx.transpose() * dxp;
}

struct ForwardCache {
    Matrix conv_pre;  // F x (L*B)
    Matrix conv_out;
    GruCache g1f, g1b, g2f, g2b;
    Matrix g1;        // 2H1 x (L*B) before dropout
    Matrix g1_drop;
    Matrix features;  // dense1 input
    Matrix a1;
    Matrix y1_drop;
    Matrix out;       // 1 x B
};

int conv_pad_left(const NetworkConfig& c) {
    const int L = c.conv_out_length();
    const int total = std::max((L - 1) * c.conv_stride + c.conv_kernel - c.window, 0);
    return total / 2;
}

}  // namespace

SlidingWindowNet::SlidingWindowNet(NetworkConfig config) : config_(config), layout_((validate(config), config)) {}

std::vector<double> SlidingWindowNet::initialize(std::uint64_t seed) const {
    std::vector<double> params(layout_.total(), 0.0);
    std::mt19937_64 rng(seed);
    auto glorot = [&](const std::string& name, double fan_in, double fan_out) {
        const auto& s = layout_.at(name);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (std::size_t i = 0; i < s.size(); ++i) params[s.offset + i] = u(rng);
    };
    auto orthogonal = [&](const std::string& name) {
        const auto& s = layout_.at(name);
        const int H = s.cols;
        std::normal_distribution<double> g(0.0, 1.0);
        MutMap wh(params.data() + s.offset, s.rows, s.cols);
        for (int gate = 0; gate < 3; ++gate) {
            Matrix a(H, H);
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
            Eigen::HouseholderQR<Matrix> qr(a);
            Matrix q = qr.householderQ() * Matrix::Identity(H, H);
            const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
            for (int j = 0; j < H; ++j) {
                if (rr(j, j) < 0.0) q.col(j) = -q.col(j);
            }
            wh.block(gate * H, 0, H, H) = q;
        }
    };

    const auto& c = config_;
    glorot("conv.weight", c.conv_kernel, c.conv_kernel * c.conv_filters);
    if (!c.bypass_recurrent) {
        for (const char* dir : {"fwd", "bwd"}) {
            glorot(std::string("gru1.") + dir + ".wx", c.conv_filters, 3 * c.gru1_units);
            orthogonal(std::string("gru1.") + dir + ".wh");
        }
        for (const char* dir : {"fwd", "bwd"}) {
            glorot(std::string("gru2.") + dir + ".wx", 2 * c.gru1_units, 3 * c.gru2_units);
            orthogonal(std::string("gru2.") + dir + ".wh");
        }
    }
    glorot("dense1.weight", c.dense1_inputs(), c.dense1_units);
    glorot("dense2.weight", c.dense1_units, 1);
    return params;
}

DropoutMasks SlidingWindowNet::sample_masks(int batch, std::mt19937_64& rng) const {
    const auto& c = config_;
    const double keep = 1.0 - c.dropout_p;
    std::bernoulli_distribution coin(keep);
    auto fill = [&](Matrix& m, Eigen::Index rows, Eigen::Index cols) {
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = coin(rng) ? 1.0 / keep : 0.0;
    };
    DropoutMasks masks;
    if (!c.bypass_recurrent) {
        fill(masks.recurrent, 2 * c.gru1_units, static_cast<Eigen::Index>(c.conv_out_length()) * batch);
    }
    fill(masks.dense, c.dense1_units, batch);
    return masks;
}

namespace {

void run_forward(const NetworkConfig& c, const ParamLayout& layout, std::span<const double> params,
                 const Matrix& windows, const DropoutMasks* masks, ForwardCache& fc) {
    const int w = c.window;
    const int L = c.conv_out_length();
    const int B = static_cast<int>(windows.cols());
    const int left = conv_pad_left(c);
    if (windows.rows() != w) throw Error("nn", "ShapeMismatch", "window rows do not match config");

    const auto wc = view(params, layout.at("conv.weight"));
    const auto bc = view(params, layout.at("conv.bias"));
    fc.conv_pre.resize(c.conv_filters, static_cast<Eigen::Index>(L) * B);
    for (int t = 0; t < L; ++t) {
        auto blk = fc.conv_pre.middleCols(static_cast<Eigen::Index>(t) * B, B);
        blk.colwise() = bc.col(0);
        for (int k = 0; k < c.conv_kernel; ++k) {
            const int idx = t * c.conv_stride + k - left;
            if (idx < 0 || idx >= w) continue;
            blk.noalias() += wc.col(k) * windows.row(idx);
        }
    }
    fc.conv_out = c.linear_activations ? fc.conv_pre : Matrix(fc.conv_pre.cwiseMax(0.0));

    if (c.bypass_recurrent) {
        const int F = c.conv_filters;
        fc.features.resize(static_cast<Eigen::Index>(F) * L, B);
        for (int t = 0; t < L; ++t) {
            fc.features.middleRows(static_cast<Eigen::Index>(t) * F, F) =
                fc.conv_out.middleCols(static_cast<Eigen::Index>(t) * B, B);
        }
    } else {
        gru_forward(gru_weights(params, layout, "gru1.fwd"), fc.conv_out, L, B, false, fc.g1f);
        gru_forward(gru_weights(params, layout, "gru1.bwd"), fc.conv_out, L, B, true, fc.g1b);
        const int H1 = c.gru1_units;
        fc.g1.resize(2 * H1, static_cast<Eigen::Index>(L) * B);
        fc.g1.topRows(H1) = fc.g1f.out;
        fc.g1.bottomRows(H1) = fc.g1b.out;
        fc.g1_drop = masks ? Matrix(fc.g1.cwiseProduct(masks->recurrent)) : fc.g1;

        gru_forward(gru_weights(params, layout, "gru2.fwd"), fc.g1_drop, L, B, false, fc.g2f);
        gru_forward(gru_weights(params, layout, "gru2.bwd"), fc.g1_drop, L, B, true, fc.g2b);
        const int H2 = c.gru2_units;
        fc.features.resize(2 * H2, B);
        fc.features.topRows(H2) = fc.g2f.out.middleCols(static_cast<Eigen::Index>(L - 1) * B, B);
        fc.features.bottomRows(H2) = fc.g2b.out.middleCols(0, B);
    }

    const auto w1 = view(params, layout.at("dense1.weight"));
    const auto b1 = view(params, layout.at("dense1.bias"));
    fc.a1.noalias() = w1 * fc.features;
    fc.a1.colwise() += b1.col(0);
    Matrix y1 = c.linear_activations ? fc.a1 : Matrix(fc.a1.cwiseMax(0.0));
    fc.y1_drop = masks ? Matrix(y1.cwiseProduct(masks->dense)) : y1;

    const auto w2 = view(params, layout.at("dense2.weight"));
    const auto b2 = view(params, layout.at("dense2.bias"));
    fc.out.noalias() = w2 * fc.y1_drop;
    fc.out.array() += b2(0, 0);
}

}  // namespace

Vector SlidingWindowNet::forward(std::span<const double> params, const Matrix& windows,
                                 const DropoutMasks* masks) const {
    if (params.size() != layout_.total()) throw Error("nn", "ShapeMismatch", "parameter vector size mismatch");
    ForwardCache fc;
    run_forward(config_, layout_, params, windows, masks, fc);
    return fc.out.row(0).transpose();
}

double SlidingWindowNet::loss(std::span<const double> params, const Matrix& windows, const Vector& targets,
                              const DropoutMasks* masks, std::span<double> grad) const {
    if (params.size() != layout_.total()) throw Error("nn", "ShapeMismatch", "parameter vector size mismatch");
    if (targets.size() != windows.cols()) throw Error("nn", "ShapeMismatch", "one target per window required");
    const auto& c = config_;
    const int B = static_cast<int>(windows.cols());
    const int L = c.conv_out_length();

    // Reused across calls on the same thread to avoid reallocating the caches.
    thread_local ForwardCache fc;
    thread_local BackwardScratch bs;
    thread_local Matrix dseq;
    thread_local Matrix dg1;
    thread_local Matrix dconv;
    run_forward(c, layout_, params, windows, masks, fc);
    const Vector diff = fc.out.row(0).transpose() - targets;
    const double value = diff.squaredNorm() / B;
    if (grad.empty()) return value;
    if (grad.size() != params.size()) throw Error("nn", "ShapeMismatch", "gradient buffer size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);

    const Matrix dout = (2.0 / B) * diff.transpose();  // 1 x B

    auto gw2 = view(grad, layout_.at("dense2.weight"));
    auto gb2 = view(grad, layout_.at("dense2.bias"));
    gw2.noalias() = dout * fc.y1_drop.transpose();
    gb2(0, 0) = dout.sum();

    const auto w2 = view(params, layout_.at("dense2.weight"));
    Matrix da1 = w2.transpose() * dout;
    if (masks) da1 = da1.cwiseProduct(masks->dense);
    if (!c.linear_activations) da1 = (fc.a1.array() > 0.0).select(da1, 0.0);

    auto gw1 = view(grad, layout_.at("dense1.weight"));
    auto gb1 = view(grad, layout_.at("dense1.bias"));
    gw1.noalias() = da1 * fc.features.transpose();
    gb1.col(0) = da1.rowwise().sum();
    const auto w1 = view(params, layout_.at("dense1.weight"));
    const Matrix dfeat = w1.transpose() * da1;

    const int F = c.conv_filters;
    dconv.setZero(F, static_cast<Eigen::Index>(L) * B);
    if (c.bypass_recurrent) {
        for (int t = 0; t < L; ++t) {
            dconv.middleCols(static_cast<Eigen::Index>(t) * B, B) = dfeat.middleRows(static_cast<Eigen::Index>(t) * F, F);
        }
    } else {
        const int H1 = c.gru1_units;
        const int H2 = c.gru2_units;
        const Eigen::Index LB = static_cast<Eigen::Index>(L) * B;

        dg1.setZero(2 * H1, LB);
        {
            dseq.setZero(H2, LB);
            dseq.middleCols(static_cast<Eigen::Index>(L - 1) * B, B) = dfeat.topRows(H2);
            auto g = gru_grads(grad, layout_, "gru2.fwd");
            gru_backward(gru_weights(params, layout_, "gru2.fwd"), g, fc.g1_drop, fc.g2f, dseq, L, B, false, dg1, bs);
        }
        {
            dseq.setZero(H2, LB);
            dseq.middleCols(0, B) = dfeat.bottomRows(H2);
            auto g = gru_grads(grad, layout_, "gru2.bwd");
            gru_backward(gru_weights(params, layout_, "gru2.bwd"), g, fc.g1_drop, fc.g2b, dseq, L, B, true, dg1, bs);
        }
        if (masks) dg1.array() *= masks->recurrent.array();
        {
            dseq = dg1.topRows(H1);
            auto g = gru_grads(grad, layout_, "gru1.fwd");
            gru_backward(gru_weights(params, layout_, "gru1.fwd"), g, fc.conv_out, fc.g1f, dseq, L, B, false, dconv, bs);
        }
        {
            dseq = dg1.bottomRows(H1);
            auto g = gru_grads(grad, layout_, "gru1.bwd");
            gru_backward(gru_weights(params, layout_, "gru1.bwd"), g, fc.conv_out, fc.g1b, dseq, L, B, true, dconv, bs);
        }
    }

    if (!c.linear_activations) dconv = (fc.conv_pre.array() > 0.0).select(dconv, 0.0);
    auto gwc = view(grad, layout_.at("conv.weight"));
    auto gbc = view(grad, layout_.at("conv.bias"));
    gbc.col(0) = dconv.rowwise().sum();
    const int left = conv_pad_left(c);
    for (int t = 0; t < L; ++t) {
        const auto blk = dconv.middleCols(static_cast<Eigen::Index>(t) * B, B);
        for (int k = 0; k < c.conv_kernel; ++k) {
            const int idx = t * c.conv_stride + k - left;
            if (idx < 0 || idx >= c.window) continue;
            gwc.col(k).noalias() += blk * windows.row(idx).transpose();
        }
    }
    return value;
}

double SlidingWindowNet::infer(std::span<const double> params, std::span<const double> window) const {
    const auto& c = config_;
    if (params.size() != layout_.total()) throw Error("nn", "ShapeMismatch", "parameter vector size mismatch");
    if (window.size() != static_cast<std::size_t>(c.window)) {
        throw Error("nn", "ShapeMismatch", "expected " + std::to_string(c.window) + " window values");
    }
    const int L = c.conv_out_length();
    const int left = conv_pad_left(c);
    const auto wc = view(params, layout_.at("conv.weight"));
    const auto bc = view(params, layout_.at("conv.bias"));

    Matrix conv(c.conv_filters, L);
    for (int t = 0; t < L; ++t) {
        auto col = conv.col(t);
        col = bc.col(0);
        for (int k = 0; k < c.conv_kernel; ++k) {
            const int idx = t * c.conv_stride + k - left;
            if (idx < 0 || idx >= c.window) continue;
            col += wc.col(k) * window[static_cast<std::size_t>(idx)];
        }
        if (!c.linear_activations) col = col.cwiseMax(0.0);
    }

    Vector features;
    if (c.bypass_recurrent) {
        features = Eigen::Map<const Vector>(conv.data(), conv.size());
    } else {
        // Runs one direction over the columns of x; returns either every state
        // (seq != nullptr) or only the last one.
        auto run = [L](const GruWeights& g, const Matrix& x, bool reverse, Matrix* seq) {
            const auto H = g.wh.cols();
            Matrix xp = g.wx * x;
            xp.colwise() += g.bias.col(0);
            Vector h = Vector::Zero(H);
            Vector zr(2 * H);
            Vector n(H);
            Vector rh(H);
            for (int s = 0; s < L; ++s) {
                const int t = reverse ? L - 1 - s : s;
                zr.noalias() = g.wh.topRows(2 * H) * h;
                zr += xp.col(t).head(2 * H);
                zr = sigmoid(zr.array()).matrix();
                rh = zr.tail(H).cwiseProduct(h);
                n.noalias() = g.wh.bottomRows(H) * rh;
                n += xp.col(t).tail(H);
                n = n.array().tanh().matrix();
                h = ((1.0 - zr.head(H).array()) * n.array() + zr.head(H).array() * h.array()).matrix();
                if (seq) seq->col(t) = h;
            }
            return h;
        };
        const int H1 = c.gru1_units;
        const int H2 = c.gru2_units;
        Matrix g1(2 * H1, L);
        Matrix fwd_seq(H1, L);
        Matrix bwd_seq(H1, L);
        run(gru_weights(params, layout_, "gru1.fwd"), conv, false, &fwd_seq);
        run(gru_weights(params, layout_, "gru1.bwd"), conv, true, &bwd_seq);
        g1.topRows(H1) = fwd_seq;
        g1.bottomRows(H1) = bwd_seq;
        features.resize(2 * H2);
        features.head(H2) = run(gru_weights(params, layout_, "gru2.fwd"), g1, false, nullptr);
        features.tail(H2) = run(gru_weights(params, layout_, "gru2.bwd"), g1, true, nullptr);
    }

    const auto w1 = view(params, layout_.at("dense1.weight"));
    const auto b1 = view(params, layout_.at("dense1.bias"));
    Vector y1 = w1 * features + b1.col(0);
    if (!c.linear_activations) y1 = y1.cwiseMax(0.0);
    const auto w2 = view(params, layout_.at("dense2.weight"));
    const auto b2 = view(params, layout_.at("dense2.bias"));
    return (w2 * y1)(0) + b2(0, 0);
}

}  // namespace wattscope::nn
