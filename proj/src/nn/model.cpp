#include "wattscope/nn/model.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope::nn {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("nn", kind, detail);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
    out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) fail("CorruptModel", "truncated weight file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

}  // namespace

double TrainedModel::predict_scaled(std::span<const double> window_w) const {
    if (window_w.size() != static_cast<std::size_t>(config.window)) {
        fail("ShapeMismatch", "expected " + std::to_string(config.window) + " window values, got " +
                                  std::to_string(window_w.size()));
    }
    std::vector<double> standardized(window_w.size());
    for (std::size_t i = 0; i < window_w.size(); ++i) standardized[i] = (window_w[i] - input_mean) / input_std;
    const SlidingWindowNet net(config);
    return net.infer(weights, standardized);
}

double TrainedModel::predict(std::span<const double> window_w) const {
    return std::clamp(predict_scaled(window_w) * target_scale, 0.0, target_scale);
}

void save_trained_model(const TrainedModel& model, const fs::path& dir) {
    const ParamLayout layout(model.config);
    if (model.weights.size() != layout.total()) fail("ShapeMismatch", "weights do not match the config layout");
    fs::create_directories(dir);

    nlohmann::json meta;
    meta["magic"] = kModelMagic;
    meta["model_type"] = to_string(ModelType::SlidingWindow);
    meta["config"] = model.config;
    meta["input_norm"] = {{"mean", model.input_mean}, {"std", model.input_std}};
    meta["target_scale"] = model.target_scale;
    meta["key"] = model.key;
    auto manifest = nlohmann::json::array();
    for (const auto& s : layout.slices()) {
        manifest.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
    }
    meta["weights"] = {{"file", "weights.bin"}, {"count", layout.total()}, {"slices", manifest}};

    {
        std::ofstream out(dir / "weights.bin", std::ios::binary);
        out.write(kModelMagic, 4);
        put_u64(out, model.weights.size());
        for (double v : model.weights) put_u64(out, std::bit_cast<std::uint64_t>(v));
        if (!out) fail("IoFailure", "cannot write " + (dir / "weights.bin").string());
    }
    std::ofstream meta_out(dir / "meta.json", std::ios::binary);
    meta_out << meta.dump(2) << '\n';
    if (!meta_out) fail("IoFailure", "cannot write " + (dir / "meta.json").string());
}

TrainedModel load_trained_model(const fs::path& dir) {
    std::ifstream meta_in(dir / "meta.json", std::ios::binary);
    if (!meta_in) fail("IoFailure", "cannot open " + (dir / "meta.json").string());
    TrainedModel m;
    try {
        nlohmann::json meta;
        meta_in >> meta;
        if (meta.at("magic").get<std::string>() != kModelMagic) fail("CorruptModel", "bad magic in meta.json");
        m.config = meta.at("config").get<NetworkConfig>();
        m.input_mean = meta.at("input_norm").at("mean").get<double>();
        m.input_std = meta.at("input_norm").at("std").get<double>();
        m.target_scale = meta.at("target_scale").get<double>();
        m.key = meta.at("key").get<ModelKey>();

        validate(m.config);
        const ParamLayout layout(m.config);
        const auto& slices = meta.at("weights").at("slices");
        if (slices.size() != layout.slices().size()) fail("CorruptModel", "slice manifest does not match config");
        for (std::size_t i = 0; i < slices.size(); ++i) {
            const auto& expect = layout.slices()[i];
            if (slices[i].at("name").get<std::string>() != expect.name ||
                slices[i].at("offset").get<std::size_t>() != expect.offset ||
                slices[i].at("rows").get<int>() != expect.rows || slices[i].at("cols").get<int>() != expect.cols) {
                fail("CorruptModel", "slice " + expect.name + " does not match config");
            }
        }
        if (!(m.input_std > 0.0)) fail("CorruptModel", "input std must be positive");

        std::ifstream in(dir / meta.at("weights").at("file").get<std::string>(), std::ios::binary);
        if (!in) fail("IoFailure", "cannot open weight file in " + dir.string());
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, kModelMagic, 4) != 0) fail("CorruptModel", "bad magic in weight file");
        const auto count = get_u64(in);
        if (count != layout.total()) fail("CorruptModel", "weight count does not match config");
        m.weights.resize(count);
        for (auto& v : m.weights) v = std::bit_cast<double>(get_u64(in));
    } catch (const nlohmann::json::exception& e) {
        fail("CorruptModel", std::string("meta.json: ") + e.what());
    }
    return m;
}

}  // namespace wattscope::nn
