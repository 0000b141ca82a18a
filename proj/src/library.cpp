#include "wattscope/library.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope::library {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("library", kind, detail);
}

constexpr char kIndexName[] = "index.json";
constexpr char kIndexFormat[] = "wattscope-library-v1";

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    out.flush();
    if (!out) fail("IoFailure", "cannot write " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoFailure", "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail("IoFailure", path.string() + ": " + e.what());
    }
}

int ordinal(characterize::Level l) noexcept { return static_cast<int>(l); }

}  // namespace

ModelType model_type_of(const DisaggModel& model) noexcept {
    switch (model.index()) {
        case 0: return ModelType::Mean;
        case 1: return ModelType::CO;
        default: return ModelType::SlidingWindow;
    }
}

void save_model(const DisaggModel& model, const ModelKey& key, const fs::path& dir) {
    if (const auto* nnm = std::get_if<nn::TrainedModel>(&model)) {
        nn::TrainedModel copy = *nnm;
        copy.key = key;
        nn::save_trained_model(copy, dir);
        return;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail("IoFailure", "cannot create " + dir.string() + ": " + ec.message());
    nlohmann::json meta;
    meta["magic"] = nn::kModelMagic;
    meta["model_type"] = to_string(model_type_of(model));
    meta["key"] = key;
    if (const auto* m = std::get_if<baselines::MeanModel>(&model)) {
        meta["model"] = *m;
    } else {
        meta["model"] = std::get<baselines::CoModel>(model);
    }
    write_json(dir / "meta.json", meta);
}

DisaggModel load_model(const fs::path& dir) {
    const nlohmann::json meta = read_json(dir / "meta.json");
    try {
        if (meta.at("magic").get<std::string>() != nn::kModelMagic) fail("IoFailure", "bad magic in " + dir.string());
        switch (model_type_from_string(meta.at("model_type").get<std::string>())) {
            case ModelType::Mean: return meta.at("model").get<baselines::MeanModel>();
            case ModelType::CO: return meta.at("model").get<baselines::CoModel>();
            case ModelType::SlidingWindow: return nn::load_trained_model(dir);
        }
    } catch (const nlohmann::json::exception& e) {
        fail("IoFailure", dir.string() + ": " + e.what());
    }
    fail("IoFailure", "unreadable model in " + dir.string());
}

double key_distance(const ModelKey& query, const ModelKey& stored) noexcept {
    double d = std::abs(ordinal(query.variability) - ordinal(stored.variability)) +
               std::abs(ordinal(query.regularity) - ordinal(stored.regularity)) +
               std::abs(ordinal(query.intensity) - ordinal(stored.intensity));
    d += std::min(std::abs(query.n_background - stored.n_background), 3);
    if (query.job_tag && stored.job_tag && *query.job_tag == *stored.job_tag) d -= 0.5;
    return d;
}

ModelLibrary::ModelLibrary(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail("IoFailure", "cannot create " + root_.string() + ": " + ec.message());
    const fs::path index = root_ / kIndexName;
    if (!fs::exists(index)) return;
    const nlohmann::json j = read_json(index);
    try {
        if (j.at("format").get<std::string>() != kIndexFormat) fail("IoFailure", "unknown index format");
        next_seq_ = j.at("next_seq").get<std::uint64_t>();
        for (const auto& e : j.at("models")) {
            entries_.push_back({e.at("id").get<std::string>(), e.at("key").get<ModelKey>(),
                                e.at("seq").get<std::uint64_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        fail("IoFailure", index.string() + ": " + e.what());
    }
}

void ModelLibrary::stage(std::string_view name) const {
    if (fault_hook_) fault_hook_(name);
}

void ModelLibrary::write_index(const std::vector<LibraryEntry>& entries, std::uint64_t next_seq) {
    nlohmann::json j;
    j["format"] = kIndexFormat;
    j["next_seq"] = next_seq;
    j["models"] = nlohmann::json::array();
    for (const auto& e : entries) j["models"].push_back({{"id", e.id}, {"seq", e.seq}, {"key", e.key}});
    const fs::path tmp = root_ / (std::string(kIndexName) + ".tmp");
    write_json(tmp, j);
    stage("index_written");
    std::error_code ec;
    fs::rename(tmp, root_ / kIndexName, ec);
    if (ec) fail("IoFailure", "cannot commit index: " + ec.message());
}

std::string ModelLibrary::store(const DisaggModel& model, const ModelKey& key, bool overwrite) {
    if (key.model_type != model_type_of(model)) {
        fail("KeyMismatch", std::string("key says ") + to_string(key.model_type) + " but model is " +
                                to_string(model_type_of(model)));
    }
    if (key.n_background < 0) fail("KeyMismatch", "n_background must be non-negative");
    std::vector<LibraryEntry> updated;
    std::vector<std::string> replaced;
    for (const auto& e : entries_) {
        if (e.key == key) {
            if (!overwrite) fail("DuplicateKey", "an identical key is already stored as " + e.id);
            replaced.push_back(e.id);
        } else {
            updated.push_back(e);
        }
    }

    const std::uint64_t seq = next_seq_;
    char name[32];
    std::snprintf(name, sizeof name, "m%06llu", static_cast<unsigned long long>(seq));
    const std::string id = name;
    const fs::path tmp_dir = root_ / (".tmp-" + id);
    const fs::path final_dir = root_ / id;
    std::error_code ec;
    fs::remove_all(tmp_dir, ec);
    fs::remove_all(final_dir, ec);

    save_model(model, key, tmp_dir);
    stage("model_written");
    fs::rename(tmp_dir, final_dir, ec);
    if (ec) fail("IoFailure", "cannot commit model directory: " + ec.message());
    stage("model_renamed");

    updated.push_back({id, key, seq});
    write_index(updated, seq + 1);
    entries_ = std::move(updated);
    next_seq_ = seq + 1;
    for (const auto& old : replaced) fs::remove_all(root_ / old, ec);
    return id;
}

DisaggModel ModelLibrary::load(const std::string& id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return load_model(root_ / id);
    }
    fail("UnknownModel", "no stored model with id " + id);
}

std::pair<LibraryEntry, double> ModelLibrary::select_entry(const ModelKey& query) const {
    const LibraryEntry* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) {
        if (e.key.model_type != query.model_type) continue;
        const double d = key_distance(query, e.key);
        if (!best || d < best_d || (d == best_d && e.seq > best->seq)) {
            best = &e;
            best_d = d;
        }
    }
    if (!best) fail("EmptyLibrary", std::string("no ") + to_string(query.model_type) + " models stored");
    return {*best, best_d};
}

Selection ModelLibrary::select(const ModelKey& query) const {
    auto [entry, d] = select_entry(query);
    return {load_model(root_ / entry.id), entry, d};
}

}  // namespace wattscope::library
