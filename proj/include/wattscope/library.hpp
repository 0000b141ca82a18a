#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wattscope/baselines.hpp"
#include "wattscope/model_key.hpp"
#include "wattscope/nn/model.hpp"

namespace wattscope::library {

using DisaggModel = std::variant<baselines::MeanModel, baselines::CoModel, nn::TrainedModel>;

ModelType model_type_of(const DisaggModel& model) noexcept;

// Model directory: meta.json tagged with model_type (plus weights.bin for
// sliding-window models). Throws library.IoFailure or the owning module's
// corruption error.
void save_model(const DisaggModel& model, const ModelKey& key, const std::filesystem::path& dir);
DisaggModel load_model(const std::filesystem::path& dir);

// Ordinal L1 over (variability, regularity, intensity) plus min(|dn|, 3),
// minus 0.5 when both carry the same job tag.
double key_distance(const ModelKey& query, const ModelKey& stored) noexcept;

struct LibraryEntry {
    std::string id;
    ModelKey key;
    std::uint64_t seq = 0;  // store order; larger is more recent
};

struct Selection {
    DisaggModel model;
    LibraryEntry entry;
    double distance = 0.0;
};

// Directory of model subdirectories plus index.json. Both model directories
// and the index are written to a temporary name and renamed into place, so
// the index never references a partially written model.
class ModelLibrary {
public:
    // Opens (creating if needed) a library rooted at root.
    explicit ModelLibrary(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    // Returns the stored id. Throws library.DuplicateKey, library.KeyMismatch
    // (key.model_type differs from the model), library.IoFailure.
    std::string store(const DisaggModel& model, const ModelKey& key, bool overwrite = false);

    const std::vector<LibraryEntry>& list() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    // Throws library.UnknownModel.
    DisaggModel load(const std::string& id) const;

    // Closest entry of query.model_type; ties go to the most recently stored.
    // Throws library.EmptyLibrary when no entry has that model type.
    Selection select(const ModelKey& query) const;
    // Same ranking without loading the model.
    std::pair<LibraryEntry, double> select_entry(const ModelKey& query) const;

    // Test hook invoked at each commit stage ("model_written",
    // "model_renamed", "index_written"); throwing simulates a crash there.
    using FaultHook = std::function<void(std::string_view stage)>;
    void set_fault_hook(FaultHook hook) { fault_hook_ = std::move(hook); }

private:
    void write_index(const std::vector<LibraryEntry>& entries, std::uint64_t next_seq);
    void stage(std::string_view name) const;

    std::filesystem::path root_;
    std::vector<LibraryEntry> entries_;
    std::uint64_t next_seq_ = 1;
    FaultHook fault_hook_;
};

}  // namespace wattscope::library
