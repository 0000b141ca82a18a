#pragma once

#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "wattscope/characterize.hpp"

namespace wattscope {

enum class ModelType { Mean, CO, SlidingWindow };

const char* to_string(ModelType t) noexcept;
ModelType model_type_from_string(const std::string& s);

// Metadata a stored model is indexed by.
struct ModelKey {
    characterize::Level variability = characterize::Level::Medium;
    characterize::Level regularity = characterize::Level::Medium;
    characterize::Level intensity = characterize::Level::Medium;
    int n_background = 0;
    ModelType model_type = ModelType::SlidingWindow;
    std::optional<std::string> job_tag;

    friend bool operator==(const ModelKey&, const ModelKey&) = default;
};

void to_json(nlohmann::json& j, const ModelKey& k);
void from_json(const nlohmann::json& j, ModelKey& k);

}  // namespace wattscope
