#include "wattscope/model_key.hpp"

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope {

const char* to_string(ModelType t) noexcept {
    switch (t) {
        case ModelType::Mean: return "mean";
        case ModelType::CO: return "co";
        case ModelType::SlidingWindow: return "sliding_window";
    }
    return "?";
}

ModelType model_type_from_string(const std::string& s) {
    if (s == "mean") return ModelType::Mean;
    if (s == "co") return ModelType::CO;
    if (s == "sliding_window") return ModelType::SlidingWindow;
    throw Error("library", "UnknownModelType", "'" + s + "' is not one of mean/co/sliding_window");
}

void to_json(nlohmann::json& j, const ModelKey& k) {
    j = nlohmann::json{{"variability", characterize::to_string(k.variability)},
                       {"regularity", characterize::to_string(k.regularity)},
                       {"intensity", characterize::to_string(k.intensity)},
                       {"n_background", k.n_background},
                       {"model_type", to_string(k.model_type)}};
    j["job_tag"] = k.job_tag ? nlohmann::json(*k.job_tag) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ModelKey& k) {
    k.variability = characterize::level_from_string(j.at("variability").get<std::string>());
    k.regularity = characterize::level_from_string(j.at("regularity").get<std::string>());
    k.intensity = characterize::level_from_string(j.at("intensity").get<std::string>());
    k.n_background = j.at("n_background").get<int>();
    k.model_type = model_type_from_string(j.at("model_type").get<std::string>());
    if (j.contains("job_tag") && !j.at("job_tag").is_null()) {
        k.job_tag = j.at("job_tag").get<std::string>();
    } else {
        k.job_tag.reset();
    }
}

}  // namespace wattscope
