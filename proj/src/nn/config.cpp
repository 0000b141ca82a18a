#include "wattscope/nn/config.hpp"

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope::nn {

int NetworkConfig::conv_out_length() const noexcept {
    return (window + conv_stride - 1) / conv_stride;
}

int NetworkConfig::dense1_inputs() const noexcept {
    return bypass_recurrent ? conv_filters * conv_out_length() : 2 * gru2_units;
}

NetworkConfig full_config() { return NetworkConfig{}; }

NetworkConfig desk_config() {
    NetworkConfig c;
    c.window = 20;
    c.conv_filters = 8;
    c.gru1_units = 16;
    c.gru2_units = 32;
    c.epochs = 10;
    c.batch_size = 64;
    return c;
}

void validate(const NetworkConfig& c) {
    auto bad = [](const std::string& what) { throw Error("nn", "InvalidConfig", what); };
    if (c.window < 1) bad("window must be positive");
    if (c.conv_kernel < 1 || c.conv_filters < 1 || c.conv_stride < 1) bad("conv sizes must be positive");
    if (c.window < c.conv_kernel) bad("window must be at least the conv kernel size");
    if (c.gru1_units < 1 || c.gru2_units < 1 || c.dense1_units < 1) bad("layer sizes must be positive");
    if (!(c.dropout_p >= 0.0 && c.dropout_p < 1.0)) bad("dropout_p must lie in [0,1)");
    if (c.epochs < 0 || c.batch_size < 1) bad("epochs must be non-negative and batch_size positive");
    if (!(c.learning_rate > 0.0)) bad("learning_rate must be positive");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"window", c.window},
                       {"conv_filters", c.conv_filters},
                       {"conv_kernel", c.conv_kernel},
                       {"conv_stride", c.conv_stride},
                       {"gru1_units", c.gru1_units},
                       {"gru2_units", c.gru2_units},
                       {"merge", "concat"},
                       {"dropout_p", c.dropout_p},
                       {"dense1_units", c.dense1_units},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"seed", c.seed},
                       {"linear_activations", c.linear_activations},
                       {"bypass_recurrent", c.bypass_recurrent}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
    NetworkConfig d;
    c.window = j.value("window", d.window);
    c.conv_filters = j.value("conv_filters", d.conv_filters);
    c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
    c.conv_stride = j.value("conv_stride", d.conv_stride);
    c.gru1_units = j.value("gru1_units", d.gru1_units);
    c.gru2_units = j.value("gru2_units", d.gru2_units);
    c.dropout_p = j.value("dropout_p", d.dropout_p);
    c.dense1_units = j.value("dense1_units", d.dense1_units);
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.seed = j.value("seed", d.seed);
    c.linear_activations = j.value("linear_activations", false);
    c.bypass_recurrent = j.value("bypass_recurrent", false);
}

}  // namespace wattscope::nn
