#pragma once

#include <cstdint>

#include <nlohmann/json_fwd.hpp>

namespace wattscope::nn {

// Sliding-window disaggregation network:
//   conv1d(relu) -> bi-GRU(seq) -> dropout -> bi-GRU(last) -> dense(relu)
//   -> dropout -> dense(linear)
struct NetworkConfig {
    int window = 100;
    int conv_filters = 16;
    int conv_kernel = 4;
    int conv_stride = 1;
    int gru1_units = 64;
    int gru2_units = 128;
    double dropout_p = 0.5;
    int dense1_units = 128;
    int epochs = 50;
    int batch_size = 1024;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    // Test-only variants used by gradient checks.
    bool linear_activations = false;  // relu -> identity
    bool bypass_recurrent = false;    // conv output feeds dense1 directly

    int conv_out_length() const noexcept;
    int dense1_inputs() const noexcept;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// w=100, 16 filters, GRU 64/128: the full-size network.
NetworkConfig full_config();
// w=20, 8 filters, GRU 16/32, 10 epochs, batch 64: fits unit tests and CI.
NetworkConfig desk_config();

// Throws nn.InvalidConfig.
void validate(const NetworkConfig& c);

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

}  // namespace wattscope::nn
