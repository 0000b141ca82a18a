#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include <nlohmann/json_fwd.hpp>

namespace wattscope::powermodel {

// Server power as a cubic in CPU utilization plus a linear memory term:
//   watts = c0 + c1*u + c2*u^2 + c3*u^3 + mem_coeff * mem_gb
struct PowerCurve {
    std::array<double, 4> coeffs{};  // constant -> cubic
    double mem_coeff_w_per_gb = 0.0;
    double baseload_w = 0.0;
    double peak_w = 0.0;

    // Noise-free evaluation; no range checks.
    double evaluate(double cpu_util, double mem_gb) const noexcept;
};

struct PowerSample {
    double cpu_util = 0.0;
    double mem_gb = 0.0;
    double watts = 0.0;
};

// Relative jitter applied by power_of when a noise seed is supplied.
inline constexpr double kJitterFraction = 0.02;

// Ordinary least squares over [1, u, u^2, u^3, mem]. The memory column is
// dropped when memory never varies (it would be collinear with the intercept).
// Throws powermodel.Underdetermined or powermodel.NonMonotoneFit.
PowerCurve fit_power_curve(std::span<const PowerSample> samples);

// Throws powermodel.OutOfRange for cpu_util outside [0,1] or negative memory.
double power_of(const PowerCurve& curve, double cpu_util, double mem_gb,
                std::optional<std::uint64_t> noise_seed = std::nullopt);

// True when the cubic part is non-decreasing over a 101-point grid on [0,1].
bool is_monotone(const PowerCurve& curve);

// Curve with baseload 105W and peak 175W (105 + 50u + 10u^2 + 10u^3).
PowerCurve reference_curve();

void to_json(nlohmann::json& j, const PowerCurve& c);
void from_json(const nlohmann::json& j, PowerCurve& c);

}  // namespace wattscope::powermodel
