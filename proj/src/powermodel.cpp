#include "wattscope/powermodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope::powermodel {

namespace {

constexpr int kGridPoints = 101;

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("powermodel", kind, detail);
}

double cubic(const std::array<double, 4>& c, double u) noexcept {
    return c[0] + u * (c[1] + u * (c[2] + u * c[3]));
}

}  // namespace

double PowerCurve::evaluate(double cpu_util, double mem_gb) const noexcept {
    return cubic(coeffs, cpu_util) + mem_coeff_w_per_gb * mem_gb;
}

bool is_monotone(const PowerCurve& curve) {
    double prev = cubic(curve.coeffs, 0.0);
    for (int i = 1; i < kGridPoints; ++i) {
        const double u = static_cast<double>(i) / (kGridPoints - 1);
        const double v = cubic(curve.coeffs, u);
        if (v < prev - 1e-9 * std::max(1.0, std::abs(prev))) return false;
        prev = v;
    }
    return true;
}

PowerCurve fit_power_curve(std::span<const PowerSample> samples) {
    if (samples.size() < 8) {
        fail("Underdetermined", "need at least 8 samples, got " + std::to_string(samples.size()));
    }
    std::set<double> distinct_u;
    double mem_min = samples.front().mem_gb;
    double mem_max = samples.front().mem_gb;
    for (const auto& s : samples) {
        if (!std::isfinite(s.cpu_util) || !std::isfinite(s.mem_gb) || !std::isfinite(s.watts)) {
            fail("Underdetermined", "non-finite sample");
        }
        distinct_u.insert(s.cpu_util);
        mem_min = std::min(mem_min, s.mem_gb);
        mem_max = std::max(mem_max, s.mem_gb);
    }
    if (distinct_u.size() < 3) {
        fail("Underdetermined", "need at least 3 distinct cpu_util values");
    }

    const bool use_mem = mem_max > mem_min;
    const Eigen::Index cols = use_mem ? 5 : 4;
    const auto rows = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd design(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        const double u = s.cpu_util;
        design(i, 0) = 1.0;
        design(i, 1) = u;
        design(i, 2) = u * u;
        design(i, 3) = u * u * u;
        if (use_mem) design(i, 4) = s.mem_gb;
        y(i) = s.watts;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) {
        fail("Underdetermined", "design matrix has rank " + std::to_string(qr.rank()) + " < " +
                                    std::to_string(cols));
    }

    const Eigen::MatrixXd normal = design.transpose() * design;
    const Eigen::VectorXd rhs = design.transpose() * y;
    const Eigen::VectorXd beta = normal.ldlt().solve(rhs);

    PowerCurve curve;
    for (int k = 0; k < 4; ++k) curve.coeffs[static_cast<std::size_t>(k)] = beta(k);
    curve.mem_coeff_w_per_gb = use_mem ? beta(4) : 0.0;
    curve.baseload_w = curve.coeffs[0];
    curve.peak_w = cubic(curve.coeffs, 1.0) + std::max(0.0, curve.mem_coeff_w_per_gb * mem_max);

    if (!is_monotone(curve)) {
        fail("NonMonotoneFit", "fitted curve decreases somewhere on [0,1]");
    }
    return curve;
}

double power_of(const PowerCurve& curve, double cpu_util, double mem_gb,
                std::optional<std::uint64_t> noise_seed) {
    if (!(cpu_util >= 0.0 && cpu_util <= 1.0)) {
        fail("OutOfRange", "cpu_util must lie in [0,1]");
    }
    if (!(mem_gb >= 0.0) || !std::isfinite(mem_gb)) {
        fail("OutOfRange", "mem_gb must be a non-negative number");
    }
    const double value = curve.evaluate(cpu_util, mem_gb);
    if (!noise_seed) return value;

    std::mt19937_64 rng(*noise_seed);
    std::normal_distribution<double> jitter(0.0, kJitterFraction * std::abs(value));
    return std::clamp(value + jitter(rng), 0.0, curve.peak_w);
}

PowerCurve reference_curve() {
    PowerCurve c;
    c.coeffs = {105.0, 50.0, 10.0, 10.0};
    c.mem_coeff_w_per_gb = 0.0;
    c.baseload_w = 105.0;
    c.peak_w = 175.0;
    return c;
}

void to_json(nlohmann::json& j, const PowerCurve& c) {
    j = nlohmann::json{{"coeffs", c.coeffs},
                       {"mem_coeff_w_per_gb", c.mem_coeff_w_per_gb},
                       {"baseload_w", c.baseload_w},
                       {"peak_w", c.peak_w}};
}

void from_json(const nlohmann::json& j, PowerCurve& c) {
    j.at("coeffs").get_to(c.coeffs);
    j.at("mem_coeff_w_per_gb").get_to(c.mem_coeff_w_per_gb);
    j.at("baseload_w").get_to(c.baseload_w);
    j.at("peak_w").get_to(c.peak_w);
}

}  // namespace wattscope::powermodel
