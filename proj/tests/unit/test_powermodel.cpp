#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "wattscope/powermodel.hpp"

using namespace wattscope;
using namespace wattscope::powermodel;
using wattscope::testing::error_name;

namespace {

double generating_cubic(double u) { return 105.0 + 50.0 * u + 10.0 * u * u + 10.0 * u * u * u; }

}  // namespace

TEST_SUITE("powermodel") {

TEST_CASE("reference curve hits baseload, peak and the midpoint") {
    const auto c = reference_curve();
    CHECK(power_of(c, 0.0, 0.0) == doctest::Approx(105.0));
    CHECK(power_of(c, 1.0, 0.0) == doctest::Approx(175.0));
    CHECK(power_of(c, 0.5, 0.0) == doctest::Approx(133.75));
    CHECK(c.baseload_w == 105.0);
    CHECK(c.peak_w == 175.0);
    CHECK(is_monotone(c));
}

TEST_CASE("fit recovers a noise-free cubic") {
    std::vector<PowerSample> samples;
    for (int i = 0; i <= 40; ++i) {
        const double u = i / 40.0;
        samples.push_back({u, 8.0, generating_cubic(u)});
    }
    const auto c = fit_power_curve(samples);
    CHECK(std::abs(c.coeffs[0] - 105.0) < 1e-6);
    CHECK(std::abs(c.coeffs[1] - 50.0) < 1e-6);
    CHECK(std::abs(c.coeffs[2] - 10.0) < 1e-6);
    CHECK(std::abs(c.coeffs[3] - 10.0) < 1e-6);
    CHECK(c.mem_coeff_w_per_gb == 0.0);  // constant memory carries no information
    CHECK(c.baseload_w == doctest::Approx(105.0));
    CHECK(c.peak_w <= 175.0 * 1.001);
}

TEST_CASE("fit recovers the memory term when memory varies") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uu(0.0, 1.0);
    std::uniform_real_distribution<double> mm(0.0, 64.0);
    std::vector<PowerSample> samples;
    for (int i = 0; i < 200; ++i) {
        const double u = uu(rng);
        const double m = mm(rng);
        samples.push_back({u, m, generating_cubic(u) + 0.25 * m});
    }
    const auto c = fit_power_curve(samples);
    CHECK(std::abs(c.mem_coeff_w_per_gb - 0.25) < 1e-6);
    CHECK(std::abs(c.coeffs[1] - 50.0) < 1e-5);
}

TEST_CASE("fit reports ill-posed and decreasing data") {
    std::vector<PowerSample> few{{0.1, 0, 110}, {0.2, 0, 115}, {0.3, 0, 120}};
    CHECK(error_name([&] { fit_power_curve(few); }) == "powermodel.Underdetermined");

    std::vector<PowerSample> two_levels;
    for (int i = 0; i < 10; ++i) two_levels.push_back({i % 2 ? 1.0 : 0.0, 0.0, i % 2 ? 175.0 : 105.0});
    CHECK(error_name([&] { fit_power_curve(two_levels); }) == "powermodel.Underdetermined");

    std::vector<PowerSample> falling;
    for (int i = 0; i <= 20; ++i) falling.push_back({i / 20.0, 0.0, 175.0 - 60.0 * i / 20.0});
    CHECK(error_name([&] { fit_power_curve(falling); }) == "powermodel.NonMonotoneFit");
}

TEST_CASE("power_of validates inputs and bounds jitter") {
    const auto c = reference_curve();
    CHECK(error_name([&] { power_of(c, 1.2, 0.0); }) == "powermodel.OutOfRange");
    CHECK(error_name([&] { power_of(c, -0.1, 0.0); }) == "powermodel.OutOfRange");
    CHECK(error_name([&] { power_of(c, 0.5, -1.0); }) == "powermodel.OutOfRange");
    CHECK(error_name([&] { power_of(c, std::nan(""), 0.0); }) == "powermodel.OutOfRange");

    CHECK(power_of(c, 0.3, 0.0) == power_of(c, 0.3, 0.0));
    CHECK(power_of(c, 0.3, 0.0, 99) == power_of(c, 0.3, 0.0, 99));

    double sum_sq = 0.0;
    const int n = 4000;
    const double clean = power_of(c, 0.3, 0.0);
    for (int i = 0; i < n; ++i) {
        const double noisy = power_of(c, 0.3, 0.0, static_cast<std::uint64_t>(i));
        CHECK(noisy >= 0.0);
        CHECK(noisy <= c.peak_w);
        sum_sq += (noisy - clean) * (noisy - clean);
    }
    const double rel_sd = std::sqrt(sum_sq / n) / clean;
    CHECK(rel_sd == doctest::Approx(kJitterFraction).epsilon(0.1));
}

TEST_CASE("monotonicity holds on the 101-point grid") {
    const auto c = reference_curve();
    for (int i = 1; i <= 100; ++i) CHECK(c.evaluate(i / 100.0, 0.0) >= c.evaluate((i - 1) / 100.0, 0.0));

    PowerCurve bumpy;
    bumpy.coeffs = {100.0, 60.0, -150.0, 100.0};  // dips in the middle
    CHECK_FALSE(is_monotone(bumpy));
}

TEST_CASE("curve JSON round trip") {
    const auto c = reference_curve();
    const nlohmann::json j = c;
    const auto back = j.get<PowerCurve>();
    CHECK(back.coeffs == c.coeffs);
    CHECK(back.peak_w == c.peak_w);
}

}  // TEST_SUITE
