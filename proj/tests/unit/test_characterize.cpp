#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "wattscope/characterize.hpp"
#include "wattscope/trace.hpp"
#include "wattscope/util.hpp"

using namespace wattscope;
using namespace wattscope::characterize;
using wattscope::testing::error_name;

namespace {

std::vector<double> square_wave(std::size_t T, int period, double low, double high) {
    std::vector<double> s(T);
    for (std::size_t t = 0; t < T; ++t) s[t] = (t % period) < static_cast<std::size_t>(period) / 2 ? high : low;
    return s;
}

std::vector<double> sine(std::size_t T, int period, double mean, double amp) {
    std::vector<double> s(T);
    for (std::size_t t = 0; t < T; ++t) s[t] = mean + amp * std::sin(2.0 * std::numbers::pi * t / period);
    return s;
}

double rms(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s / xs.size());
}

bool has_lag_near(const std::vector<PeriodEstimate>& ps, int lag, int tol) {
    return std::any_of(ps.begin(), ps.end(), [&](const PeriodEstimate& p) { return std::abs(p.period_samples - lag) <= tol; });
}

}  // namespace

TEST_SUITE("characterize") {

TEST_CASE("cov uses the population standard deviation") {
    const std::vector<double> two{1.0, 3.0};
    CHECK(cov(two) == doctest::Approx(0.5));
    CHECK(cov(std::vector<double>(10, 50.0)) == 0.0);
    CHECK(error_name([] { cov(std::vector<double>(5, 0.0)); }) == "characterize.ZeroMean");
    CHECK(error_name([] { cov(std::vector<double>{1.0}); }) == "characterize.SeriesTooShort");
}

TEST_CASE("cov is scale invariant") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(1.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(64);
        for (auto& v : s) v = u(rng);
        const double alpha = u(rng) / 7.0;
        std::vector<double> scaled(s);
        for (auto& v : scaled) v *= alpha;
        CHECK(cov(scaled) == doctest::Approx(cov(s)).epsilon(1e-12));
    }
}

TEST_CASE("decomposition is additive and separates sine from ramp") {
    const auto s = sine(960, 48, 100.0, 20.0);
    const auto d = decompose(s, 48);
    for (std::size_t t = 0; t < s.size(); ++t) {
        CHECK(std::abs(d.trend[t] + d.seasonal[t] + d.residual[t] - s[t]) <= 1e-9 * std::abs(s[t]));
    }
    CHECK(rms(d.residual) < 0.01 * rms(d.seasonal));

    std::vector<double> ramped(s);
    const double slope = 0.05;
    for (std::size_t t = 0; t < ramped.size(); ++t) ramped[t] += slope * t;
    const auto r = decompose(ramped, 48);
    const std::size_t a = 100;
    const std::size_t b = 800;
    const double fitted = (r.trend[b] - r.trend[a]) / static_cast<double>(b - a);
    CHECK(std::abs(fitted - slope) <= 0.05 * slope);

    CHECK(error_name([&] { decompose(std::span<const double>(s).first(90), 48); }) == "characterize.SeriesTooShort");
}

TEST_CASE("clean square wave is detected at its period with a high score") {
    const auto s = square_wave(2016, 288, 20.0, 120.0);
    const auto ps = detect_periods(s);
    REQUIRE_FALSE(ps.empty());
    CHECK(std::abs(ps.front().period_samples - 288) <= 2);
    CHECK(ps.front().score > 0.8);
    for (const auto& p : ps) {
        CHECK(p.score >= 0.0);
        CHECK(p.score < 1.0);
        CHECK(p.period_samples >= 2);
        CHECK(p.period_samples <= 1008);
    }
}

TEST_CASE("multiples of the generating period are also flagged") {
    const auto s = square_wave(960, 48, 10.0, 60.0);
    const auto ps = detect_periods(s);
    REQUIRE_FALSE(ps.empty());
    CHECK(has_lag_near(ps, 48, 1));
    CHECK(has_lag_near(ps, 96, 2));
    CHECK(ps.front().period_samples % 48 <= 2);
}

TEST_CASE("white noise has no period on most seeds") {
    int empty = 0;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        std::normal_distribution<double> g(100.0, 10.0);
        std::vector<double> s(2016);
        for (auto& v : s) v = g(rng);
        if (detect_periods(s).empty()) ++empty;
    }
    CHECK(empty >= 18);
}

TEST_CASE("score falls as noise rises") {
    const auto clean = square_wave(2016, 288, 0.0, 100.0);
    double previous = 2.0;
    for (double sigma : {0.0, 25.0, 50.0}) {
        std::mt19937_64 rng(21);
        std::normal_distribution<double> g(0.0, sigma > 0 ? sigma : 1.0);
        std::vector<double> s(clean);
        if (sigma > 0) {
            for (auto& v : s) v += g(rng);
        }
        const auto ps = detect_periods(s);
        REQUIRE_FALSE(ps.empty());
        CHECK(std::abs(ps.front().period_samples - 288) <= 2);
        CHECK(ps.front().score < previous);
        if (sigma == 50.0) {
            CHECK(ps.front().score > 0.2);
            CHECK(ps.front().score < 0.8);
        }
        previous = ps.front().score;
    }
}

TEST_CASE("adding a constant leaves detected lags unchanged") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 8.0);
    auto s = sine(1200, 96, 50.0, 20.0);
    for (auto& v : s) v += g(rng);
    auto shifted = s;
    for (auto& v : shifted) v += 75.0;
    const auto a = detect_periods(s);
    const auto b = detect_periods(shifted);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].period_samples == b[i].period_samples);
}

TEST_CASE("bucket edges") {
    CHECK(classify_cov(0.19) == Level::Low);
    CHECK(classify_cov(0.2) == Level::Medium);
    CHECK(classify_cov(0.6) == Level::Medium);
    CHECK(classify_cov(0.61) == Level::High);
    CHECK(classify_score(0.0) == Level::Low);
    CHECK(classify_score(0.5) == Level::Medium);
    CHECK(classify_score(0.9) == Level::High);
    CHECK(classify_intensity(30.0, 200.0) == Level::Low);
    CHECK(classify_intensity(50.0, 200.0) == Level::Medium);
    CHECK(classify_intensity(100.0, 200.0) == Level::Medium);
    CHECK(classify_intensity(150.0, 200.0) == Level::High);
    CHECK(level_from_string("High") == Level::High);
    CHECK(error_name([] { level_from_string("Huge"); }) == "characterize.UnknownLevel");
}

TEST_CASE("profiles of reference signals") {
    const auto flat = profile(std::vector<double>(600, 50.0), 200.0);
    CHECK(flat.cov == 0.0);
    CHECK(flat.periods.empty());
    CHECK(flat.cls == ProfileClass{Level::Low, Level::Low, Level::Medium});

    const auto sq = profile(square_wave(2016, 288, 0.0, 200.0), 200.0);
    CHECK(sq.cov == doctest::Approx(1.0));
    CHECK(sq.intensity_w == doctest::Approx(100.0));
    CHECK(sq.cls == ProfileClass{Level::High, Level::High, Level::Medium});

    const auto idle = profile(std::vector<double>(50, 0.0), 200.0);
    CHECK(std::isinf(idle.cov));
    CHECK(idle.cls.variability == Level::High);

    trace::SyntheticJobSpec hourly;
    hourly.target_cov = 0.3;
    hourly.period_samples = 12;
    hourly.period_score_target = 0.9;
    hourly.mean_power_w = 32.0;
    hourly.noise_seed = 3;
    const auto job = trace::generate_synthetic_job(hourly, 2016);
    const auto p = profile(job.power_w, 200.0);
    CHECK(p.cls.regularity == Level::High);
    CHECK(p.cls.intensity == Level::Low);
    CHECK(p.intensity_w == doctest::Approx(mean_of(job.power_w)));
}

}  // TEST_SUITE
