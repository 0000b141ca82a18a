#pragma once

#include <span>
#include <string>
#include <vector>

namespace wattscope::characterize {

enum class Level { Low = 0, Medium = 1, High = 2 };

const char* to_string(Level l) noexcept;
Level level_from_string(const std::string& s);

struct PeriodEstimate {
    int period_samples = 0;
    double score = 0.0;  // in [0,1)
};

struct ProfileClass {
    Level variability = Level::Low;
    Level regularity = Level::Low;
    Level intensity = Level::Low;

    friend bool operator==(const ProfileClass&, const ProfileClass&) = default;
};

struct JobProfile {
    double cov = 0.0;  // +inf when the series has zero mean
    std::vector<PeriodEstimate> periods;  // best score first
    double intensity_w = 0.0;
    ProfileClass cls;

    double dominant_score() const noexcept { return periods.empty() ? 0.0 : periods.front().score; }
};

// Bucket edges: Low is strictly below the first edge, Medium runs up to and
// including the second, High is above it.
struct ClassThresholds {
    double cov_low = 0.2;
    double cov_high = 0.6;
    double score_low = 0.2;
    double score_high = 0.6;
    double intensity_low_frac = 0.2;  // of the per-job cap
    double intensity_high_frac = 0.5;
};

struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
};

// Population standard deviation over mean. Throws characterize.ZeroMean.
double cov(std::span<const double> series);

// Classical additive decomposition with a centered moving-average trend.
// Throws characterize.SeriesTooShort when the series spans fewer than two periods.
Decomposition decompose(std::span<const double> series, int period);

struct PeriodDetectionOptions {
    // Candidates scoring at or below this are treated as "no period".
    double min_score = 0.05;
};

// Autocorrelation peaks scored by a degrees-of-freedom-adjusted seasonal
// strength, best first, with adjacent peaks (within 3% of the lag) merged
// into the best one. Empty when nothing periodic survives.
std::vector<PeriodEstimate> detect_periods(std::span<const double> series,
                                           const PeriodDetectionOptions& options = {});

Level classify_cov(double cov, const ClassThresholds& th = {}) noexcept;
Level classify_score(double score, const ClassThresholds& th = {}) noexcept;
Level classify_intensity(double mean_w, double cap_w, const ClassThresholds& th = {}) noexcept;

JobProfile profile(std::span<const double> series, double cap_w, const ClassThresholds& th = {});

}  // namespace wattscope::characterize
