#include "wattscope/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wattscope/error.hpp"
#include "wattscope/util.hpp"

namespace wattscope::characterize {

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("characterize", kind, detail);
}

// Centered moving average of the given width, valid on [half, T - 1 - half]
// and extended by the nearest valid value outside that range. Even widths
// use the 2xN weighting so the window stays centered.
std::vector<double> centered_moving_average(std::span<const double> x, int width, std::size_t& first_valid,
                                            std::size_t& last_valid) {
    const std::size_t T = x.size();
    const std::size_t half = static_cast<std::size_t>(width / 2);
    std::vector<double> out(T, 0.0);
    first_valid = half;
    last_valid = T - 1 - half;

    std::vector<double> prefix(T + 1, 0.0);
    for (std::size_t t = 0; t < T; ++t) prefix[t + 1] = prefix[t] + x[t];

    for (std::size_t t = first_valid; t <= last_valid; ++t) {
        if (width % 2 == 1) {
            out[t] = (prefix[t + half + 1] - prefix[t - half]) / width;
        } else {
            const double inner = prefix[t + half] - prefix[t - half + 1];
            out[t] = (inner + 0.5 * (x[t - half] + x[t + half])) / width;
        }
    }
    for (std::size_t t = 0; t < first_valid; ++t) out[t] = out[first_valid];
    for (std::size_t t = last_valid + 1; t < T; ++t) out[t] = out[last_valid];
    return out;
}

struct SeasonalFit {
    Decomposition parts;
    std::size_t first_valid = 0;
    std::size_t last_valid = 0;
};

SeasonalFit decompose_impl(std::span<const double> x, int period) {
    const std::size_t T = x.size();
    SeasonalFit fit;
    auto& d = fit.parts;
    d.trend = centered_moving_average(x, period, fit.first_valid, fit.last_valid);

    const auto p = static_cast<std::size_t>(period);
    std::vector<double> phase_sum(p, 0.0);
    std::vector<std::size_t> phase_count(p, 0);
    for (std::size_t t = fit.first_valid; t <= fit.last_valid; ++t) {
        phase_sum[t % p] += x[t] - d.trend[t];
        ++phase_count[t % p];
    }
    std::vector<double> phase_mean(p, 0.0);
    double centre = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
        phase_mean[k] = phase_count[k] ? phase_sum[k] / static_cast<double>(phase_count[k]) : 0.0;
        centre += phase_mean[k];
    }
    centre /= static_cast<double>(p);
    for (double& m : phase_mean) m -= centre;

    d.seasonal.resize(T);
    d.residual.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        d.seasonal[t] = phase_mean[t % p];
        d.residual[t] = x[t] - d.trend[t] - d.seasonal[t];
    }
    return fit;
}

}  // namespace

const char* to_string(Level l) noexcept {
    switch (l) {
        case Level::Low: return "Low";
        case Level::Medium: return "Medium";
        case Level::High: return "High";
    }
    return "?";
}

Level level_from_string(const std::string& s) {
    if (s == "Low" || s == "low") return Level::Low;
    if (s == "Medium" || s == "medium") return Level::Medium;
    if (s == "High" || s == "high") return Level::High;
    fail("UnknownLevel", "'" + s + "' is not one of Low/Medium/High");
}

double cov(std::span<const double> series) {
    if (series.size() < 2) fail("SeriesTooShort", "CoV needs at least 2 samples");
    const double m = mean_of(series);
    if (!(m > 1e-9)) fail("ZeroMean", "series mean is not positive");
    return std::sqrt(variance_of(series)) / m;
}

Decomposition decompose(std::span<const double> series, int period) {
    if (period < 1) fail("SeriesTooShort", "period must be positive");
    if (series.size() < 2 * static_cast<std::size_t>(period)) {
        fail("SeriesTooShort", "decomposition at period " + std::to_string(period) + " needs " +
                                   std::to_string(2 * period) + " samples, got " + std::to_string(series.size()));
    }
    return decompose_impl(series, period).parts;
}

std::vector<PeriodEstimate> detect_periods(std::span<const double> series, const PeriodDetectionOptions& options) {
    const std::size_t T = series.size();
    if (T < 8) fail("SeriesTooShort", "period detection needs at least 8 samples");

    // Remove slow drift with a wide moving average before the autocorrelation.
    int detrend_width = static_cast<int>(T / 2);
    if (detrend_width % 2 == 0) --detrend_width;
    std::size_t fv = 0;
    std::size_t lv = 0;
    const auto slow = centered_moving_average(series, std::max(detrend_width, 1), fv, lv);
    std::vector<double> y(T);
    for (std::size_t t = 0; t < T; ++t) y[t] = series[t] - slow[t];
    const double ym = mean_of(y);
    double denom = 0.0;
    for (double& v : y) {
        v -= ym;
        denom += v * v;
    }
    if (!(denom > 1e-12 * static_cast<double>(T))) return {};

    const std::size_t max_lag = T / 2;
    std::vector<double> acf(max_lag + 2, 0.0);
    for (std::size_t k = 1; k <= std::min(max_lag + 1, T - 1); ++k) {
        double s = 0.0;
        for (std::size_t t = 0; t + k < T; ++t) s += y[t] * y[t + k];
        acf[k] = s / denom;
    }

    const double significance = 2.0 / std::sqrt(static_cast<double>(T));
    const double below_one = std::nextafter(1.0, 0.0);
    std::vector<PeriodEstimate> found;
    for (std::size_t k = 2; k <= max_lag; ++k) {
        const bool peak = acf[k] > acf[k - 1] && acf[k] >= acf[k + 1];
        if (!peak || acf[k] <= significance) continue;

        const auto fit = decompose_impl(series, static_cast<int>(k));
        const std::size_t n = fit.last_valid - fit.first_valid + 1;
        if (n <= k + 1) continue;
        std::span<const double> resid(fit.parts.residual.data() + fit.first_valid, n);
        std::vector<double> detrended(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t t = fit.first_valid + i;
            detrended[i] = series[t] - fit.parts.trend[t];
        }
        const double total = variance_of(detrended);
        if (!(total > 0.0)) continue;
        // k phase means fitted from n points: scale by the squared dof ratio.
        const double dof = static_cast<double>(n - 1) / static_cast<double>(n - k);
        const double strength = 1.0 - variance_of(resid) / total * dof * dof;
        const double score = std::min(std::max(0.0, strength), below_one);
        if (score > options.min_score) found.push_back(PeriodEstimate{static_cast<int>(k), score});
    }
    std::stable_sort(found.begin(), found.end(), [](const PeriodEstimate& a, const PeriodEstimate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.period_samples < b.period_samples;
    });
    // Noisy autocorrelations split one period into several adjacent peaks;
    // keep only the best-scoring lag in each neighbourhood.
    std::vector<PeriodEstimate> kept;
    for (const auto& cand : found) {
        const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](const PeriodEstimate& k) {
            const int radius = std::max(2, static_cast<int>(std::lround(0.03 * k.period_samples)));
            return std::abs(k.period_samples - cand.period_samples) <= radius;
        });
        if (!shadowed) kept.push_back(cand);
    }
    return kept;
}

Level classify_cov(double c, const ClassThresholds& th) noexcept {
    if (c < th.cov_low) return Level::Low;
    if (c <= th.cov_high) return Level::Medium;
    return Level::High;
}

Level classify_score(double s, const ClassThresholds& th) noexcept {
    if (s < th.score_low) return Level::Low;
    if (s <= th.score_high) return Level::Medium;
    return Level::High;
}

Level classify_intensity(double mean_w, double cap_w, const ClassThresholds& th) noexcept {
    if (mean_w < th.intensity_low_frac * cap_w) return Level::Low;
    if (mean_w <= th.intensity_high_frac * cap_w) return Level::Medium;
    return Level::High;
}

JobProfile profile(std::span<const double> series, double cap_w, const ClassThresholds& th) {
    JobProfile p;
    p.intensity_w = mean_of(series);
    try {
        p.cov = cov(series);
        p.cls.variability = classify_cov(p.cov, th);
    } catch (const Error& e) {
        if (e.kind() != "ZeroMean") throw;
        p.cov = std::numeric_limits<double>::infinity();
        p.cls.variability = Level::High;
    }
    p.periods = detect_periods(series);
    p.cls.regularity = classify_score(p.dominant_score(), th);
    p.cls.intensity = classify_intensity(p.intensity_w, cap_w, th);
    return p;
}

}  // namespace wattscope::characterize
