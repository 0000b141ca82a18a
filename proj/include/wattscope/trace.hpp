#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wattscope/powermodel.hpp"

namespace wattscope::trace {

inline constexpr int kDefaultIntervalS = 300;
inline constexpr double kDefaultCapW = 200.0;
// Longest run of missing samples that parse_job_trace forward-fills.
inline constexpr int kMaxFilledGap = 3;

// One application's time series at a fixed sampling interval. Usage-bearing
// series carry cpu_util/mem_gb; power-bearing series carry power_w. Every
// non-empty sequence has the same length.
struct JobSeries {
    std::string job_id;
    int sampling_interval_s = kDefaultIntervalS;
    std::int64_t start_timestamp = 0;
    std::vector<double> cpu_util;
    std::vector<double> mem_gb;
    std::vector<double> power_w;

    std::size_t length() const noexcept;
    bool has_usage() const noexcept { return !cpu_util.empty(); }
    bool has_power() const noexcept { return !power_w.empty(); }
};

enum class BaseloadPolicy { Proportional, EqualShare };

const char* to_string(BaseloadPolicy p) noexcept;
BaseloadPolicy baseload_policy_from_string(const std::string& s);

struct ServerTrace {
    std::string server_id;
    std::vector<JobSeries> jobs;
    std::vector<double> aggregate_w;
    double per_job_cap_w = kDefaultCapW;
    BaseloadPolicy baseload_policy = BaseloadPolicy::Proportional;

    std::size_t length() const noexcept { return aggregate_w.size(); }
    int sampling_interval_s() const noexcept {
        return jobs.empty() ? kDefaultIntervalS : jobs.front().sampling_interval_s;
    }
    const JobSeries* find_job(const std::string& job_id) const noexcept;
};

enum class TemplateShape { Sine, Square };

struct SyntheticJobSpec {
    std::string job_id = "job";
    double target_cov = 0.0;
    std::optional<int> period_samples;
    // Fraction of the variance carried by the seasonal template.
    double period_score_target = 0.0;
    double mean_power_w = 50.0;
    std::uint64_t noise_seed = 0;
    TemplateShape shape = TemplateShape::Sine;
    double cap_w = kDefaultCapW;
    int sampling_interval_s = kDefaultIntervalS;
};

// Realized CoV lands within this distance of target_cov.
inline constexpr double kCovTolerance = 0.05;

enum class TraceFormat { UsageCsv, PowerCsv };

// Reads UsageCsv (timestamp,job_id,cpu_util,mem_gb) or PowerCsv
// (timestamp,job_id,power_w). Jobs come back in first-appearance order with
// samples sorted by timestamp. Gaps of up to kMaxFilledGap missing samples
// are forward-filled.
std::vector<JobSeries> parse_job_trace(std::istream& in, TraceFormat format);

// Writes the job series as CSV rows, one block per job. Uses power_w for
// PowerCsv and cpu_util/mem_gb for UsageCsv.
void write_job_trace(std::ostream& out, const std::vector<JobSeries>& jobs, TraceFormat format);

// Mean + scaled (seasonal template + Gaussian noise), clipped to [0, cap].
// The scale is bisected so the realized CoV hits target_cov, and the offset
// is re-solved so the realized mean stays at mean_power_w.
JobSeries generate_synthetic_job(const SyntheticJobSpec& spec, std::size_t length);

// Upper bound on CoV for a series with the given mean confined to [0, cap].
double max_feasible_cov(double mean_w, double cap_w) noexcept;

struct SynthesisOptions {
    double per_job_cap_w = kDefaultCapW;
    BaseloadPolicy policy = BaseloadPolicy::Proportional;
    std::optional<std::uint64_t> noise_seed;
    std::string server_id = "server";
};

// Converts usage to power when needed and sums the per-job series.
ServerTrace synthesize_server(std::vector<JobSeries> jobs, const powermodel::PowerCurve& curve,
                              const SynthesisOptions& options = {});

// Directory layout: meta.json, aggregate.csv, job_<k>.csv (PowerCsv).
void save_server_trace(const ServerTrace& trace, const std::filesystem::path& dir);
ServerTrace load_server_trace(const std::filesystem::path& dir);

// Max relative deviation between aggregate_w and the per-job sum.
double conservation_error(const ServerTrace& trace);

}  // namespace wattscope::trace
