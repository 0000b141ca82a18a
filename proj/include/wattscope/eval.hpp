#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wattscope/characterize.hpp"
#include "wattscope/nn/config.hpp"

namespace wattscope::eval {

// (1/T) sum |pred - truth|. Throws eval.LengthMismatch (also for T = 0).
double mae(std::span<const double> pred, std::span<const double> truth);
// mae / mean(truth). Throws eval.ZeroMeanTruth when mean(truth) <= 1e-9.
double nmae(std::span<const double> pred, std::span<const double> truth);

struct JobMetrics {
    double mae_w = 0.0;
    double nmae = 0.0;
};

struct MetricsReport {
    std::string scenario;
    std::string label;  // unit and model, e.g. "u0/sliding_window"
    std::map<std::string, JobMetrics> per_job;
    // Sum of per-job estimates against the metered aggregate; present only
    // when every job on the server was estimated.
    std::optional<double> aggregate_mae_w;
    std::optional<double> aggregate_nmae;
};

// Per-job metrics and, when aggregate_w is non-empty, the aggregate metrics.
MetricsReport make_report(const std::string& scenario, const std::string& label,
                          const std::map<std::string, std::vector<double>>& pred,
                          const std::map<std::string, std::vector<double>>& truth,
                          std::span<const double> aggregate_w = {});

inline const std::vector<std::string>& scenario_names() {
    static const std::vector<std::string> names{"variability_sweep", "regularity_sweep", "intensity_sweep",
                                                "scalability",       "robustness",       "generalization",
                                                "table1_style"};
    return names;
}

// desk_config() trained for 20 epochs at lr 2e-3.
nn::NetworkConfig experiment_network();

struct ScenarioConfig {
    std::string scenario = "table1_style";
    std::uint64_t seed = 7;
    nn::NetworkConfig network = experiment_network();
    double cap_w = 200.0;
    int interval_s = 300;
    int units_per_bucket = 6;         // servers per bucket
    int background_jobs = 4;          // sweeps and generalization
    std::size_t train_samples = 2016;  // 7 days at 5 minutes
    std::size_t test_samples = 864;    // 3 days
    std::vector<int> scalability_n{5, 10, 20};
    std::vector<std::size_t> robustness_sizes{500, 1500, 4000};
    double scalability_background_w = 120.0;  // split evenly across the n jobs
};

// One evaluated job of one unit (server).
struct JobOutcome {
    std::size_t unit = 0;
    std::string bucket;
    std::string job_id;
    double cov = 0.0;
    double period_score = 0.0;
    double intensity_w = 0.0;
    characterize::ProfileClass cls;
    double mae_model_w = 0.0;
    double nmae_model = 0.0;
    double mae_mean_w = 0.0;
    double nmae_mean = 0.0;
    std::optional<double> nmae_co;
};

struct BucketStat {
    std::string bucket;
    double mean_nmae = 0.0;
    double p5 = 0.0;
    double p95 = 0.0;
    std::size_t n_jobs = 0;
};

struct ExperimentResult {
    ScenarioConfig config;
    std::vector<JobOutcome> outcomes;
    std::vector<MetricsReport> reports;
    std::vector<BucketStat> buckets;  // sliding-window NMAE per bucket, in bucket order

    const BucketStat* find_bucket(const std::string& name) const noexcept;
};

// Generates seeded synthetic servers, trains one sliding-window model per
// evaluated job on the training span and scores it, alongside the Mean
// baseline, on the held-out span that follows.
// Throws eval.UnknownScenario; trace.InfeasibleSpec propagates.
ExperimentResult run_experiment(const ScenarioConfig& config);

// Bucket statistics (mean and 5th/95th percentiles) of a set of NMAEs.
BucketStat bucket_stat(const std::string& name, std::span<const double> nmaes);

// Summary JSON and the bucket CSV ("bucket,mean_nmae,p5,p95,n_jobs").
nlohmann::json summary_json(const ExperimentResult& result);
std::string buckets_csv(const ExperimentResult& result);
// Writes <scenario>_summary.json and <scenario>_buckets.csv. Throws eval.IoFailure.
void write_reports(const ExperimentResult& result, const std::filesystem::path& out_dir);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
// Missing fields keep their defaults.
void from_json(const nlohmann::json& j, ScenarioConfig& c);

}  // namespace wattscope::eval
