#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wattscope/library.hpp"

namespace wattscope::disagg {

// One job to estimate, described by the key its model is selected with.
struct JobQuery {
    std::string job_id;
    ModelKey key;
};

// A job paired with an already chosen model.
struct ResolvedJob {
    std::string job_id;
    std::shared_ptr<const library::DisaggModel> model;
    ModelKey key;
    std::string model_id;  // empty for in-memory models
    double distance = 0.0;  // selection distance when resolved from a library
};

struct DisaggOptions {
    bool reconcile = false;
    double cap_w = 200.0;
    // Average the output over blocks of this many samples (1 keeps the
    // native interval). Applied by disaggregate() only.
    int resample_factor = 1;
};

struct DisaggResult {
    std::vector<std::string> job_ids;  // query order
    std::map<std::string, std::vector<double>> per_job_w;
    bool reconciled = false;
    std::vector<ModelKey> model_keys_used;    // query order
    std::vector<std::string> model_ids_used;  // query order
    std::vector<std::string> warnings;

    std::size_t length() const noexcept { return per_job_w.empty() ? 0 : per_job_w.begin()->second.size(); }
};

// Scales p so it sums to target while keeping every value in [0, cap]:
// proportional scaling, with values pushed past cap pinned there and the
// remainder spread over the rest. Returns false (p untouched) when
// sum(p) <= 1e-6 or the target cannot be met within the caps.
bool reconcile_step(std::span<double> p, double target_w, double cap_w);

// Block means over consecutive groups of factor samples; the last block may
// be shorter. Throws disagg.ShapeMismatch when factor < 1.
std::vector<double> resample_mean(std::span<const double> series, int factor);

// Feeds one meter reading at a time. Each job keeps its own window buffer,
// front-padded with the first reading. Outputs are identical to disaggregate()
// on the same prefix.
class StreamingDisaggregator {
public:
    // Throws disagg.ShapeMismatch for empty or duplicate job lists and
    // baselines.UnknownJob when a multi-job baseline lacks the job.
    StreamingDisaggregator(std::vector<ResolvedJob> jobs, const DisaggOptions& options = {});
    ~StreamingDisaggregator();
    StreamingDisaggregator(StreamingDisaggregator&&) noexcept;
    StreamingDisaggregator& operator=(StreamingDisaggregator&&) noexcept;

    const std::vector<ResolvedJob>& jobs() const noexcept { return jobs_; }

    struct Step {
        std::vector<double> per_job_w;  // job order
        bool reconciled = false;
        std::optional<std::string> warning;
    };

    // Throws disagg.ShapeMismatch for non-finite readings.
    Step push(double aggregate_w);

    struct Estimator;  // per-job model state, defined in the implementation

private:
    std::vector<ResolvedJob> jobs_;
    DisaggOptions options_;
    std::vector<std::unique_ptr<Estimator>> estimators_;
    std::size_t t_ = 0;
};

// Resolves each query through library.select and runs every timestep.
// Throws library.EmptyLibrary, disagg.ShapeMismatch.
std::vector<ResolvedJob> resolve(const std::vector<JobQuery>& queries, const library::ModelLibrary& lib);

DisaggResult disaggregate(std::span<const double> aggregate_w, const std::vector<ResolvedJob>& jobs,
                          const DisaggOptions& options = {});
DisaggResult disaggregate(std::span<const double> aggregate_w, const std::vector<JobQuery>& queries,
                          const library::ModelLibrary& lib, const DisaggOptions& options = {});

}  // namespace wattscope::disagg
