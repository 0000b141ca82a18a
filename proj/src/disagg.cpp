#include "wattscope/disagg.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wattscope/error.hpp"
#include "wattscope/nn/inference.hpp"
#include "wattscope/util.hpp"

namespace wattscope::disagg {

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("disagg", kind, detail);
}

constexpr double kMinReconcileSum = 1e-6;

}  // namespace

struct StreamingDisaggregator::Estimator {
    virtual ~Estimator() = default;
    virtual double step(double aggregate_w) = 0;
};

namespace {

class ConstantEstimator final : public StreamingDisaggregator::Estimator {
public:
    explicit ConstantEstimator(double v) : v_(v) {}
    double step(double) override { return v_; }

private:
    double v_;
};

class CoEstimator final : public StreamingDisaggregator::Estimator {
public:
    CoEstimator(const baselines::CoModel& model, std::size_t slot)
        : decoder_(model), slot_(slot), row_(decoder_.job_count()) {}
    double step(double p) override {
        decoder_.step(p, row_);
        return row_[slot_];
    }

private:
    baselines::CoDecoder decoder_;
    std::size_t slot_;
    std::vector<double> row_;
};

class WindowEstimator final : public StreamingDisaggregator::Estimator {
public:
    explicit WindowEstimator(const nn::TrainedModel& model)
        : predictor_(model), window_(static_cast<std::size_t>(predictor_.window())) {}
    double step(double p) override {
        if (!primed_) {
            std::fill(window_.begin(), window_.end(), p);
            primed_ = true;
        } else {
            std::shift_left(window_.begin(), window_.end(), 1);
            window_.back() = p;
        }
        return predictor_.predict(window_);
    }

private:
    nn::Predictor predictor_;
    std::vector<double> window_;
    bool primed_ = false;
};

std::unique_ptr<StreamingDisaggregator::Estimator> make_estimator(const ResolvedJob& job) {
    if (!job.model) fail("ShapeMismatch", "job " + job.job_id + " has no model");
    const auto& model = *job.model;
    if (const auto* m = std::get_if<baselines::MeanModel>(&model)) {
        const auto it = m->job_means_w.find(job.job_id);
        if (it != m->job_means_w.end()) return std::make_unique<ConstantEstimator>(it->second);
        if (m->job_means_w.size() == 1) return std::make_unique<ConstantEstimator>(m->job_means_w.begin()->second);
        throw Error("baselines", "UnknownJob", "mean model has no entry for job " + job.job_id);
    }
    if (const auto* m = std::get_if<baselines::CoModel>(&model)) {
        const auto it = std::find(m->job_ids.begin(), m->job_ids.end(), job.job_id);
        if (it != m->job_ids.end()) {
            return std::make_unique<CoEstimator>(*m, static_cast<std::size_t>(it - m->job_ids.begin()));
        }
        if (m->job_ids.size() == 1) return std::make_unique<CoEstimator>(*m, 0);
        throw Error("baselines", "UnknownJob", "CO model has no states for job " + job.job_id);
    }
    return std::make_unique<WindowEstimator>(std::get<nn::TrainedModel>(model));
}

}  // namespace

bool reconcile_step(std::span<double> p, double target_w, double cap_w) {
    double sum = 0.0;
    for (double v : p) sum += v;
    if (!(sum > kMinReconcileSum) || !(target_w >= 0.0)) return false;
    if (target_w > cap_w * static_cast<double>(p.size())) return false;

    std::vector<double> out(p.begin(), p.end());
    std::vector<bool> pinned(p.size(), false);
    for (std::size_t round = 0; round <= p.size(); ++round) {
        double free_sum = 0.0;
        double pinned_total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (pinned[i]) {
                pinned_total += cap_w;
            } else {
                free_sum += p[i];
            }
        }
        const double remaining = target_w - pinned_total;
        if (!(free_sum > 0.0)) return false;
        const double scale = remaining / free_sum;
        bool newly_pinned = false;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (pinned[i]) continue;
            out[i] = p[i] * scale;
            if (out[i] > cap_w) {
                pinned[i] = true;
                newly_pinned = true;
            }
        }
        if (!newly_pinned) break;
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = pinned[i] ? cap_w : out[i];
    return true;
}

std::vector<double> resample_mean(std::span<const double> series, int factor) {
    if (factor < 1) fail("ShapeMismatch", "resample factor must be at least 1");
    const auto k = static_cast<std::size_t>(factor);
    std::vector<double> out;
    out.reserve((series.size() + k - 1) / k);
    for (std::size_t start = 0; start < series.size(); start += k) {
        const std::size_t end = std::min(series.size(), start + k);
        out.push_back(mean_of(series.subspan(start, end - start)));
    }
    return out;
}

StreamingDisaggregator::StreamingDisaggregator(std::vector<ResolvedJob> jobs, const DisaggOptions& options)
    : jobs_(std::move(jobs)), options_(options) {
    if (jobs_.empty()) fail("ShapeMismatch", "no jobs to disaggregate");
    if (!(options_.cap_w > 0.0)) fail("ShapeMismatch", "cap must be positive");
    std::set<std::string> seen;
    for (const auto& j : jobs_) {
        if (!seen.insert(j.job_id).second) fail("ShapeMismatch", "job " + j.job_id + " listed twice");
        estimators_.push_back(make_estimator(j));
    }
}

StreamingDisaggregator::~StreamingDisaggregator() = default;
StreamingDisaggregator::StreamingDisaggregator(StreamingDisaggregator&&) noexcept = default;
StreamingDisaggregator& StreamingDisaggregator::operator=(StreamingDisaggregator&&) noexcept = default;

StreamingDisaggregator::Step StreamingDisaggregator::push(double aggregate_w) {
    if (!std::isfinite(aggregate_w)) fail("ShapeMismatch", "aggregate reading is not finite");
    Step step;
    step.per_job_w.resize(estimators_.size());
    for (std::size_t i = 0; i < estimators_.size(); ++i) {
        step.per_job_w[i] = std::clamp(estimators_[i]->step(aggregate_w), 0.0, options_.cap_w);
    }
    if (options_.reconcile) {
        step.reconciled = reconcile_step(step.per_job_w, aggregate_w, options_.cap_w);
        if (!step.reconciled && aggregate_w > 0.0) {
            step.warning = "t=" + std::to_string(t_) + ": predictions could not be reconciled to " +
                           format_double(aggregate_w) + " W; raw values kept";
        }
    }
    ++t_;
    return step;
}

std::vector<ResolvedJob> resolve(const std::vector<JobQuery>& queries, const library::ModelLibrary& lib) {
    std::vector<ResolvedJob> out;
    std::map<std::string, std::shared_ptr<const library::DisaggModel>> cache;
    for (const auto& q : queries) {
        auto [entry, distance] = lib.select_entry(q.key);
        auto& model = cache[entry.id];
        if (!model) model = std::make_shared<const library::DisaggModel>(lib.load(entry.id));
        out.push_back({q.job_id, model, entry.key, entry.id, distance});
    }
    return out;
}

DisaggResult disaggregate(std::span<const double> aggregate_w, const std::vector<ResolvedJob>& jobs,
                          const DisaggOptions& options) {
    if (aggregate_w.empty()) fail("ShapeMismatch", "aggregate series is empty");
    if (options.resample_factor < 1) fail("ShapeMismatch", "resample factor must be at least 1");
    StreamingDisaggregator stream(jobs, options);
    std::vector<std::vector<double>> series(jobs.size(), std::vector<double>(aggregate_w.size()));
    DisaggResult result;
    bool all_reconciled = true;
    for (std::size_t t = 0; t < aggregate_w.size(); ++t) {
        auto step = stream.push(aggregate_w[t]);
        for (std::size_t i = 0; i < jobs.size(); ++i) series[i][t] = step.per_job_w[i];
        all_reconciled = all_reconciled && step.reconciled;
        if (step.warning) result.warnings.push_back(std::move(*step.warning));
    }
    result.reconciled = options.reconcile && all_reconciled;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        result.job_ids.push_back(jobs[i].job_id);
        result.model_keys_used.push_back(jobs[i].key);
        result.model_ids_used.push_back(jobs[i].model_id);
        result.per_job_w[jobs[i].job_id] =
            options.resample_factor > 1 ? resample_mean(series[i], options.resample_factor) : std::move(series[i]);
    }
    return result;
}

DisaggResult disaggregate(std::span<const double> aggregate_w, const std::vector<JobQuery>& queries,
                          const library::ModelLibrary& lib, const DisaggOptions& options) {
    if (aggregate_w.empty()) fail("ShapeMismatch", "aggregate series is empty");
    return disaggregate(aggregate_w, resolve(queries, lib), options);
}

}  // namespace wattscope::disagg
