#include "wattscope/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wattscope/baselines.hpp"
#include "wattscope/disagg.hpp"
#include "wattscope/error.hpp"
#include "wattscope/nn/train.hpp"
#include "wattscope/trace.hpp"
#include "wattscope/util.hpp"

namespace wattscope::eval {

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("eval", kind, detail);
}

// Platform-independent uniform draw in [lo, hi).
double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::uint64_t scenario_tag(const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
    return h;
}

std::string range_label(const char* what, double lo, double hi) {
    return std::string(what) + "[" + format_double(lo) + "," + format_double(hi) + ")";
}

trace::SyntheticJobSpec background_job(std::mt19937_64& rng, const std::string& id, const ScenarioConfig& c) {
    trace::SyntheticJobSpec s;
    s.job_id = id;
    s.target_cov = uniform(rng, 0.1, 0.5);
    s.mean_power_w = uniform(rng, 15.0, 50.0);
    static constexpr int kPeriods[] = {96, 144, 288, 0};
    const int period = kPeriods[pick(rng, 4)];
    if (period > 0) {
        s.period_samples = period;
        s.period_score_target = uniform(rng, 0.3, 0.8);
    }
    s.shape = pick(rng, 2) == 0 ? trace::TemplateShape::Sine : trace::TemplateShape::Square;
    s.noise_seed = rng();
    s.cap_w = c.cap_w;
    s.sampling_interval_s = c.interval_s;
    return s;
}

trace::SyntheticJobSpec target_job(std::mt19937_64& rng, const ScenarioConfig& c, double cov, double mean_w,
                                   double score) {
    trace::SyntheticJobSpec s;
    s.job_id = "target";
    s.target_cov = cov;
    s.mean_power_w = mean_w;
    static constexpr int kPeriods[] = {96, 144, 288};
    s.period_samples = kPeriods[pick(rng, 3)];
    s.period_score_target = score;
    s.shape = pick(rng, 2) == 0 ? trace::TemplateShape::Sine : trace::TemplateShape::Square;
    s.noise_seed = rng();
    s.cap_w = c.cap_w;
    s.sampling_interval_s = c.interval_s;
    return s;
}

trace::ServerTrace build_server(const std::vector<trace::SyntheticJobSpec>& specs, std::size_t length,
                                const std::string& server_id) {
    std::vector<trace::JobSeries> jobs;
    jobs.reserve(specs.size());
    for (const auto& s : specs) jobs.push_back(trace::generate_synthetic_job(s, length));
    trace::SynthesisOptions opt;
    opt.per_job_cap_w = specs.front().cap_w;
    opt.server_id = server_id;
    return trace::synthesize_server(std::move(jobs), powermodel::reference_curve(), opt);
}

std::span<const double> slice(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    return std::span<const double>(v).subspan(begin, end - begin);
}

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Sliding-window estimates over test, using history before test.begin for
// the first windows. Streams the models so the serving path is what is scored.
std::vector<std::vector<double>> stream_estimates(const std::vector<double>& aggregate,
                                                  const std::vector<disagg::ResolvedJob>& jobs, Span test,
                                                  int window, double cap_w) {
    const std::size_t lead = std::min<std::size_t>(test.begin, static_cast<std::size_t>(window - 1));
    disagg::DisaggOptions opt;
    opt.cap_w = cap_w;
    disagg::StreamingDisaggregator stream(jobs, opt);
    std::vector<std::vector<double>> out(jobs.size());
    for (std::size_t t = test.begin - lead; t < test.end; ++t) {
        const auto step = stream.push(aggregate[t]);
        if (t < test.begin) continue;
        for (std::size_t i = 0; i < jobs.size(); ++i) out[i].push_back(step.per_job_w[i]);
    }
    return out;
}

class Runner {
public:
    explicit Runner(const ScenarioConfig& c) : c_(c), tag_(scenario_tag(c.scenario)) {}

    ExperimentResult run();

private:
    std::mt19937_64 unit_rng(std::size_t bucket, std::size_t unit) const {
        return std::mt19937_64(derive_seed(c_.seed ^ tag_, bucket, unit));
    }

    std::shared_ptr<const library::DisaggModel> train_model(const trace::ServerTrace& server, std::size_t job,
                                                            Span train, std::uint64_t seed) const {
        nn::NetworkConfig net = c_.network;
        net.seed = seed;
        nn::TrainingData data;
        data.cap_w = c_.cap_w;
        const auto& agg = server.aggregate_w;
        const auto& target = server.jobs[job].power_w;
        data.pairs.push_back({std::vector<double>(agg.begin() + static_cast<std::ptrdiff_t>(train.begin),
                                                  agg.begin() + static_cast<std::ptrdiff_t>(train.end)),
                              std::vector<double>(target.begin() + static_cast<std::ptrdiff_t>(train.begin),
                                                  target.begin() + static_cast<std::ptrdiff_t>(train.end))});
        return std::make_shared<const library::DisaggModel>(nn::train(net, data));
    }

    // Trains on model_server[train] and scores on eval_server[test] for each
    // listed job; appends outcomes and the unit's reports.
    void evaluate_unit(ExperimentResult& result, std::size_t unit, const std::string& bucket,
                       const trace::ServerTrace& model_server, const trace::ServerTrace& eval_server,
                       const std::vector<std::size_t>& targets, Span train, Span test, bool with_co) const {
        std::vector<disagg::ResolvedJob> resolved;
        for (std::size_t k : targets) {
            const std::uint64_t seed = derive_seed(c_.seed ^ tag_, 1000 + unit, k);
            resolved.push_back({eval_server.jobs[k].job_id, train_model(model_server, k, train, seed), {}, {}});
        }
        const auto est = stream_estimates(eval_server.aggregate_w, resolved, test, c_.network.window, c_.cap_w);

        std::optional<std::vector<std::vector<double>>> co_est;
        if (with_co) {
            baselines::JobPowerMap train_power;
            for (const auto& j : model_server.jobs) {
                const auto s = slice(j.power_w, train.begin, train.end);
                train_power[j.job_id].assign(s.begin(), s.end());
            }
            co_est = baselines::co_predict(baselines::co_fit(train_power),
                                           slice(eval_server.aggregate_w, test.begin, test.end));
        }

        std::map<std::string, std::vector<double>> model_pred;
        std::map<std::string, std::vector<double>> mean_pred;
        std::map<std::string, std::vector<double>> co_pred;
        std::map<std::string, std::vector<double>> truth;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const std::size_t k = targets[i];
            const auto& job = eval_server.jobs[k];
            const auto train_span = slice(model_server.jobs[k].power_w, train.begin, train.end);
            const auto test_truth = slice(job.power_w, test.begin, test.end);
            const double mu = std::max(0.0, mean_of(train_span));

            JobOutcome o;
            o.unit = unit;
            o.bucket = bucket;
            o.job_id = job.job_id;
            const auto prof = characterize::profile(slice(job.power_w, 0, test.begin), c_.cap_w);
            o.cov = prof.cov;
            o.period_score = prof.dominant_score();
            o.intensity_w = prof.intensity_w;
            o.cls = prof.cls;
            o.mae_model_w = mae(est[i], test_truth);
            o.nmae_model = nmae(est[i], test_truth);
            const std::vector<double> mean_series(test_truth.size(), mu);
            o.mae_mean_w = mae(mean_series, test_truth);
            o.nmae_mean = nmae(mean_series, test_truth);
            if (co_est) {
                // co_fit orders jobs by id; find this job's row.
                std::vector<std::string> ids;
                for (const auto& j : model_server.jobs) ids.push_back(j.job_id);
                std::sort(ids.begin(), ids.end());
                const auto row = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), job.job_id) - ids.begin());
                o.nmae_co = nmae((*co_est)[row], test_truth);
                co_pred[job.job_id] = (*co_est)[row];
            }
            result.outcomes.push_back(o);

            model_pred[job.job_id] = est[i];
            mean_pred[job.job_id] = mean_series;
            truth[job.job_id].assign(test_truth.begin(), test_truth.end());
        }

        const bool all_jobs = targets.size() == eval_server.jobs.size();
        const auto agg = all_jobs ? slice(eval_server.aggregate_w, test.begin, test.end) : std::span<const double>{};
        const std::string prefix = "u" + std::to_string(unit) + "/" + bucket + "/";
        result.reports.push_back(make_report(c_.scenario, prefix + "sliding_window", model_pred, truth, agg));
        result.reports.push_back(make_report(c_.scenario, prefix + "mean", mean_pred, truth, agg));
        if (with_co) result.reports.push_back(make_report(c_.scenario, prefix + "co", co_pred, truth, agg));
    }

    std::vector<std::size_t> all_indices(std::size_t n) const {
        std::vector<std::size_t> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = i;
        return v;
    }

    void sweep(ExperimentResult& result, const char* what) const;
    void scalability(ExperimentResult& result) const;
    void robustness(ExperimentResult& result) const;
    void generalization(ExperimentResult& result) const;
    void table1(ExperimentResult& result) const;

    const ScenarioConfig& c_;
    std::uint64_t tag_;
};

// Target job drawn inside each bucket of one characteristic, the others held
// at moderate values, plus random background jobs.
void Runner::sweep(ExperimentResult& result, const char* what) const {
    const std::string kind = what;
    std::vector<std::pair<double, double>> edges;
    if (kind == "cov") {
        edges = {{0.0, 0.2}, {0.2, 0.6}, {0.6, 1.0}};
    } else if (kind == "score") {
        edges = {{0.0, 0.2}, {0.2, 0.6}, {0.6, 1.0}};
    } else {
        edges = {{0.05, 0.2}, {0.2, 0.5}, {0.5, 0.75}};
    }
    const std::size_t T = c_.train_samples + c_.test_samples;
    std::size_t unit = 0;
    for (std::size_t b = 0; b < edges.size(); ++b) {
        const auto [lo, hi] = edges[b];
        const std::string bucket = range_label(what, lo, hi);
        for (int u = 0; u < c_.units_per_bucket; ++u, ++unit) {
            auto rng = unit_rng(b, static_cast<std::size_t>(u));
            const double margin = 0.03;
            double cov = uniform(rng, 0.2, 0.4);
            double mean = uniform(rng, 50.0, 90.0);
            double score = uniform(rng, 0.4, 0.8);
            if (kind == "cov") cov = uniform(rng, lo + margin, hi - margin);
            if (kind == "score") score = uniform(rng, lo + margin, hi - margin);
            if (kind == "intensity") mean = c_.cap_w * uniform(rng, lo + 0.01, hi - 0.01);
            std::vector<trace::SyntheticJobSpec> specs{target_job(rng, c_, cov, mean, score)};
            for (int k = 0; k < c_.background_jobs; ++k) {
                specs.push_back(background_job(rng, "bg" + std::to_string(k), c_));
            }
            const auto server = build_server(specs, T, "u" + std::to_string(unit));
            evaluate_unit(result, unit, bucket, server, server, {0}, {0, c_.train_samples},
                          {c_.train_samples, T}, false);
        }
    }
}

// Same target job against n background jobs sharing a fixed total power.
void Runner::scalability(ExperimentResult& result) const {
    const std::size_t T = c_.train_samples + c_.test_samples;
    for (int u = 0; u < c_.units_per_bucket; ++u) {
        auto base = unit_rng(0, static_cast<std::size_t>(u));
        const auto target = target_job(base, c_, 0.3, 60.0, 0.6);
        const std::uint64_t bg_seed = base();
        for (std::size_t b = 0; b < c_.scalability_n.size(); ++b) {
            const int n = c_.scalability_n[b];
            std::mt19937_64 rng(derive_seed(bg_seed, static_cast<std::uint64_t>(n)));
            std::vector<trace::SyntheticJobSpec> specs{target};
            for (int k = 0; k < n; ++k) {
                auto s = background_job(rng, "bg" + std::to_string(k), c_);
                s.mean_power_w = c_.scalability_background_w / n;
                specs.push_back(s);
            }
            const std::size_t unit = static_cast<std::size_t>(u) * c_.scalability_n.size() + b;
            const auto server = build_server(specs, T, "u" + std::to_string(unit));
            evaluate_unit(result, unit, "n=" + std::to_string(n), server, server, {0}, {0, c_.train_samples},
                          {c_.train_samples, T}, false);
        }
    }
}

// Growing training spans ending where a shared test span starts.
void Runner::robustness(ExperimentResult& result) const {
    if (c_.robustness_sizes.empty()) return;
    const std::size_t longest = *std::max_element(c_.robustness_sizes.begin(), c_.robustness_sizes.end());
    const std::size_t T = longest + c_.test_samples;
    for (int u = 0; u < c_.units_per_bucket; ++u) {
        auto rng = unit_rng(0, static_cast<std::size_t>(u));
        std::vector<trace::SyntheticJobSpec> specs{
            target_job(rng, c_, uniform(rng, 0.15, 0.45), uniform(rng, 40.0, 90.0), uniform(rng, 0.4, 0.8))};
        for (int k = 0; k < c_.background_jobs; ++k) specs.push_back(background_job(rng, "bg" + std::to_string(k), c_));
        const auto server = build_server(specs, T, "u" + std::to_string(u));
        for (std::size_t b = 0; b < c_.robustness_sizes.size(); ++b) {
            const std::size_t size = c_.robustness_sizes[b];
            const std::size_t unit = static_cast<std::size_t>(u) * c_.robustness_sizes.size() + b;
            evaluate_unit(result, unit, "train=" + std::to_string(size), server, server, {0},
                          {longest - size, longest}, {longest, T}, false);
        }
    }
}

// A model trained next to one set of background jobs, scored next to another.
void Runner::generalization(ExperimentResult& result) const {
    const std::size_t T = c_.train_samples + c_.test_samples;
    for (int u = 0; u < c_.units_per_bucket; ++u) {
        auto rng = unit_rng(0, static_cast<std::size_t>(u));
        const auto target = target_job(rng, c_, uniform(rng, 0.15, 0.45), uniform(rng, 40.0, 90.0),
                                       uniform(rng, 0.4, 0.8));
        std::vector<trace::SyntheticJobSpec> home{target};
        std::vector<trace::SyntheticJobSpec> away{target};
        for (int k = 0; k < c_.background_jobs; ++k) home.push_back(background_job(rng, "bg" + std::to_string(k), c_));
        for (int k = 0; k < c_.background_jobs; ++k) away.push_back(background_job(rng, "bg" + std::to_string(k), c_));
        const auto home_server = build_server(home, T, "home" + std::to_string(u));
        const auto away_server = build_server(away, T, "away" + std::to_string(u));
        const auto unit = static_cast<std::size_t>(u);
        evaluate_unit(result, 2 * unit, "in_situ", away_server, away_server, {0}, {0, c_.train_samples},
                      {c_.train_samples, T}, false);
        evaluate_unit(result, 2 * unit + 1, "transfer", home_server, away_server, {0}, {0, c_.train_samples},
                      {c_.train_samples, T}, false);
    }
}

// Five jobs on one server spanning the variability/regularity/intensity
// classes; every job is estimated, so aggregate metrics are available.
void Runner::table1(ExperimentResult& result) const {
    struct Shape {
        const char* id;
        double cov;
        int period;
        double score;
        double mean_w;
        trace::TemplateShape shape;
    };
    static constexpr Shape kJobs[] = {
        {"job1", 0.15, 288, 0.8, 60.0, trace::TemplateShape::Sine},
        {"job2", 0.40, 144, 0.6, 30.0, trace::TemplateShape::Square},
        {"job3", 0.80, 0, 0.0, 20.0, trace::TemplateShape::Sine},
        {"job4", 0.10, 96, 0.7, 110.0, trace::TemplateShape::Sine},
        {"job5", 0.30, 288, 0.4, 40.0, trace::TemplateShape::Square},
    };
    std::vector<trace::SyntheticJobSpec> specs;
    for (std::size_t i = 0; i < std::size(kJobs); ++i) {
        trace::SyntheticJobSpec s;
        s.job_id = kJobs[i].id;
        s.target_cov = kJobs[i].cov;
        if (kJobs[i].period > 0) s.period_samples = kJobs[i].period;
        s.period_score_target = kJobs[i].score;
        s.mean_power_w = kJobs[i].mean_w * c_.cap_w / 200.0;
        s.shape = kJobs[i].shape;
        s.noise_seed = derive_seed(c_.seed ^ tag_, i);
        s.cap_w = c_.cap_w;
        s.sampling_interval_s = c_.interval_s;
        specs.push_back(s);
    }
    const std::size_t T = c_.train_samples + c_.test_samples;
    const auto server = build_server(specs, T, "server");
    evaluate_unit(result, 0, "table1", server, server, all_indices(specs.size()), {0, c_.train_samples},
                  {c_.train_samples, T}, true);
}

ExperimentResult Runner::run() {
    ExperimentResult result;
    result.config = c_;
    const auto& s = c_.scenario;
    if (s == "variability_sweep") {
        sweep(result, "cov");
    } else if (s == "regularity_sweep") {
        sweep(result, "score");
    } else if (s == "intensity_sweep") {
        sweep(result, "intensity");
    } else if (s == "scalability") {
        scalability(result);
    } else if (s == "robustness") {
        robustness(result);
    } else if (s == "generalization") {
        generalization(result);
    } else if (s == "table1_style") {
        table1(result);
    } else {
        fail("UnknownScenario", "'" + s + "' is not a known scenario");
    }

    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> by_bucket;
    for (const auto& o : result.outcomes) {
        if (!by_bucket.contains(o.bucket)) order.push_back(o.bucket);
        by_bucket[o.bucket].push_back(o.nmae_model);
    }
    for (const auto& b : order) result.buckets.push_back(bucket_stat(b, by_bucket[b]));
    if (s == "table1_style") {
        std::vector<double> mean_nmae;
        for (const auto& o : result.outcomes) mean_nmae.push_back(o.nmae_mean);
        result.buckets.front().bucket = "sliding_window";
        result.buckets.push_back(bucket_stat("mean", mean_nmae));
        std::vector<double> co_nmae;
        for (const auto& o : result.outcomes) {
            if (o.nmae_co) co_nmae.push_back(*o.nmae_co);
        }
        if (!co_nmae.empty()) result.buckets.push_back(bucket_stat("co", co_nmae));
    }
    return result;
}

void validate(const ScenarioConfig& c) {
    nn::validate(c.network);
    if (!(c.cap_w > 0.0)) fail("InvalidConfig", "cap must be positive");
    if (c.interval_s <= 0) fail("InvalidConfig", "interval must be positive");
    if (c.units_per_bucket < 1) fail("InvalidConfig", "units_per_bucket must be at least 1");
    if (c.background_jobs < 0) fail("InvalidConfig", "background_jobs must be non-negative");
    if (c.train_samples < static_cast<std::size_t>(c.network.window)) {
        fail("InvalidConfig", "training span is shorter than the window");
    }
    if (c.test_samples < 1) fail("InvalidConfig", "test span is empty");
    for (int n : c.scalability_n) {
        if (n < 1) fail("InvalidConfig", "scalability job counts must be positive");
    }
    for (std::size_t n : c.robustness_sizes) {
        if (n < static_cast<std::size_t>(c.network.window)) fail("InvalidConfig", "robustness size below the window");
    }
}

}  // namespace

nn::NetworkConfig experiment_network() {
    nn::NetworkConfig c = nn::desk_config();
    c.epochs = 20;
    c.learning_rate = 2e-3;
    return c;
}

double mae(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || truth.empty()) {
        fail("LengthMismatch", "prediction has " + std::to_string(pred.size()) + " samples, truth " +
                                   std::to_string(truth.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(truth.size());
}

double nmae(std::span<const double> pred, std::span<const double> truth) {
    const double err = mae(pred, truth);
    const double mu = mean_of(truth);
    if (!(mu > 1e-9)) fail("ZeroMeanTruth", "true series has non-positive mean");
    return err / mu;
}

MetricsReport make_report(const std::string& scenario, const std::string& label,
                          const std::map<std::string, std::vector<double>>& pred,
                          const std::map<std::string, std::vector<double>>& truth,
                          std::span<const double> aggregate_w) {
    MetricsReport r;
    r.scenario = scenario;
    r.label = label;
    std::vector<double> sum;
    for (const auto& [job, t] : truth) {
        const auto it = pred.find(job);
        if (it == pred.end()) fail("LengthMismatch", "no prediction for job " + job);
        r.per_job[job] = {mae(it->second, t), nmae(it->second, t)};
        if (sum.empty()) sum.assign(it->second.size(), 0.0);
        if (sum.size() != it->second.size()) fail("LengthMismatch", "jobs have different lengths");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += it->second[i];
    }
    if (!aggregate_w.empty()) {
        r.aggregate_mae_w = mae(sum, aggregate_w);
        r.aggregate_nmae = nmae(sum, aggregate_w);
    }
    return r;
}

BucketStat bucket_stat(const std::string& name, std::span<const double> nmaes) {
    BucketStat b;
    b.bucket = name;
    b.n_jobs = nmaes.size();
    if (nmaes.empty()) return b;
    b.mean_nmae = mean_of(nmaes);
    b.p5 = quantile_of(nmaes, 0.05);
    b.p95 = quantile_of(nmaes, 0.95);
    return b;
}

const BucketStat* ExperimentResult::find_bucket(const std::string& name) const noexcept {
    for (const auto& b : buckets) {
        if (b.bucket == name) return &b;
    }
    return nullptr;
}

ExperimentResult run_experiment(const ScenarioConfig& config) {
    if (std::find(scenario_names().begin(), scenario_names().end(), config.scenario) == scenario_names().end()) {
        fail("UnknownScenario", "'" + config.scenario + "' is not a known scenario");
    }
    validate(config);
    return Runner(config).run();
}

nlohmann::json summary_json(const ExperimentResult& result) {
    nlohmann::ordered_json j;
    j["scenario"] = result.config.scenario;
    j["seed"] = result.config.seed;
    j["config"] = nlohmann::json(result.config);
    auto buckets = nlohmann::ordered_json::array();
    for (const auto& b : result.buckets) {
        buckets.push_back({{"bucket", b.bucket},
                           {"mean_nmae", b.mean_nmae},
                           {"p5", b.p5},
                           {"p95", b.p95},
                           {"n_jobs", b.n_jobs}});
    }
    j["buckets"] = buckets;
    auto outcomes = nlohmann::ordered_json::array();
    for (const auto& o : result.outcomes) {
        nlohmann::ordered_json e;
        e["unit"] = o.unit;
        e["bucket"] = o.bucket;
        e["job_id"] = o.job_id;
        e["cov"] = o.cov;
        e["period_score"] = o.period_score;
        e["intensity_w"] = o.intensity_w;
        e["class"] = {{"variability", characterize::to_string(o.cls.variability)},
                      {"regularity", characterize::to_string(o.cls.regularity)},
                      {"intensity", characterize::to_string(o.cls.intensity)}};
        e["sliding_window"] = {{"mae_w", o.mae_model_w}, {"nmae", o.nmae_model}};
        e["mean"] = {{"mae_w", o.mae_mean_w}, {"nmae", o.nmae_mean}};
        if (o.nmae_co) e["co"] = {{"nmae", *o.nmae_co}};
        outcomes.push_back(e);
    }
    j["outcomes"] = outcomes;
    auto reports = nlohmann::ordered_json::array();
    for (const auto& r : result.reports) {
        nlohmann::ordered_json e;
        e["label"] = r.label;
        auto per_job = nlohmann::ordered_json::object();
        for (const auto& [job, m] : r.per_job) per_job[job] = {{"mae_w", m.mae_w}, {"nmae", m.nmae}};
        e["per_job"] = per_job;
        if (r.aggregate_mae_w) {
            e["aggregate_mae_w"] = *r.aggregate_mae_w;
            e["aggregate_nmae"] = *r.aggregate_nmae;
        }
        reports.push_back(e);
    }
    j["reports"] = reports;
    return nlohmann::json::parse(j.dump());
}

std::string buckets_csv(const ExperimentResult& result) {
    std::ostringstream out;
    out << "bucket,mean_nmae,p5,p95,n_jobs\n";
    for (const auto& b : result.buckets) {
        out << b.bucket << ',' << format_double(b.mean_nmae) << ',' << format_double(b.p5) << ','
            << format_double(b.p95) << ',' << b.n_jobs << '\n';
    }
    return out.str();
}

void write_reports(const ExperimentResult& result, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail("IoFailure", "cannot create " + out_dir.string() + ": " + ec.message());
    const auto stem = result.config.scenario;
    {
        std::ofstream out(out_dir / (stem + "_summary.json"), std::ios::binary);
        out << summary_json(result).dump(2) << '\n';
        if (!out) fail("IoFailure", "cannot write summary for " + stem);
    }
    std::ofstream out(out_dir / (stem + "_buckets.csv"), std::ios::binary);
    out << buckets_csv(result);
    if (!out) fail("IoFailure", "cannot write bucket CSV for " + stem);
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
    j = nlohmann::json{{"scenario", c.scenario},
                       {"seed", c.seed},
                       {"network", c.network},
                       {"cap_w", c.cap_w},
                       {"interval_s", c.interval_s},
                       {"units_per_bucket", c.units_per_bucket},
                       {"background_jobs", c.background_jobs},
                       {"train_samples", c.train_samples},
                       {"test_samples", c.test_samples},
                       {"scalability_n", c.scalability_n},
                       {"robustness_sizes", c.robustness_sizes},
                       {"scalability_background_w", c.scalability_background_w}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    opt("scenario", c.scenario);
    opt("seed", c.seed);
    opt("network", c.network);
    opt("cap_w", c.cap_w);
    opt("interval_s", c.interval_s);
    opt("units_per_bucket", c.units_per_bucket);
    opt("background_jobs", c.background_jobs);
    opt("train_samples", c.train_samples);
    opt("test_samples", c.test_samples);
    opt("scalability_n", c.scalability_n);
    opt("robustness_sizes", c.robustness_sizes);
    opt("scalability_background_w", c.scalability_background_w);
}

}  // namespace wattscope::eval
