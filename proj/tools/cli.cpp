#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wattscope/characterize.hpp"
#include "wattscope/disagg.hpp"
#include "wattscope/error.hpp"
#include "wattscope/eval.hpp"
#include "wattscope/library.hpp"
#include "wattscope/monitor.hpp"
#include "wattscope/nn/train.hpp"
#include "wattscope/powermodel.hpp"
#include "wattscope/trace.hpp"
#include "wattscope/util.hpp"

namespace wattscope::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("cli", kind, detail);
}

struct Globals {
    std::uint64_t seed = 0;
    double cap_w = trace::kDefaultCapW;
    int interval_s = trace::kDefaultIntervalS;
    std::string out_dir;
};

// A trace directory (jobs plus aggregate) or a single CSV file.
struct Input {
    std::string server_id;
    std::vector<trace::JobSeries> jobs;
    std::optional<trace::JobSeries> aggregate;
};

Input load_input(const fs::path& path, trace::TraceFormat format = trace::TraceFormat::PowerCsv) {
    Input in;
    if (fs::is_directory(path)) {
        auto st = trace::load_server_trace(path);
        in.server_id = st.server_id;
        trace::JobSeries agg;
        agg.job_id = st.server_id;
        agg.sampling_interval_s = st.sampling_interval_s();
        agg.start_timestamp = st.jobs.empty() ? 0 : st.jobs.front().start_timestamp;
        agg.power_w = st.aggregate_w;
        in.aggregate = std::move(agg);
        in.jobs = std::move(st.jobs);
        return in;
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("trace", "IoFailure", "cannot open " + path.string());
    in.jobs = trace::parse_job_trace(f, format);
    in.server_id = path.stem().string();
    return in;
}

void check_interval(const trace::JobSeries& s, const Globals& g) {
    if (s.sampling_interval_s != g.interval_s) {
        fail("IntervalMismatch", "series " + s.job_id + " is sampled every " + std::to_string(s.sampling_interval_s) +
                                     " s but --interval-s is " + std::to_string(g.interval_s));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) fail("IoFailure", "cannot write " + path.string());
}

fs::path prepare_out_dir(const Globals& g) {
    const fs::path dir(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail("IoFailure", "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

nlohmann::ordered_json profile_record(const std::string& id, const char* kind, std::span<const double> series,
                                      double cap_w) {
    const auto p = characterize::profile(series, cap_w);
    nlohmann::ordered_json j;
    j["job_id"] = id;
    j["kind"] = kind;
    j["length"] = series.size();
    j["cov"] = std::isfinite(p.cov) ? nlohmann::ordered_json(p.cov) : nlohmann::ordered_json(nullptr);
    j["dominant_period"] = p.periods.empty() ? nlohmann::ordered_json(nullptr)
                                             : nlohmann::ordered_json(p.periods.front().period_samples);
    j["score"] = p.dominant_score();
    j["intensity_w"] = p.intensity_w;
    auto periods = nlohmann::ordered_json::array();
    for (const auto& e : p.periods) periods.push_back({{"period_samples", e.period_samples}, {"score", e.score}});
    j["periods"] = periods;
    j["class"] = {{"variability", characterize::to_string(p.cls.variability)},
                  {"regularity", characterize::to_string(p.cls.regularity)},
                  {"intensity", characterize::to_string(p.cls.intensity)}};
    return j;
}

nn::NetworkConfig preset_network(const std::string& name) {
    if (name == "full") return nn::full_config();
    if (name == "experiment") return eval::experiment_network();
    return nn::desk_config();
}

struct NetworkOverrides {
    std::string preset = "desk";
    std::optional<int> epochs;
    std::optional<int> window;
    std::optional<int> batch_size;
    std::optional<double> learning_rate;

    void add_to(CLI::App* cmd, const std::string& default_preset) {
        preset = default_preset;
        cmd->add_option("--preset", preset, "Network size preset")
            ->check(CLI::IsMember({"desk", "experiment", "full"}))
            ->capture_default_str();
        cmd->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        cmd->add_option("--window", window, "Sliding-window length in samples")->check(CLI::PositiveNumber);
        cmd->add_option("--batch-size", batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
        cmd->add_option("--learning-rate", learning_rate, "Optimizer step size")->check(CLI::PositiveNumber);
    }

    nn::NetworkConfig resolve(std::uint64_t seed) const {
        nn::NetworkConfig c = preset_network(preset);
        if (epochs) c.epochs = *epochs;
        if (window) c.window = *window;
        if (batch_size) c.batch_size = *batch_size;
        if (learning_rate) c.learning_rate = *learning_rate;
        c.seed = seed;
        nn::validate(c);
        return c;
    }
};

// ---------------------------------------------------------------- synthesize

struct SynthesizeArgs {
    std::string spec;
    std::string usage;
    std::string curve;
    std::string policy = "proportional";
    std::string server_id;
    std::size_t length = 0;
    bool jitter = false;
};

trace::TemplateShape shape_from_string(const std::string& s) {
    if (s == "sine") return trace::TemplateShape::Sine;
    if (s == "square") return trace::TemplateShape::Square;
    fail("InvalidSpec", "shape must be sine or square, got '" + s + "'");
}

int cmd_synthesize(const SynthesizeArgs& a, const Globals& g, std::ostream& out) {
    powermodel::PowerCurve curve = powermodel::reference_curve();
    if (!a.curve.empty()) {
        std::ifstream f(a.curve, std::ios::binary);
        if (!f) fail("IoFailure", "cannot open " + a.curve);
        try {
            curve = nlohmann::json::parse(f).get<powermodel::PowerCurve>();
        } catch (const nlohmann::json::exception& e) {
            fail("InvalidSpec", a.curve + ": " + e.what());
        }
    }

    trace::SynthesisOptions opt;
    opt.per_job_cap_w = g.cap_w;
    opt.policy = trace::baseload_policy_from_string(a.policy);
    opt.server_id = a.server_id.empty() ? "server" : a.server_id;
    if (a.jitter) opt.noise_seed = derive_seed(g.seed, 2);

    std::vector<trace::JobSeries> jobs;
    if (!a.usage.empty()) {
        std::ifstream f(a.usage, std::ios::binary);
        if (!f) throw Error("trace", "IoFailure", "cannot open " + a.usage);
        jobs = trace::parse_job_trace(f, trace::TraceFormat::UsageCsv);
        for (const auto& j : jobs) check_interval(j, g);
    } else {
        std::ifstream f(a.spec, std::ios::binary);
        if (!f) fail("IoFailure", "cannot open " + a.spec);
        nlohmann::json spec;
        try {
            spec = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            fail("InvalidSpec", a.spec + ": " + e.what());
        }
        std::size_t length = a.length;
        if (length == 0) length = spec.value("length", std::size_t{2016});
        if (a.server_id.empty() && spec.contains("server_id")) opt.server_id = spec["server_id"].get<std::string>();
        if (!spec.contains("jobs") || !spec["jobs"].is_array() || spec["jobs"].empty()) {
            fail("InvalidSpec", "spec needs a non-empty 'jobs' array");
        }
        std::size_t k = 0;
        for (const auto& js : spec["jobs"]) {
            trace::SyntheticJobSpec s;
            try {
                s.job_id = js.value("job_id", "job" + std::to_string(k + 1));
                s.target_cov = js.at("cov").get<double>();
                s.mean_power_w = js.at("mean_power_w").get<double>();
                if (js.contains("period_samples") && !js["period_samples"].is_null()) {
                    s.period_samples = js["period_samples"].get<int>();
                }
                s.period_score_target = js.value("period_score", 0.0);
                s.shape = shape_from_string(js.value("shape", std::string("sine")));
            } catch (const nlohmann::json::exception& e) {
                fail("InvalidSpec", "job " + std::to_string(k) + ": " + e.what());
            }
            s.noise_seed = derive_seed(g.seed, 1, k);
            s.cap_w = g.cap_w;
            s.sampling_interval_s = g.interval_s;
            jobs.push_back(trace::generate_synthetic_job(s, length));
            ++k;
        }
    }

    const auto st = trace::synthesize_server(std::move(jobs), curve, opt);
    const fs::path dir = prepare_out_dir(g);
    trace::save_server_trace(st, dir);
    out << "wrote " << st.jobs.size() << " jobs x " << st.length() << " samples to " << dir.string()
        << " (conservation error " << format_double(trace::conservation_error(st)) << ")\n";
    return kExitOk;
}

// -------------------------------------------------------------- characterize

int cmd_characterize(const std::string& trace_path, const Globals& g, std::ostream& out) {
    const Input in = load_input(trace_path);
    std::string lines;
    std::size_t count = 0;
    for (const auto& j : in.jobs) {
        check_interval(j, g);
        lines += profile_record(j.job_id, "job", j.power_w, g.cap_w).dump() + "\n";
        ++count;
    }
    if (in.aggregate) {
        const double cap = g.cap_w * static_cast<double>(std::max<std::size_t>(in.jobs.size(), 1));
        lines += profile_record(in.aggregate->job_id, "aggregate", in.aggregate->power_w, cap).dump() + "\n";
        ++count;
    }
    const fs::path dir = prepare_out_dir(g);
    write_text(dir / "profiles.jsonl", lines);
    out << "wrote " << count << " profile records to " << (dir / "profiles.jsonl").string() << "\n";
    return kExitOk;
}

// --------------------------------------------------------------------- train

struct TrainArgs {
    std::string trace;
    std::vector<std::string> jobs;
    std::string model_type = "sliding_window";
    std::size_t train_samples = 0;
    bool tag_jobs = false;
    bool overwrite = false;
    NetworkOverrides net;
};

ModelKey key_for(std::span<const double> series, double cap_w, int n_background, ModelType type,
                 std::optional<std::string> tag) {
    const auto p = characterize::profile(series, cap_w);
    ModelKey k;
    k.variability = p.cls.variability;
    k.regularity = p.cls.regularity;
    k.intensity = p.cls.intensity;
    k.n_background = n_background;
    k.model_type = type;
    k.job_tag = std::move(tag);
    return k;
}

int cmd_train(const TrainArgs& a, const Globals& g, std::ostream& out) {
    const Input in = load_input(a.trace);
    if (!in.aggregate) fail("MissingAggregate", "train needs a trace directory with an aggregate series");
    check_interval(*in.aggregate, g);
    const ModelType type = model_type_from_string(a.model_type);
    const nn::NetworkConfig net = a.net.resolve(g.seed);

    std::vector<const trace::JobSeries*> selected;
    if (a.jobs.empty()) {
        for (const auto& j : in.jobs) selected.push_back(&j);
    } else {
        for (const auto& id : a.jobs) {
            const auto it = std::find_if(in.jobs.begin(), in.jobs.end(), [&](const auto& j) { return j.job_id == id; });
            if (it == in.jobs.end()) throw Error("baselines", "UnknownJob", "trace has no job " + id);
            selected.push_back(&*it);
        }
    }
    const std::size_t T = in.aggregate->power_w.size();
    const std::size_t n_train = a.train_samples == 0 ? T : std::min(a.train_samples, T);
    const auto head = [&](const std::vector<double>& v) { return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n_train)); };
    const int n_background = static_cast<int>(in.jobs.size()) - 1;

    const fs::path dir = prepare_out_dir(g);
    library::ModelLibrary lib(dir / "library");
    nlohmann::ordered_json summary;
    summary["library"] = (dir / "library").string();
    summary["train_samples"] = n_train;
    auto stored = nlohmann::ordered_json::array();

    if (type == ModelType::CO) {
        baselines::JobPowerMap data;
        for (const auto* j : selected) data[j->job_id] = head(j->power_w);
        const auto agg = head(in.aggregate->power_w);
        const double cap = g.cap_w * static_cast<double>(selected.size());
        const ModelKey key = key_for(agg, cap, n_background, type, in.server_id);
        const std::string id = lib.store(baselines::co_fit(data), key, a.overwrite);
        stored.push_back({{"job_id", nullptr}, {"model_id", id}, {"key", nlohmann::json(key)}});
        out << "stored co model " << id << " for " << selected.size() << " jobs\n";
    } else {
        for (const auto* j : selected) {
            const auto target = head(j->power_w);
            std::optional<std::string> tag;
            if (a.tag_jobs) tag = j->job_id;
            const ModelKey key = key_for(target, g.cap_w, n_background, type, tag);
            library::DisaggModel model;
            if (type == ModelType::Mean) {
                model = baselines::mean_fit({{j->job_id, target}});
            } else {
                nn::TrainingData data;
                data.cap_w = g.cap_w;
                data.pairs.push_back({head(in.aggregate->power_w), target});
                nn::TrainOptions opt;
                opt.key = key;
                model = nn::train(net, data, opt);
            }
            const std::string id = lib.store(model, key, a.overwrite);
            stored.push_back({{"job_id", j->job_id}, {"model_id", id}, {"key", nlohmann::json(key)}});
            out << "stored " << to_string(type) << " model " << id << " for " << j->job_id << "\n";
        }
    }
    summary["models"] = stored;
    write_text(dir / "train_summary.json", summary.dump(2) + "\n");
    return kExitOk;
}

// -------------------------------------------------------------- disaggregate

struct DisaggArgs {
    std::string trace;
    std::string library;
    std::vector<std::string> jobs;
    std::string model_type = "sliding_window";
    std::optional<int> n_background;
    bool reconcile = false;
    int resample = 1;
    bool tag_jobs = false;
};

// ID[:VARIABILITY:REGULARITY:INTENSITY]
disagg::JobQuery parse_job_query(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.empty() || parts[0].empty() || (parts.size() != 1 && parts.size() != 4)) {
        fail("InvalidJob", "expected ID or ID:VARIABILITY:REGULARITY:INTENSITY, got '" + text + "'");
    }
    disagg::JobQuery q;
    q.job_id = parts[0];
    if (parts.size() == 4) {
        auto level = [](std::string s) {
            if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
            return characterize::level_from_string(s);
        };
        q.key.variability = level(parts[1]);
        q.key.regularity = level(parts[2]);
        q.key.intensity = level(parts[3]);
    }
    return q;
}

trace::JobSeries single_series(const Input& in, const std::string& what) {
    if (in.aggregate) return *in.aggregate;
    if (in.jobs.size() != 1) fail("MissingAggregate", what + " needs a trace directory or a single-series CSV");
    return in.jobs.front();
}

int cmd_disaggregate(const DisaggArgs& a, const Globals& g, std::ostream& out) {
    const Input in = load_input(a.trace);
    const trace::JobSeries agg = single_series(in, "disaggregate");
    check_interval(agg, g);
    const ModelType type = model_type_from_string(a.model_type);
    std::vector<disagg::JobQuery> queries;
    for (const auto& text : a.jobs) queries.push_back(parse_job_query(text));
    const int n_bg = a.n_background.value_or(static_cast<int>(queries.size()) - 1);
    for (auto& q : queries) {
        q.key.model_type = type;
        q.key.n_background = n_bg;
        if (a.tag_jobs) q.key.job_tag = q.job_id;
    }
    const library::ModelLibrary lib(a.library);
    const auto resolved = disagg::resolve(queries, lib);
    disagg::DisaggOptions opt;
    opt.reconcile = a.reconcile;
    opt.cap_w = g.cap_w;
    opt.resample_factor = a.resample;
    const auto result = disagg::disaggregate(agg.power_w, resolved, opt);

    std::vector<trace::JobSeries> series;
    for (const auto& id : result.job_ids) {
        trace::JobSeries s;
        s.job_id = id;
        s.sampling_interval_s = agg.sampling_interval_s * a.resample;
        s.start_timestamp = agg.start_timestamp;
        s.power_w = result.per_job_w.at(id);
        series.push_back(std::move(s));
    }
    nlohmann::ordered_json summary;
    summary["length"] = result.length();
    summary["reconciled"] = result.reconciled;
    summary["resample_factor"] = a.resample;
    auto jobs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < resolved.size(); ++i) {
        jobs.push_back({{"job_id", resolved[i].job_id},
                        {"model_id", resolved[i].model_id},
                        {"distance", resolved[i].distance},
                        {"model_key", nlohmann::json(resolved[i].key)}});
    }
    summary["jobs"] = jobs;
    summary["warnings"] = result.warnings;

    const fs::path dir = prepare_out_dir(g);
    std::ostringstream csv;
    trace::write_job_trace(csv, series, trace::TraceFormat::PowerCsv);
    write_text(dir / "estimates.csv", csv.str());
    write_text(dir / "disaggregation.json", summary.dump(2) + "\n");
    out << "disaggregated " << result.job_ids.size() << " jobs over " << result.length() << " samples into "
        << (dir / "estimates.csv").string() << "\n";
    for (const auto& w : result.warnings) out << "warning: " << w << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------ evaluate

struct EvaluateArgs {
    std::string scenario;
    std::optional<int> units;
    std::optional<std::size_t> train_samples;
    std::optional<std::size_t> test_samples;
    NetworkOverrides net;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, std::ostream& out) {
    eval::ScenarioConfig c;
    c.scenario = a.scenario;
    c.seed = g.seed;
    c.cap_w = g.cap_w;
    c.interval_s = g.interval_s;
    c.network = a.net.resolve(0);
    if (a.units) c.units_per_bucket = *a.units;
    if (a.train_samples) c.train_samples = *a.train_samples;
    if (a.test_samples) c.test_samples = *a.test_samples;
    const auto result = eval::run_experiment(c);
    const fs::path dir = prepare_out_dir(g);
    eval::write_reports(result, dir);
    out << eval::buckets_csv(result);
    return kExitOk;
}

// ------------------------------------------------------------------- monitor

struct MonitorArgs {
    std::string trace;
    std::string estimates;
    std::string server_id;
    double threshold = 0.10;
    int persistence = 12;
};

int cmd_monitor(const MonitorArgs& a, const Globals& g, std::ostream& out) {
    const Input in = load_input(a.trace);
    const trace::JobSeries agg = single_series(in, "monitor");
    check_interval(agg, g);
    std::ifstream f(a.estimates, std::ios::binary);
    if (!f) throw Error("trace", "IoFailure", "cannot open " + a.estimates);
    const auto est = trace::parse_job_trace(f, trace::TraceFormat::PowerCsv);
    for (const auto& e : est) {
        if (e.power_w.size() != agg.power_w.size()) {
            throw Error("trace", "LengthMismatch", "estimates for " + e.job_id + " do not cover the aggregate");
        }
    }
    monitor::MonitorConfig mc;
    mc.threshold = a.threshold;
    mc.persistence = a.persistence;
    monitor::MonitorState state(mc);
    const std::string server = a.server_id.empty() ? in.server_id : a.server_id;

    std::string lines;
    std::map<monitor::Event, std::size_t> counts;
    std::vector<double> inferred(est.size());
    for (std::size_t t = 0; t < agg.power_w.size(); ++t) {
        for (std::size_t i = 0; i < est.size(); ++i) inferred[i] = est[i].power_w[t];
        const monitor::Event ev = state.observe(agg.power_w[t], inferred);
        ++counts[ev];
        monitor::EventRecord rec;
        rec.timestamp = agg.start_timestamp + static_cast<std::int64_t>(t) * agg.sampling_interval_s;
        rec.server_id = server;
        rec.rel_err = state.history().back();
        rec.event = ev;
        lines += monitor::to_jsonl(rec) + "\n";
    }
    const fs::path dir = prepare_out_dir(g);
    write_text(dir / "monitor_events.jsonl", lines);
    out << "ok " << counts[monitor::Event::Ok] << ", degraded " << counts[monitor::Event::Degraded] << ", reselect "
        << counts[monitor::Event::Reselect] << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power disaggregation toolkit for multi-tenant servers", "wattscope"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with flag values (flags on the command line win)");

    Globals g;
    app.add_option("--seed", g.seed, "Seed for generation, training and experiments")->capture_default_str();
    app.add_option("--cap-w", g.cap_w, "Per-job power cap in watts")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--interval-s", g.interval_s, "Sampling interval in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "Directory for all outputs");

    SynthesizeArgs syn;
    auto* c_syn = app.add_subcommand("synthesize", "Build a server trace from job specs or usage data");
    auto* o_spec = c_syn->add_option("--spec", syn.spec, "JSON file describing synthetic jobs")->check(CLI::ExistingFile);
    auto* o_usage = c_syn->add_option("--usage", syn.usage, "UsageCsv file (timestamp,job_id,cpu_util,mem_gb)")
                        ->check(CLI::ExistingFile);
    o_spec->excludes(o_usage);
    c_syn->add_option("--curve", syn.curve, "JSON power curve (default: reference server)")->check(CLI::ExistingFile);
    c_syn->add_option("--policy", syn.policy, "Baseload attribution for usage input")
        ->check(CLI::IsMember({"proportional", "equal_share"}))
        ->capture_default_str();
    c_syn->add_option("--length", syn.length, "Samples per job for --spec (default from the spec, else 2016)");
    c_syn->add_option("--server-id", syn.server_id, "Server identifier");
    c_syn->add_flag("--jitter", syn.jitter, "Add seeded measurement noise when converting usage to power");

    std::string char_trace;
    auto* c_char = app.add_subcommand("characterize", "Profile variability, regularity and intensity");
    c_char->add_option("--trace", char_trace, "Trace directory or PowerCsv file")->required()->check(CLI::ExistingPath);

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train per-job models and store them in <out-dir>/library");
    c_train->add_option("--trace", tr.trace, "Trace directory with per-job ground truth")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_train->add_option("--job", tr.jobs, "Job to train (repeatable; default all)");
    c_train->add_option("--model-type", tr.model_type, "Model family")
        ->check(CLI::IsMember({"sliding_window", "mean", "co"}))
        ->capture_default_str();
    c_train->add_option("--train-samples", tr.train_samples, "Use only the first N samples (default all)");
    c_train->add_flag("--tag-jobs", tr.tag_jobs, "Store the job id as the model's job tag");
    c_train->add_flag("--overwrite", tr.overwrite, "Replace models stored under an identical key");
    tr.net.add_to(c_train, "desk");

    DisaggArgs da;
    auto* c_dis = app.add_subcommand("disaggregate", "Estimate per-job power from an aggregate series");
    c_dis->add_option("--trace", da.trace, "Trace directory or single-series PowerCsv file")
        ->required()
        ->check(CLI::ExistingPath);
    c_dis->add_option("--library", da.library, "Model library directory")->required()->check(CLI::ExistingDirectory);
    c_dis->add_option("--job", da.jobs, "ID or ID:VARIABILITY:REGULARITY:INTENSITY (repeatable)")->required();
    c_dis->add_option("--model-type", da.model_type, "Model family to select")
        ->check(CLI::IsMember({"sliding_window", "mean", "co"}))
        ->capture_default_str();
    c_dis->add_option("--n-background", da.n_background, "Background job count for selection (default jobs-1)")
        ->check(CLI::NonNegativeNumber);
    c_dis->add_flag("--reconcile", da.reconcile, "Scale estimates so they sum to the meter reading");
    c_dis->add_option("--resample", da.resample, "Average estimates over blocks of N samples")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_dis->add_flag("--tag-jobs", da.tag_jobs, "Prefer models tagged with the same job id");

    EvaluateArgs ev;
    auto* c_eval = app.add_subcommand("evaluate", "Run a seeded experiment scenario and write reports");
    c_eval->add_option("--scenario", ev.scenario, "Scenario name")->required()->check(CLI::IsMember(eval::scenario_names()));
    c_eval->add_option("--units", ev.units, "Servers per bucket")->check(CLI::PositiveNumber);
    c_eval->add_option("--train-samples", ev.train_samples, "Training span in samples")->check(CLI::PositiveNumber);
    c_eval->add_option("--test-samples", ev.test_samples, "Held-out span in samples")->check(CLI::PositiveNumber);
    ev.net.add_to(c_eval, "experiment");

    MonitorArgs mo;
    auto* c_mon = app.add_subcommand("monitor", "Replay estimates against the meter and flag persistent drift");
    c_mon->add_option("--trace", mo.trace, "Trace directory or single-series PowerCsv file")
        ->required()
        ->check(CLI::ExistingPath);
    c_mon->add_option("--estimates", mo.estimates, "PowerCsv of per-job estimates")->required()->check(CLI::ExistingFile);
    c_mon->add_option("--threshold", mo.threshold, "Relative error threshold")
        ->check(CLI::Range(0.0, 10.0))
        ->capture_default_str();
    c_mon->add_option("--persistence", mo.persistence, "Consecutive breaches before reselection")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    c_mon->add_option("--server-id", mo.server_id, "Server id in event records");

    for (auto* sub : {c_syn, c_char, c_train, c_dis, c_eval, c_mon}) sub->fallthrough();

    try {
        app.parse(argc, argv);
        if (c_syn->parsed() && syn.spec.empty() && syn.usage.empty()) {
            throw CLI::RequiredError("synthesize needs --spec or --usage");
        }
        if (g.out_dir.empty()) throw CLI::RequiredError("--out-dir");
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        const CLI::App* sub = nullptr;
        for (const auto* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return kExitUsage;
    }

    try {
        if (c_syn->parsed()) return cmd_synthesize(syn, g, out);
        if (c_char->parsed()) return cmd_characterize(char_trace, g, out);
        if (c_train->parsed()) return cmd_train(tr, g, out);
        if (c_dis->parsed()) return cmd_disaggregate(da, g, out);
        if (c_eval->parsed()) return cmd_evaluate(ev, g, out);
        if (c_mon->parsed()) return cmd_monitor(mo, g, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: cli.Failure: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace wattscope::cli
