#include "wattscope/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"
#include "wattscope/util.hpp"

namespace wattscope::trace {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("trace", kind, detail);
}

constexpr const char* kUsageHeader = "timestamp,job_id,cpu_util,mem_gb";
constexpr const char* kPowerHeader = "timestamp,job_id,power_w";
// More gap intervals than this fraction means the series is not sampled at a
// fixed interval at all.
constexpr double kMaxGapFraction = 0.25;

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

struct Row {
    std::int64_t ts;
    double a;
    double b;
};

}  // namespace

std::size_t JobSeries::length() const noexcept {
    return std::max({cpu_util.size(), mem_gb.size(), power_w.size()});
}

const char* to_string(BaseloadPolicy p) noexcept {
    return p == BaseloadPolicy::Proportional ? "proportional" : "equal_share";
}

BaseloadPolicy baseload_policy_from_string(const std::string& s) {
    if (s == "proportional") return BaseloadPolicy::Proportional;
    if (s == "equal_share") return BaseloadPolicy::EqualShare;
    fail("MalformedRow", "unknown baseload policy '" + s + "'");
}

const JobSeries* ServerTrace::find_job(const std::string& job_id) const noexcept {
    for (const auto& j : jobs) {
        if (j.job_id == job_id) return &j;
    }
    return nullptr;
}

std::vector<JobSeries> parse_job_trace(std::istream& in, TraceFormat format) {
    const bool usage = format == TraceFormat::UsageCsv;
    const std::size_t n_fields = usage ? 4 : 3;

    std::string line;
    if (!std::getline(in, line)) fail("MalformedRow", "empty input, expected a header");
    const std::string header = trim(line);
    if (header != (usage ? kUsageHeader : kPowerHeader)) {
        fail("MalformedRow", "line 1: unexpected header '" + header + "'");
    }

    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty()) continue;
        const auto fields = split_commas(text);
        const std::string where = "line " + std::to_string(line_no);
        if (fields.size() != n_fields) {
            fail("MalformedRow", where + ": expected " + std::to_string(n_fields) + " fields, got " +
                                     std::to_string(fields.size()));
        }
        const auto ts = parse_int(fields[0]);
        if (!ts) fail("MalformedRow", where + ": bad timestamp");
        std::string job_id = trim(fields[1]);
        if (job_id.empty()) fail("MalformedRow", where + ": empty job_id");
        const auto a = parse_double(fields[2]);
        if (!a || !std::isfinite(*a)) fail("MalformedRow", where + ": bad numeric field");
        double b = 0.0;
        if (usage) {
            const auto parsed = parse_double(fields[3]);
            if (!parsed || !std::isfinite(*parsed)) fail("MalformedRow", where + ": bad numeric field");
            b = *parsed;
            if (*a < 0.0 || *a > 1.0) fail("MalformedRow", where + ": cpu_util outside [0,1]");
            if (b < 0.0) fail("MalformedRow", where + ": negative mem_gb");
        } else if (*a < 0.0) {
            fail("MalformedRow", where + ": negative power_w");
        }
        auto [it, inserted] = rows.try_emplace(job_id);
        if (inserted) order.push_back(job_id);
        it->second.push_back(Row{*ts, *a, b});
    }

    std::vector<JobSeries> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& r = rows[id];
        std::stable_sort(r.begin(), r.end(), [](const Row& x, const Row& y) { return x.ts < y.ts; });

        std::int64_t step = kDefaultIntervalS;
        if (r.size() > 1) {
            step = std::numeric_limits<std::int64_t>::max();
            for (std::size_t i = 1; i < r.size(); ++i) {
                const auto d = r[i].ts - r[i - 1].ts;
                if (d <= 0) fail("IrregularInterval", "job " + id + ": repeated timestamp " + std::to_string(r[i].ts));
                step = std::min(step, d);
            }
        }

        std::size_t gap_intervals = 0;
        for (std::size_t i = 1; i < r.size(); ++i) {
            const auto d = r[i].ts - r[i - 1].ts;
            if (d % step != 0) {
                fail("IrregularInterval", "job " + id + ": interval " + std::to_string(d) +
                                              "s is not a multiple of " + std::to_string(step) + "s");
            }
            const auto missing = d / step - 1;
            if (missing > kMaxFilledGap) {
                fail("GapTooLong", "job " + id + ": " + std::to_string(missing) + " missing samples after t=" +
                                       std::to_string(r[i - 1].ts));
            }
            if (missing > 0) ++gap_intervals;
        }
        if (r.size() > 1 &&
            static_cast<double>(gap_intervals) > kMaxGapFraction * static_cast<double>(r.size() - 1)) {
            fail("IrregularInterval", "job " + id + ": sampling interval is not constant");
        }

        JobSeries js;
        js.job_id = id;
        js.sampling_interval_s = static_cast<int>(step);
        js.start_timestamp = r.front().ts;
        auto push = [&](const Row& row) {
            if (usage) {
                js.cpu_util.push_back(row.a);
                js.mem_gb.push_back(row.b);
            } else {
                js.power_w.push_back(row.a);
            }
        };
        push(r.front());
        for (std::size_t i = 1; i < r.size(); ++i) {
            const auto missing = (r[i].ts - r[i - 1].ts) / step - 1;
            for (std::int64_t k = 0; k < missing; ++k) push(r[i - 1]);
            push(r[i]);
        }
        out.push_back(std::move(js));
    }
    return out;
}

void write_job_trace(std::ostream& out, const std::vector<JobSeries>& jobs, TraceFormat format) {
    const bool usage = format == TraceFormat::UsageCsv;
    out << (usage ? kUsageHeader : kPowerHeader) << '\n';
    for (const auto& j : jobs) {
        const std::size_t n = usage ? j.cpu_util.size() : j.power_w.size();
        for (std::size_t t = 0; t < n; ++t) {
            out << j.start_timestamp + static_cast<std::int64_t>(t) * j.sampling_interval_s << ',' << j.job_id
                << ',';
            if (usage) {
                out << format_double(j.cpu_util[t]) << ',' << format_double(j.mem_gb[t]);
            } else {
                out << format_double(j.power_w[t]);
            }
            out << '\n';
        }
    }
}

double max_feasible_cov(double mean_w, double cap_w) noexcept {
    if (mean_w <= 0.0 || mean_w >= cap_w) return 0.0;
    // The two-point distribution on {0, cap} maximizes variance for a fixed mean.
    return std::sqrt(mean_w * (cap_w - mean_w)) / mean_w;
}

namespace {

void standardize(std::vector<double>& v) {
    const double m = mean_of(v);
    const double sd = std::sqrt(variance_of(v));
    for (double& x : v) x = sd > 0.0 ? (x - m) / sd : 0.0;
}

double cov_unchecked(const std::vector<double>& v) {
    const double m = mean_of(v);
    return m > 0.0 ? std::sqrt(variance_of(v)) / m : 0.0;
}

// Clipped series c + scale*z with c chosen so the mean equals target_mean.
std::vector<double> shaped(const std::vector<double>& z, double scale, double target_mean, double cap) {
    double zmax = 0.0;
    for (double x : z) zmax = std::max(zmax, std::abs(x));
    double lo = target_mean - scale * zmax - cap;
    double hi = target_mean + scale * zmax + cap;
    std::vector<double> x(z.size());
    auto fill = [&](double c) {
        double s = 0.0;
        for (std::size_t t = 0; t < z.size(); ++t) {
            x[t] = std::clamp(c + scale * z[t], 0.0, cap);
            s += x[t];
        }
        return s / static_cast<double>(z.size());
    };
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (fill(mid) < target_mean) lo = mid; else hi = mid;
    }
    fill(0.5 * (lo + hi));
    return x;
}

}  // namespace

JobSeries generate_synthetic_job(const SyntheticJobSpec& spec, std::size_t length) {
    if (length == 0) fail("InfeasibleSpec", "length must be positive");
    if (!(spec.cap_w > 0.0)) fail("InfeasibleSpec", "cap must be positive");
    if (!(spec.mean_power_w >= 0.0) || spec.mean_power_w > spec.cap_w) {
        fail("InfeasibleSpec", "mean power must lie in [0, cap]");
    }
    if (!(spec.target_cov >= 0.0)) fail("InfeasibleSpec", "target CoV must be non-negative");
    if (!(spec.period_score_target >= 0.0 && spec.period_score_target < 1.0)) {
        fail("InfeasibleSpec", "period score target must lie in [0,1)");
    }
    if (spec.period_samples) {
        if (*spec.period_samples < 2) fail("InfeasibleSpec", "period must be at least 2 samples");
        if (length < 2 * static_cast<std::size_t>(*spec.period_samples)) {
            fail("InfeasibleSpec", "series must span at least two periods");
        }
    }

    JobSeries js;
    js.job_id = spec.job_id;
    js.sampling_interval_s = spec.sampling_interval_s;

    if (spec.target_cov == 0.0 || length < 2) {
        js.power_w.assign(length, spec.mean_power_w);
        return js;
    }
    if (spec.target_cov > max_feasible_cov(spec.mean_power_w, spec.cap_w)) {
        fail("InfeasibleSpec", "CoV " + format_double(spec.target_cov) + " unreachable at mean " +
                                   format_double(spec.mean_power_w) + "W under cap " + format_double(spec.cap_w) +
                                   "W (max " + format_double(max_feasible_cov(spec.mean_power_w, spec.cap_w)) + ")");
    }

    std::mt19937_64 rng(spec.noise_seed);
    std::vector<double> noise(length);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& x : noise) x = gauss(rng);
    standardize(noise);

    std::vector<double> z(length);
    if (spec.period_samples && spec.period_score_target > 0.0) {
        const int p = *spec.period_samples;
        std::uniform_int_distribution<int> phase_dist(0, p - 1);
        const int phase = phase_dist(rng);
        std::vector<double> tmpl(length);
        for (std::size_t t = 0; t < length; ++t) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>((t + phase) % p) / p;
            tmpl[t] = spec.shape == TemplateShape::Sine ? std::sin(angle)
                                                        : (((t + phase) % p) < static_cast<std::size_t>(p) / 2 ? 1.0 : -1.0);
        }
        standardize(tmpl);
        const double ws = std::sqrt(spec.period_score_target);
        const double wn = std::sqrt(1.0 - spec.period_score_target);
        for (std::size_t t = 0; t < length; ++t) z[t] = ws * tmpl[t] + wn * noise[t];
    } else {
        z = noise;
    }

    const double target = spec.target_cov;
    double lo = 0.0;
    double hi = spec.target_cov * spec.mean_power_w;
    while (cov_unchecked(shaped(z, hi, spec.mean_power_w, spec.cap_w)) < target) {
        hi *= 2.0;
        if (hi > 1e6 * spec.cap_w) break;
    }
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cov_unchecked(shaped(z, mid, spec.mean_power_w, spec.cap_w)) < target) lo = mid; else hi = mid;
    }
    js.power_w = shaped(z, 0.5 * (lo + hi), spec.mean_power_w, spec.cap_w);
    const double realized = cov_unchecked(js.power_w);
    if (std::abs(realized - target) > kCovTolerance) {
        fail("InfeasibleSpec", "realized CoV " + format_double(realized) + " misses target " + format_double(target));
    }
    return js;
}

ServerTrace synthesize_server(std::vector<JobSeries> jobs, const powermodel::PowerCurve& curve,
                              const SynthesisOptions& options) {
    if (jobs.empty()) fail("LengthMismatch", "a server needs at least one job");
    const std::size_t n = jobs.size();
    const std::size_t T = jobs.front().length();
    const int dt = jobs.front().sampling_interval_s;
    for (const auto& j : jobs) {
        if (j.sampling_interval_s != dt) fail("LengthMismatch", "job " + j.job_id + " has a different interval");
        if (j.length() != T || T == 0) fail("LengthMismatch", "job " + j.job_id + " has a different length");
        if (j.has_usage() && (j.cpu_util.size() != T || j.mem_gb.size() != T)) {
            fail("LengthMismatch", "job " + j.job_id + " has ragged usage columns");
        }
        if (j.has_power() && j.power_w.size() != T) fail("LengthMismatch", "job " + j.job_id + " has ragged power");
    }
    const bool all_power = std::all_of(jobs.begin(), jobs.end(), [](const JobSeries& j) { return j.has_power(); });
    const bool all_usage = std::all_of(jobs.begin(), jobs.end(), [](const JobSeries& j) { return j.has_usage(); });
    if (!all_power && !all_usage) fail("MixedInputs", "jobs mix usage-bearing and power-bearing series");

    const double cap = options.per_job_cap_w;
    if (!all_power) {
        if (!(curve.peak_w > 0.0)) fail("MixedInputs", "power curve has no positive peak");
        const double scale = cap / curve.peak_w;
        std::vector<std::vector<double>> idle(n, std::vector<double>(T));
        for (std::size_t i = 0; i < n; ++i) {
            auto& j = jobs[i];
            j.power_w.assign(T, 0.0);
            for (std::size_t t = 0; t < T; ++t) {
                std::optional<std::uint64_t> seed;
                if (options.noise_seed) seed = derive_seed(*options.noise_seed, i, t);
                j.power_w[t] = std::clamp(scale * powermodel::power_of(curve, j.cpu_util[t], j.mem_gb[t], seed), 0.0, cap);
                idle[i][t] = scale * curve.evaluate(0.0, j.mem_gb[t]);
            }
        }
        if (options.policy == BaseloadPolicy::EqualShare) {
            for (std::size_t t = 0; t < T; ++t) {
                double pooled = 0.0;
                for (std::size_t i = 0; i < n; ++i) pooled += idle[i][t];
                const double share = pooled / static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) {
                    jobs[i].power_w[t] = std::clamp(jobs[i].power_w[t] - idle[i][t] + share, 0.0, cap);
                }
            }
        }
    }

    ServerTrace st;
    st.server_id = options.server_id;
    st.per_job_cap_w = cap;
    st.baseload_policy = options.policy;
    st.aggregate_w.assign(T, 0.0);
    for (const auto& j : jobs) {
        for (std::size_t t = 0; t < T; ++t) st.aggregate_w[t] += j.power_w[t];
    }
    st.jobs = std::move(jobs);
    return st;
}

double conservation_error(const ServerTrace& trace) {
    double worst = 0.0;
    for (std::size_t t = 0; t < trace.aggregate_w.size(); ++t) {
        double s = 0.0;
        for (const auto& j : trace.jobs) s += j.power_w.at(t);
        const double denom = std::max(std::abs(trace.aggregate_w[t]), 1e-12);
        worst = std::max(worst, std::abs(trace.aggregate_w[t] - s) / denom);
    }
    return worst;
}

void save_server_trace(const ServerTrace& trace, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["format"] = "wattscope-trace-v1";
    meta["server_id"] = trace.server_id;
    meta["per_job_cap_w"] = trace.per_job_cap_w;
    meta["baseload_policy"] = to_string(trace.baseload_policy);
    meta["sampling_interval_s"] = trace.sampling_interval_s();
    meta["start_timestamp"] = trace.jobs.empty() ? 0 : trace.jobs.front().start_timestamp;
    meta["length"] = trace.length();
    meta["aggregate_file"] = "aggregate.csv";
    auto job_list = nlohmann::json::array();
    for (std::size_t k = 0; k < trace.jobs.size(); ++k) {
        const std::string file = "job_" + std::to_string(k) + ".csv";
        job_list.push_back({{"job_id", trace.jobs[k].job_id}, {"file", file}});
        std::ofstream out(dir / file, std::ios::binary);
        JobSeries power_only = trace.jobs[k];
        power_only.cpu_util.clear();
        power_only.mem_gb.clear();
        write_job_trace(out, {power_only}, TraceFormat::PowerCsv);
        if (!out) fail("IoFailure", "cannot write " + (dir / file).string());
    }
    meta["jobs"] = job_list;

    JobSeries agg;
    agg.job_id = trace.server_id;
    agg.sampling_interval_s = trace.sampling_interval_s();
    agg.start_timestamp = meta["start_timestamp"].get<std::int64_t>();
    agg.power_w = trace.aggregate_w;
    std::ofstream agg_out(dir / "aggregate.csv", std::ios::binary);
    write_job_trace(agg_out, {agg}, TraceFormat::PowerCsv);

    std::ofstream meta_out(dir / "meta.json", std::ios::binary);
    meta_out << meta.dump(2) << '\n';
    if (!meta_out || !agg_out) fail("IoFailure", "cannot write trace directory " + dir.string());
}

namespace {

JobSeries read_single_power_series(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail("IoFailure", "cannot open " + file.string());
    auto series = parse_job_trace(in, TraceFormat::PowerCsv);
    if (series.size() != 1) fail("MalformedRow", file.string() + " must hold exactly one series");
    return std::move(series.front());
}

}  // namespace

ServerTrace load_server_trace(const fs::path& dir) {
    std::ifstream meta_in(dir / "meta.json", std::ios::binary);
    if (!meta_in) fail("IoFailure", "cannot open " + (dir / "meta.json").string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        fail("MalformedRow", std::string("meta.json: ") + e.what());
    }

    ServerTrace st;
    try {
        st.server_id = meta.at("server_id").get<std::string>();
        st.per_job_cap_w = meta.at("per_job_cap_w").get<double>();
        st.baseload_policy = baseload_policy_from_string(meta.at("baseload_policy").get<std::string>());
        for (const auto& entry : meta.at("jobs")) {
            JobSeries js = read_single_power_series(dir / entry.at("file").get<std::string>());
            js.job_id = entry.at("job_id").get<std::string>();
            st.jobs.push_back(std::move(js));
        }
        st.aggregate_w = read_single_power_series(dir / meta.at("aggregate_file").get<std::string>()).power_w;
    } catch (const nlohmann::json::exception& e) {
        fail("MalformedRow", std::string("meta.json: ") + e.what());
    }
    for (const auto& j : st.jobs) {
        if (j.power_w.size() != st.aggregate_w.size()) {
            fail("LengthMismatch", "job " + j.job_id + " length differs from the aggregate");
        }
    }
    return st;
}

}  // namespace wattscope::trace
