#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nn_oracle.hpp"
#include "wattscope/baselines.hpp"
#include "wattscope/characterize.hpp"
#include "wattscope/eval.hpp"
#include "wattscope/monitor.hpp"
#include "wattscope/nn/inference.hpp"
#include "wattscope/nn/model.hpp"
#include "wattscope/nn/network.hpp"
#include "wattscope/nn/train.hpp"
#include "wattscope/powermodel.hpp"
#include "wattscope/trace.hpp"
#include "wattscope/util.hpp"

using namespace wattscope;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    return ss.str();
}

// ------------------------------------------------------------------ 1

Verdict conservation() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int servers = 0;
    for (int s = 0; s < 40; ++s) {
        const int n_jobs = 1 + static_cast<int>(rng() % 8);
        const std::size_t T = 288 + rng() % 600;
        std::vector<trace::JobSeries> jobs;
        const bool usage = s % 2 == 0;
        for (int j = 0; j < n_jobs; ++j) {
            if (usage) {
                trace::JobSeries js;
                js.job_id = "j" + std::to_string(j);
                for (std::size_t t = 0; t < T; ++t) {
                    js.cpu_util.push_back(u(rng));
                    js.mem_gb.push_back(8.0 * u(rng));
                }
                jobs.push_back(std::move(js));
            } else {
                trace::SyntheticJobSpec spec;
                spec.job_id = "j" + std::to_string(j);
                spec.mean_power_w = 10.0 + 100.0 * u(rng);
                spec.target_cov = std::min(0.8, trace::max_feasible_cov(spec.mean_power_w, spec.cap_w) * 0.9) * u(rng);
                if (rng() % 2) spec.period_samples = 48 + static_cast<int>(rng() % 240);
                spec.period_score_target = u(rng);
                spec.noise_seed = rng();
                jobs.push_back(trace::generate_synthetic_job(spec, T));
            }
        }
        trace::SynthesisOptions opt;
        opt.policy = s % 4 < 2 ? trace::BaseloadPolicy::Proportional : trace::BaseloadPolicy::EqualShare;
        if (s % 3 == 0) opt.noise_seed = rng();
        const auto st = trace::synthesize_server(std::move(jobs), powermodel::reference_curve(), opt);
        worst = std::max(worst, trace::conservation_error(st));
        ++servers;
    }
    return {worst <= 1e-9, "worst relative error " + fmt(worst) + " over " + std::to_string(servers) + " servers"};
}

// ------------------------------------------------------------------ 2

Verdict gradient_oracle() {
    double worst = 0.0;
    bool pass = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = testing::small_config(seed);
        const auto r = nn::grad_check(c, testing::random_sample(c, seed, 5, false));
        worst = std::max(worst, r.max_relative_error);
        pass = pass && r.max_relative_error < 1e-4;
    }
    return {pass, "max relative error " + fmt(worst) + " over seeds 1-5"};
}

// ------------------------------------------------------------------ 3

Verdict forward_oracle() {
    const auto c = testing::tiny_config();
    const nn::SlidingWindowNet net(c);
    const auto params = testing::hand_params(c);
    std::mt19937_64 rng(33);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(static_cast<std::size_t>(c.window));
        for (auto& v : x) v = g(rng);
        worst = std::max(worst, std::abs(net.infer(params, x) - testing::scalar_forward(c, x)));
    }
    return {worst <= 1e-10, "max abs difference " + fmt(worst) + " over 50 windows"};
}

// ------------------------------------------------------------------ 4

// Also counts how many combinations reach the optimal distance.
std::vector<double> brute_force(const std::vector<std::vector<double>>& states, double p, int& optimal) {
    const std::size_t n = states.size();
    std::vector<std::size_t> digit(n, 0);
    std::vector<double> best;
    double best_cost = std::numeric_limits<double>::infinity();
    double best_sum = 0.0;
    while (true) {
        std::vector<double> values(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = states[i][digit[i]];
            sum += values[i];
        }
        const double cost = std::abs(p - sum);
        if (best.empty() || cost < best_cost) optimal = 0;
        if (best.empty() || cost <= best_cost) ++optimal;
        if (best.empty() || cost < best_cost || (cost == best_cost && sum < best_sum) ||
            (cost == best_cost && sum == best_sum && values < best)) {
            best = values;
            best_cost = cost;
            best_sum = sum;
        }
        std::size_t i = n;
        while (true) {
            if (i == 0) return best;
            --i;
            if (++digit[i] < states[i].size()) break;
            digit[i] = 0;
        }
    }
}

Verdict co_oracle() {
    std::mt19937_64 rng(4040);
    int mismatches = 0;
    int ties = 0;
    for (int instance = 0; instance < 200; ++instance) {
        baselines::CoModel m;
        std::size_t space = 1;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int j = 0; j < n; ++j) {
            const int K = 2 + static_cast<int>(rng() % 5);
            if (space * static_cast<std::size_t>(K) > 10000) break;
            space *= static_cast<std::size_t>(K);
            std::vector<double> s;
            for (int k = 0; k < K; ++k) s.push_back(0.5 * static_cast<double>(rng() % 60));
            std::sort(s.begin(), s.end());
            m.job_ids.push_back("j" + std::to_string(j));
            m.job_states.push_back(s);
        }
        std::vector<double> agg;
        for (int t = 0; t < 20; ++t) agg.push_back(0.25 * static_cast<double>(rng() % 600));
        const auto got = baselines::co_predict(m, agg, baselines::CoMode::Exhaustive);
        for (std::size_t t = 0; t < agg.size(); ++t) {
            std::vector<double> col;
            for (const auto& s : got) col.push_back(s[t]);
            int optimal = 0;
            const auto want = brute_force(m.job_states, agg[t], optimal);
            if (col != want) ++mismatches;
            if (optimal > 1) ++ties;
        }
    }
    return {mismatches == 0,
            std::to_string(mismatches) + " mismatches on 4000 timesteps, " + std::to_string(ties) +
                " with tied optima"};
}

// ------------------------------------------------------------------ 5, 6

struct Table1Seed {
    bool beats_mean = false;
    bool aggregate_ok = false;
    bool accuracy_ok = false;
    int accuracy_jobs = 0;
    double agg_model = 0.0;
    double agg_mean = 0.0;
};

std::vector<Table1Seed> table1_runs() {
    std::vector<Table1Seed> out;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        eval::ScenarioConfig c;
        c.scenario = "table1_style";
        c.seed = seed;
        const auto r = eval::run_experiment(c);
        Table1Seed s;
        s.beats_mean = true;
        s.accuracy_ok = true;
        for (const auto& o : r.outcomes) {
            if (o.cls.regularity != characterize::Level::Low && !(o.nmae_model < o.nmae_mean)) s.beats_mean = false;
            if (o.cov < 0.2 && o.period_score > 0.5) {
                ++s.accuracy_jobs;
                if (!(o.nmae_model < 0.15)) s.accuracy_ok = false;
            }
            std::printf("  seed %llu %s cov %.2f score %.2f reg %s: model %.3f mean %.3f co %.3f\n",
                        static_cast<unsigned long long>(seed), o.job_id.c_str(), o.cov, o.period_score,
                        characterize::to_string(o.cls.regularity), o.nmae_model, o.nmae_mean,
                        o.nmae_co.value_or(std::nan("")));
        }
        for (const auto& rep : r.reports) {
            if (!rep.aggregate_nmae) continue;
            if (rep.label.ends_with("/sliding_window")) s.agg_model = *rep.aggregate_nmae;
            if (rep.label.ends_with("/mean")) s.agg_mean = *rep.aggregate_nmae;
        }
        s.aggregate_ok = s.agg_model <= 0.8 * s.agg_mean;
        std::printf("  seed %llu aggregate: model %.3f mean %.3f\n", static_cast<unsigned long long>(seed),
                    s.agg_model, s.agg_mean);
        std::fflush(stdout);
        out.push_back(s);
    }
    return out;
}

Verdict beats_mean(const std::vector<Table1Seed>& runs) {
    int ok = 0;
    std::string per_seed;
    for (const auto& s : runs) {
        const bool pass = s.beats_mean && s.aggregate_ok;
        ok += pass;
        per_seed += (pass ? "P" : "F");
    }
    return {ok >= 4, std::to_string(ok) + "/5 seeds pass (" + per_seed + ")"};
}

Verdict accuracy_target(const std::vector<Table1Seed>& runs) {
    int ok = 0;
    int jobs = 0;
    for (const auto& s : runs) {
        ok += s.accuracy_ok && s.accuracy_jobs > 0;
        jobs += s.accuracy_jobs;
    }
    return {ok >= 4, std::to_string(ok) + "/5 seeds pass, " + std::to_string(jobs) + " qualifying jobs"};
}

// ------------------------------------------------------------------ 7, 8, 9

void print_buckets(const eval::ExperimentResult& r) {
    for (const auto& b : r.buckets) {
        std::printf("  %s mean %.4f p5 %.4f p95 %.4f n %zu\n", b.bucket.c_str(), b.mean_nmae, b.p5, b.p95, b.n_jobs);
    }
    std::fflush(stdout);
}

Verdict variability_monotone() {
    eval::ScenarioConfig c;
    c.scenario = "variability_sweep";
    const auto r = eval::run_experiment(c);
    print_buckets(r);
    bool pass = r.buckets.size() == 3;
    for (std::size_t i = 0; pass && i + 1 < r.buckets.size(); ++i) {
        if (r.buckets[i + 1].mean_nmae < r.buckets[i].p5) pass = false;
    }
    std::string detail = "bucket means";
    for (const auto& b : r.buckets) detail += " " + fmt(b.mean_nmae, 3);
    return {pass, detail};
}

Verdict scalability_trend() {
    eval::ScenarioConfig c;
    c.scenario = "scalability";
    const auto r = eval::run_experiment(c);
    print_buckets(r);
    const auto* n5 = r.find_bucket("n=5");
    const auto* n20 = r.find_bucket("n=20");
    if (!n5 || !n20) return {false, "missing n=5 or n=20 bucket"};
    return {n20->mean_nmae <= n5->mean_nmae + 0.02,
            "NMAE(5) " + fmt(n5->mean_nmae, 3) + ", NMAE(20) " + fmt(n20->mean_nmae, 3)};
}

Verdict robustness_knee() {
    eval::ScenarioConfig c;
    c.scenario = "robustness";
    const auto r = eval::run_experiment(c);
    print_buckets(r);
    const auto* a = r.find_bucket("train=1500");
    const auto* b = r.find_bucket("train=4000");
    if (!a || !b) return {false, "missing train=1500 or train=4000 bucket"};
    return {std::abs(a->mean_nmae - b->mean_nmae) <= 0.015,
            "NMAE(1500) " + fmt(a->mean_nmae, 3) + ", NMAE(4000) " + fmt(b->mean_nmae, 3)};
}

// ------------------------------------------------------------------ 10

std::vector<double> square_wave(std::size_t T, int period, double lo, double hi) {
    std::vector<double> s(T);
    for (std::size_t t = 0; t < T; ++t) s[t] = (t % static_cast<std::size_t>(period)) < static_cast<std::size_t>(period) / 2 ? hi : lo;
    return s;
}

Verdict period_suite() {
    const std::size_t T = 288 * 10;
    const double amp = 100.0;
    const auto clean = square_wave(T, 288, 50.0, 50.0 + amp);
    const auto found = characterize::detect_periods(clean);
    const bool clean_ok = !found.empty() && std::abs(found.front().period_samples - 288) <= 2 && found.front().score > 0.8;

    int quiet = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g(100.0, 20.0);
        std::vector<double> s(T);
        for (auto& v : s) v = g(rng);
        quiet += characterize::detect_periods(s).empty();
    }

    std::vector<double> scores;
    for (double frac : {0.0, 0.25, 0.5}) {
        std::mt19937_64 rng(77);
        std::normal_distribution<double> g(0.0, frac * amp);
        auto s = clean;
        if (frac > 0.0) {
            for (auto& v : s) v += g(rng);
        }
        const auto p = characterize::detect_periods(s);
        double score = 0.0;
        for (const auto& e : p) {
            if (std::abs(e.period_samples - 288) <= 2) score = std::max(score, e.score);
        }
        scores.push_back(score);
    }
    const bool falling = scores[0] > scores[1] && scores[1] > scores[2];
    std::string detail = "clean " + (found.empty() ? std::string("none") : std::to_string(found.front().period_samples) +
                                                                              " score " + fmt(found.front().score, 3));
    detail += ", noise quiet " + std::to_string(quiet) + "/20, scores " + fmt(scores[0], 3) + " > " + fmt(scores[1], 3) +
              " > " + fmt(scores[2], 3);
    return {clean_ok && quiet >= 18 && falling, detail};
}

// ------------------------------------------------------------------ 11

Verdict latency() {
    const auto c = nn::full_config();
    const nn::SlidingWindowNet net(c);
    nn::TrainedModel model;
    model.config = c;
    model.weights = net.initialize(derive_seed(c.seed, 1));
    model.input_mean = 100.0;
    model.input_std = 30.0;
    nn::Predictor pred(model);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(50.0, 250.0);
    std::vector<double> window(static_cast<std::size_t>(c.window));
    for (auto& v : window) v = u(rng);
    volatile double sink = 0.0;
    for (int i = 0; i < 50; ++i) sink = sink + pred.predict(window);
    std::vector<double> us;
    for (int i = 0; i < 1000; ++i) {
        window[static_cast<std::size_t>(i) % window.size()] = u(rng);
        const auto t0 = std::chrono::steady_clock::now();
        sink = sink + pred.predict(window);
        const auto t1 = std::chrono::steady_clock::now();
        us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    std::nth_element(us.begin(), us.begin() + 500, us.end());
    const double median = us[500];
    return {median < 1000.0, "median " + fmt(median, 4) + " us over 1000 calls (w=" + std::to_string(c.window) + ")"};
}

// ------------------------------------------------------------------ 12

Verdict monitor_exhaustive() {
    long long strings = 0;
    long long failures = 0;
    for (int persistence = 1; persistence <= 16; ++persistence) {
        for (int len = 0; len <= 16; ++len) {
            for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
                monitor::MonitorState s(monitor::MonitorConfig{0.1, persistence, 288});
                int run = 0;
                int longest = 0;
                bool fired = false;
                for (int i = 0; i < len; ++i) {
                    const bool breach = (bits >> i) & 1u;
                    run = breach ? run + 1 : 0;
                    longest = std::max(longest, run);
                    const auto e = s.observe_error(breach ? 0.5 : 0.01);
                    if (e == monitor::Event::Reselect) fired = true;
                    if ((e == monitor::Event::Ok) == breach) ++failures;
                }
                if (fired != (longest >= persistence)) ++failures;
                ++strings;
            }
        }
    }
    return {failures == 0, std::to_string(strings) + " strings checked, " + std::to_string(failures) + " failures"};
}

// ------------------------------------------------------------------ 13

Verdict metric_identities() {
    std::mt19937_64 rng(1313);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_nmae = 0.0;
    double worst_mad = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t T = 10 + rng() % 500;
        const double scale = 1.0 + 200.0 * u(rng);
        std::vector<double> truth(T), pred(T);
        for (std::size_t t = 0; t < T; ++t) {
            truth[t] = scale * u(rng);
            pred[t] = scale * u(rng);
        }
        const double m = mean_of(truth);
        const double mae = eval::mae(pred, truth);
        worst_nmae = std::max(worst_nmae, std::abs(eval::nmae(pred, truth) * m - mae) / mae);

        const auto model = baselines::mean_fit({{"j", truth}});
        const auto flat = baselines::mean_predict(model, "j", T);
        double mad = 0.0;
        for (double v : truth) mad += std::abs(v - m);
        mad /= static_cast<double>(T);
        worst_mad = std::max(worst_mad, std::abs(eval::mae(flat, truth) - mad) / mad);
    }
    return {worst_nmae <= 1e-9 && worst_mad <= 1e-9,
            "nmae identity " + fmt(worst_nmae) + ", mean-model MAD " + fmt(worst_mad)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const auto wanted = [&](int k) { return only.empty() || only.contains(k); };

    std::vector<std::pair<int, std::string>> lines;
    int failed = 0;
    const auto record = [&](int k, const char* name, const std::function<Verdict()>& f) {
        if (!wanted(k)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = f();
        } catch (const std::exception& e) {
            v = {false, std::string("threw ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char buf[1024];
        std::snprintf(buf, sizeof buf, "%s criterion %d (%s): %s [%.1fs]", v.pass ? "PASS" : "FAIL", k, name,
                      v.detail.c_str(), secs);
        std::printf("%s\n", buf);
        std::fflush(stdout);
        lines.emplace_back(k, buf);
        failed += !v.pass;
    };

    record(1, "conservation", conservation);
    record(2, "gradient oracle", gradient_oracle);
    record(3, "forward oracle", forward_oracle);
    record(4, "CO oracle", co_oracle);
    std::optional<std::vector<Table1Seed>> runs;
    const auto table1 = [&]() -> const std::vector<Table1Seed>& {
        if (!runs) runs = table1_runs();
        return *runs;
    };
    record(5, "beats mean", [&] { return beats_mean(table1()); });
    record(6, "accuracy target", [&] { return accuracy_target(table1()); });
    record(7, "variability monotonicity", variability_monotone);
    record(8, "scalability trend", scalability_trend);
    record(9, "robustness knee", robustness_knee);
    record(10, "period detection", period_suite);
    record(11, "latency", latency);
    record(12, "monitor state machine", monitor_exhaustive);
    record(13, "MAE/NMAE identities", metric_identities);

    std::printf("\nsummary\n");
    for (const auto& [k, line] : lines) std::printf("%s\n", line.c_str());
    return failed == 0 ? 0 : 1;
}
