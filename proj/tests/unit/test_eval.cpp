#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "wattscope/eval.hpp"
#include "wattscope/util.hpp"

using namespace wattscope;
using namespace wattscope::eval;
using wattscope::testing::error_name;
using wattscope::testing::TempDir;

namespace {

ScenarioConfig tiny(const std::string& scenario) {
    ScenarioConfig c;
    c.scenario = scenario;
    c.seed = 3;
    c.units_per_bucket = 1;
    c.background_jobs = 2;
    c.train_samples = 600;
    c.test_samples = 200;
    c.network.epochs = 1;
    c.network.window = 10;
    c.scalability_n = {2, 3};
    c.robustness_sizes = {300, 600};
    return c;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("mae and nmae hand values") {
    const std::vector<double> pred{10, 20};
    const std::vector<double> truth{12, 16};
    CHECK(mae(pred, truth) == 3.0);
    CHECK(mae(truth, truth) == 0.0);
    CHECK(nmae(truth, truth) == 0.0);
    CHECK(nmae(std::vector<double>{0, 0}, std::vector<double>{10, 10}) == 1.0);
    // An MAE of 3.76 W on a job averaging 18.0 W is about 20.9%.
    const std::vector<double> job_truth{18.0, 18.0};
    const std::vector<double> job_pred{21.76, 14.24};
    CHECK(nmae(job_pred, job_truth) == doctest::Approx(0.2087).epsilon(0.002));
}

TEST_CASE("metric errors") {
    CHECK(error_name([] { mae(std::vector<double>{1}, std::vector<double>{1, 2}); }) == "eval.LengthMismatch");
    CHECK(error_name([] { mae(std::vector<double>{}, std::vector<double>{}); }) == "eval.LengthMismatch");
    CHECK(error_name([] { nmae(std::vector<double>{1, 1}, std::vector<double>{0, 0}); }) == "eval.ZeroMeanTruth");
}

TEST_CASE("nmae times mean truth equals mae") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 200.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t T = 1 + rng() % 300;
        std::vector<double> p(T), t(T);
        for (std::size_t i = 0; i < T; ++i) {
            p[i] = u(rng);
            t[i] = u(rng) + 1.0;
        }
        const double m = mae(p, t);
        CHECK(m >= 0.0);
        CHECK(std::abs(nmae(p, t) * mean_of(t) - m) <= 1e-9 * m);
    }
}

TEST_CASE("reports aggregate the per-job estimates") {
    const std::map<std::string, std::vector<double>> pred{{"a", {10, 10}}, {"b", {5, 15}}};
    const std::map<std::string, std::vector<double>> truth{{"a", {12, 8}}, {"b", {5, 10}}};
    const std::vector<double> agg{17, 18};
    const auto r = make_report("s", "u0/x", pred, truth, agg);
    CHECK(r.per_job.at("a").mae_w == 2.0);
    CHECK(r.per_job.at("b").nmae == doctest::Approx(2.5 / 7.5));
    REQUIRE(r.aggregate_mae_w.has_value());
    CHECK(*r.aggregate_mae_w == doctest::Approx((2.0 + 7.0) / 2.0));
    CHECK(*r.aggregate_nmae == doctest::Approx(4.5 / 17.5));
    CHECK_FALSE(make_report("s", "x", pred, truth).aggregate_nmae.has_value());
}

TEST_CASE("bucket statistics") {
    const std::vector<double> v{0.1, 0.2, 0.3, 0.4, 0.5};
    const auto b = bucket_stat("k", v);
    CHECK(b.mean_nmae == doctest::Approx(0.3));
    CHECK(b.p5 == doctest::Approx(0.12));
    CHECK(b.p95 == doctest::Approx(0.48));
    CHECK(b.n_jobs == 5);
    CHECK(bucket_stat("empty", {}).n_jobs == 0);
}

TEST_CASE("scenario config JSON keeps defaults for missing fields") {
    const auto c = tiny("robustness");
    const nlohmann::json j = c;
    const auto back = j.get<ScenarioConfig>();
    CHECK(back.robustness_sizes == c.robustness_sizes);
    CHECK(back.network == c.network);
    const auto partial = nlohmann::json{{"scenario", "scalability"}}.get<ScenarioConfig>();
    CHECK(partial.train_samples == ScenarioConfig{}.train_samples);
    CHECK(partial.scenario == "scalability");
}

TEST_CASE("every scenario runs at toy scale and is reproducible") {
    for (const auto& name : scenario_names()) {
        CAPTURE(name);
        const auto r = run_experiment(tiny(name));
        CHECK_FALSE(r.outcomes.empty());
        CHECK_FALSE(r.buckets.empty());
        for (const auto& o : r.outcomes) {
            CHECK(o.nmae_model >= 0.0);
            CHECK(o.nmae_mean >= 0.0);
        }
        std::size_t counted = 0;
        for (const auto& b : r.buckets) counted += b.n_jobs;
        CHECK(counted > 0);
        const auto csv = buckets_csv(r);
        CHECK(csv.rfind("bucket,mean_nmae,p5,p95,n_jobs\n", 0) == 0);
    }
    const auto a = run_experiment(tiny("table1_style"));
    const auto b = run_experiment(tiny("table1_style"));
    CHECK(summary_json(a).dump() == summary_json(b).dump());
    CHECK(buckets_csv(a) == buckets_csv(b));
    CHECK(a.find_bucket("mean") != nullptr);
    CHECK(a.find_bucket("sliding_window") != nullptr);
    for (const auto& rep : a.reports) {
        if (rep.label.ends_with("sliding_window")) CHECK(rep.aggregate_nmae.has_value());
    }
}

TEST_CASE("unknown scenarios and bad settings are reported") {
    CHECK(error_name([] { run_experiment(tiny("nope")); }) == "eval.UnknownScenario");
    auto c = tiny("variability_sweep");
    c.units_per_bucket = 0;
    CHECK(error_name([&] { run_experiment(c); }) == "eval.InvalidConfig");
}

TEST_CASE("reports are written under the output directory") {
    TempDir dir;
    const auto r = run_experiment(tiny("generalization"));
    write_reports(r, dir.path());
    CHECK(std::filesystem::exists(dir / "generalization_summary.json"));
    std::ifstream csv(dir / "generalization_buckets.csv");
    std::stringstream buf;
    buf << csv.rdbuf();
    CHECK(buf.str() == buckets_csv(r));
    std::ifstream js(dir / "generalization_summary.json");
    CHECK_NOTHROW((void)nlohmann::json::parse(js));
}

}  // TEST_SUITE
