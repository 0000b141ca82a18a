#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "wattscope/characterize.hpp"
#include "wattscope/trace.hpp"

using namespace wattscope;
using namespace wattscope::trace;
using wattscope::testing::error_name;
using wattscope::testing::TempDir;

namespace {

std::vector<JobSeries> parse(const std::string& text, TraceFormat f) {
    std::istringstream in(text);
    return parse_job_trace(in, f);
}

}  // namespace

TEST_SUITE("trace") {

TEST_CASE("two-row usage trace echoes its input") {
    const auto jobs = parse("timestamp,job_id,cpu_util,mem_gb\n0,a,0.5,1\n300,a,0.5,1\n", TraceFormat::UsageCsv);
    REQUIRE(jobs.size() == 1);
    CHECK(jobs[0].job_id == "a");
    CHECK(jobs[0].length() == 2);
    CHECK(jobs[0].cpu_util == std::vector<double>{0.5, 0.5});
    CHECK(jobs[0].sampling_interval_s == 300);
}

TEST_CASE("fixture row counts match a shell group-by") {
    std::ifstream csv(WATTSCOPE_FIXTURES "/three_jobs_usage.csv");
    REQUIRE(csv);
    const auto jobs = parse_job_trace(csv, TraceFormat::UsageCsv);

    std::map<std::string, std::size_t> expected;
    std::ifstream counts(WATTSCOPE_FIXTURES "/three_jobs_counts.txt");
    std::string id;
    std::size_t n = 0;
    while (counts >> id >> n) expected[id] = n;
    REQUIRE(expected.size() == 3);

    std::map<std::string, std::size_t> got;
    for (const auto& j : jobs) {
        got[j.job_id] = j.length();
        CHECK(j.mem_gb.size() == j.length());
        CHECK(j.sampling_interval_s == 300);
        CHECK(j.start_timestamp == 1700000000);
    }
    CHECK(got == expected);
}

TEST_CASE("parse rejects malformed and irregular input") {
    const std::string hdr = "timestamp,job_id,power_w\n";
    CHECK(error_name([&] { parse("", TraceFormat::PowerCsv); }) == "trace.MalformedRow");
    CHECK(error_name([&] { parse("time,job,p\n0,a,1\n", TraceFormat::PowerCsv); }) == "trace.MalformedRow");
    CHECK(error_name([&] { parse(hdr + "0,a\n", TraceFormat::PowerCsv); }) == "trace.MalformedRow");
    CHECK(error_name([&] { parse(hdr + "0,a,abc\n", TraceFormat::PowerCsv); }) == "trace.MalformedRow");
    CHECK(error_name([&] { parse(hdr + "0,a,-3\n", TraceFormat::PowerCsv); }) == "trace.MalformedRow");
    CHECK(error_name([&] { parse("timestamp,job_id,cpu_util,mem_gb\n0,a,1.5,1\n", TraceFormat::UsageCsv); }) ==
          "trace.MalformedRow");
    CHECK(error_name([&] { parse(hdr + "0,a,1\n0,a,2\n", TraceFormat::PowerCsv); }) == "trace.IrregularInterval");

    std::string alternating = hdr;
    std::int64_t ts = 0;
    for (int i = 0; i < 20; ++i) {
        alternating += std::to_string(ts) + ",a,10\n";
        ts += (i % 2 == 0) ? 300 : 600;
    }
    CHECK(error_name([&] { parse(alternating, TraceFormat::PowerCsv); }) == "trace.IrregularInterval");
    CHECK(error_name([&] { parse(hdr + "0,a,1\n300,a,1\n750,a,1\n", TraceFormat::PowerCsv); }) ==
          "trace.IrregularInterval");
}

TEST_CASE("short gaps are forward-filled and long gaps rejected") {
    std::string text = "timestamp,job_id,power_w\n";
    for (int t : {0, 1, 2, 3, 7, 8, 9, 10, 11, 12, 13, 14, 15}) text += std::to_string(300 * t) + ",a," + std::to_string(t) + "\n";
    const auto jobs = parse(text, TraceFormat::PowerCsv);
    REQUIRE(jobs[0].length() == 16);
    CHECK(jobs[0].power_w[4] == 3.0);
    CHECK(jobs[0].power_w[6] == 3.0);
    CHECK(jobs[0].power_w[7] == 7.0);

    std::string gap = "timestamp,job_id,power_w\n";
    for (int t : {0, 1, 2, 3, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17}) gap += std::to_string(300 * t) + ",a,1\n";
    CHECK(error_name([&] { parse(gap, TraceFormat::PowerCsv); }) == "trace.GapTooLong");
}

TEST_CASE("unsorted rows are ordered per job") {
    const auto jobs = parse("timestamp,job_id,power_w\n600,a,3\n0,a,1\n300,b,5\n300,a,2\n0,b,4\n", TraceFormat::PowerCsv);
    REQUIRE(jobs.size() == 2);
    CHECK(jobs[0].job_id == "a");
    CHECK(jobs[0].power_w == std::vector<double>{1, 2, 3});
    CHECK(jobs[1].power_w == std::vector<double>{4, 5});
}

TEST_CASE("power CSV round trip preserves sequences exactly") {
    SyntheticJobSpec spec;
    spec.target_cov = 0.3;
    spec.period_samples = 48;
    spec.period_score_target = 0.5;
    spec.mean_power_w = 70.0;
    spec.noise_seed = 17;
    auto a = generate_synthetic_job(spec, 300);
    spec.job_id = "b";
    spec.noise_seed = 18;
    auto b = generate_synthetic_job(spec, 300);
    a.start_timestamp = b.start_timestamp = 1'600'000'000;

    std::stringstream buf;
    write_job_trace(buf, {a, b}, TraceFormat::PowerCsv);
    const auto back = parse_job_trace(buf, TraceFormat::PowerCsv);
    REQUIRE(back.size() == 2);
    CHECK(back[0].power_w == a.power_w);
    CHECK(back[1].power_w == b.power_w);
    CHECK(back[0].start_timestamp == a.start_timestamp);
}

TEST_CASE("synthetic generator hits CoV, keeps bounds and is deterministic") {
    SyntheticJobSpec flat;
    flat.mean_power_w = 50.0;
    const auto c = generate_synthetic_job(flat, 100);
    CHECK(c.power_w == std::vector<double>(100, 50.0));

    SyntheticJobSpec spec;
    spec.target_cov = 0.5;
    spec.period_samples = 288;
    spec.period_score_target = 0.8;
    spec.mean_power_w = 60.0;
    spec.noise_seed = 7;
    const auto s = generate_synthetic_job(spec, 2016);
    const double realized = characterize::cov(s.power_w);
    CHECK(realized >= 0.45);
    CHECK(realized <= 0.55);
    for (double v : s.power_w) {
        CHECK(v >= 0.0);
        CHECK(v <= spec.cap_w);
    }
    const auto periods = characterize::detect_periods(s.power_w);
    REQUIRE_FALSE(periods.empty());
    CHECK(std::abs(periods.front().period_samples - 288) <= 2);

    CHECK(generate_synthetic_job(spec, 2016).power_w == s.power_w);
    spec.noise_seed = 8;
    CHECK(generate_synthetic_job(spec, 2016).power_w != s.power_w);
}

TEST_CASE("infeasible specs are rejected") {
    CHECK(max_feasible_cov(195.0, 200.0) == doctest::Approx(std::sqrt(195.0 * 5.0) / 195.0));
    CHECK(max_feasible_cov(195.0, 200.0) < 0.17);

    SyntheticJobSpec spec;
    spec.mean_power_w = 195.0;
    spec.target_cov = 2.0;
    CHECK(error_name([&] { generate_synthetic_job(spec, 500); }) == "trace.InfeasibleSpec");

    spec.mean_power_w = 50.0;
    spec.target_cov = 0.3;
    spec.period_samples = 300;
    spec.period_score_target = 0.5;
    CHECK(error_name([&] { generate_synthetic_job(spec, 500); }) == "trace.InfeasibleSpec");
    spec.mean_power_w = 250.0;
    spec.period_samples.reset();
    CHECK(error_name([&] { generate_synthetic_job(spec, 500); }) == "trace.InfeasibleSpec");
}

TEST_CASE("server synthesis conserves power") {
    std::vector<JobSeries> jobs;
    for (int k = 0; k < 5; ++k) {
        JobSeries j;
        j.job_id = "j" + std::to_string(k);
        j.power_w.assign(10, 40.0);
        jobs.push_back(j);
    }
    const auto flat = synthesize_server(jobs, powermodel::reference_curve());
    CHECK(flat.aggregate_w == std::vector<double>(10, 200.0));

    std::vector<JobSeries> random_jobs;
    for (int k = 0; k < 3; ++k) {
        SyntheticJobSpec spec;
        spec.job_id = "r" + std::to_string(k);
        spec.target_cov = 0.2 + 0.2 * k;
        spec.mean_power_w = 30.0 + 20.0 * k;
        spec.noise_seed = 100 + k;
        random_jobs.push_back(generate_synthetic_job(spec, 1000));
    }
    const auto st = synthesize_server(random_jobs, powermodel::reference_curve());
    for (std::size_t t = 0; t < st.length(); ++t) {
        const double oracle = random_jobs[0].power_w[t] + random_jobs[1].power_w[t] + random_jobs[2].power_w[t];
        CHECK(st.aggregate_w[t] == doctest::Approx(oracle).epsilon(1e-12));
    }
    CHECK(conservation_error(st) <= 1e-9);
}

TEST_CASE("full utilization maps to the per-job cap") {
    const int n = 4;
    std::vector<JobSeries> jobs(n);
    for (int k = 0; k < n; ++k) {
        jobs[k].job_id = "u" + std::to_string(k);
        jobs[k].cpu_util.assign(6, 1.0);
        jobs[k].mem_gb.assign(6, 0.0);
    }
    const auto st = synthesize_server(jobs, powermodel::reference_curve());
    for (double p : st.aggregate_w) CHECK(p == doctest::Approx(200.0 * n));
    CHECK(conservation_error(st) <= 1e-9);
}

TEST_CASE("equal-share baseload keeps per-job bounds and conservation") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<JobSeries> jobs(3);
    for (int k = 0; k < 3; ++k) {
        jobs[k].job_id = "e" + std::to_string(k);
        for (int t = 0; t < 50; ++t) {
            jobs[k].cpu_util.push_back(u(rng));
            jobs[k].mem_gb.push_back(0.0);
        }
    }
    SynthesisOptions opt;
    opt.policy = BaseloadPolicy::EqualShare;
    opt.noise_seed = 5;
    const auto st = synthesize_server(jobs, powermodel::reference_curve(), opt);
    for (const auto& j : st.jobs) {
        for (double p : j.power_w) {
            CHECK(p >= 0.0);
            CHECK(p <= 200.0);
        }
    }
    CHECK(conservation_error(st) <= 1e-9);
}

TEST_CASE("server synthesis rejects mixed or ragged inputs") {
    JobSeries usage;
    usage.job_id = "u";
    usage.cpu_util = {0.5, 0.5};
    usage.mem_gb = {0, 0};
    JobSeries power;
    power.job_id = "p";
    power.power_w = {10, 10};
    CHECK(error_name([&] { synthesize_server({usage, power}, powermodel::reference_curve()); }) == "trace.MixedInputs");
    power.power_w = {10, 10, 10};
    JobSeries power2 = power;
    power2.power_w = {1, 2};
    CHECK(error_name([&] { synthesize_server({power, power2}, powermodel::reference_curve()); }) ==
          "trace.LengthMismatch");
    CHECK(error_name([&] { synthesize_server({}, powermodel::reference_curve()); }) == "trace.LengthMismatch");
}

TEST_CASE("server trace directory round trip") {
    TempDir dir;
    std::vector<JobSeries> jobs;
    for (int k = 0; k < 2; ++k) {
        SyntheticJobSpec spec;
        spec.job_id = "d" + std::to_string(k);
        spec.target_cov = 0.25;
        spec.mean_power_w = 45.0;
        spec.noise_seed = 31 + k;
        jobs.push_back(generate_synthetic_job(spec, 120));
    }
    SynthesisOptions opt;
    opt.server_id = "srv";
    const auto st = synthesize_server(jobs, powermodel::reference_curve(), opt);
    save_server_trace(st, dir.path());
    const auto back = load_server_trace(dir.path());
    CHECK(back.server_id == "srv");
    CHECK(back.aggregate_w == st.aggregate_w);
    REQUIRE(back.jobs.size() == 2);
    CHECK(back.jobs[1].power_w == st.jobs[1].power_w);
    CHECK(back.per_job_cap_w == st.per_job_cap_w);
    CHECK(error_name([&] { load_server_trace(dir / "missing"); }) == "trace.IoFailure");
}

}  // TEST_SUITE
