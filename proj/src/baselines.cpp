#include "wattscope/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <numeric>
#include <optional>

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"
#include "wattscope/util.hpp"

namespace wattscope::baselines {

namespace {

[[noreturn]] void fail(const char* kind, const std::string& detail) {
    throw Error("baselines", kind, detail);
}

}  // namespace

MeanModel mean_fit(const JobPowerMap& data) {
    MeanModel m;
    for (const auto& [job, series] : data) {
        if (series.empty()) fail("UnknownJob", "job " + job + " has no training samples");
        m.job_means_w[job] = std::max(0.0, mean_of(series));
    }
    return m;
}

std::vector<double> mean_predict(const MeanModel& model, const std::string& job_id, std::size_t length) {
    const auto it = model.job_means_w.find(job_id);
    if (it == model.job_means_w.end()) fail("UnknownJob", "no mean recorded for job " + job_id);
    return std::vector<double>(length, it->second);
}

std::map<std::string, std::vector<double>> mean_predict(const MeanModel& model, std::span<const double> aggregate_w) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [job, mean] : model.job_means_w) out[job].assign(aggregate_w.size(), mean);
    return out;
}

CoModel co_fit(const JobPowerMap& data, int K) {
    if (K < 2) fail("InvalidStates", "K must be at least 2");
    CoModel m;
    for (const auto& [job, series] : data) {
        if (series.empty()) fail("UnknownJob", "job " + job + " has no training samples");
        std::vector<double> states(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            states[static_cast<std::size_t>(k)] = quantile_of(series, static_cast<double>(k) / (K - 1));
        }
        std::sort(states.begin(), states.end());
        m.job_ids.push_back(job);
        m.job_states.push_back(std::move(states));
    }
    return m;
}

std::size_t co_state_space(const CoModel& model) noexcept {
    std::size_t total = 1;
    for (const auto& s : model.job_states) {
        if (s.empty()) return 0;
        if (total > std::numeric_limits<std::size_t>::max() / s.size()) return std::numeric_limits<std::size_t>::max();
        total *= s.size();
    }
    return total;
}

CoDecoder::CoDecoder(CoModel model, CoMode mode) : model_(std::move(model)) {
    const std::size_t n = model_.job_states.size();
    if (model_.job_ids.size() != n) fail("InvalidStates", "ids and states differ in count");
    const std::size_t space = co_state_space(model_);
    if (n > 0 && space == 0) fail("InvalidStates", "a job has no states");
    exhaustive_ = mode == CoMode::Exhaustive || (mode == CoMode::Auto && space <= kMaxExhaustiveStates);
    if (exhaustive_ && space > kMaxExhaustiveStates) {
        fail("StateSpaceTooLarge", std::to_string(space) + " combinations exceed the exhaustive limit");
    }
    assign_.assign(n, 0);
    if (!exhaustive_ || n == 0) return;

    // Distinct levels per job; with job 0 as the most significant digit the
    // combination index then orders assignments lexicographically by value.
    levels_.resize(n);
    std::size_t lattice = 1;
    for (std::size_t i = 0; i < n; ++i) {
        auto& lv = levels_[i];
        lv = model_.job_states[i];
        std::sort(lv.begin(), lv.end());
        lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
        lattice *= lv.size();
    }
    radix_.assign(n, 1);
    for (std::size_t i = n; i-- > 1;) radix_[i - 1] = radix_[i] * levels_[i].size();
    std::vector<double> sums(lattice);
    std::vector<std::size_t> digit(n, 0);
    for (std::size_t idx = 0; idx < lattice; ++idx) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += levels_[i][digit[i]];
        sums[idx] = s;
        for (std::size_t i = n; i-- > 0;) {
            if (++digit[i] < levels_[i].size()) break;
            digit[i] = 0;
        }
    }
    indices_.resize(lattice);
    std::iota(indices_.begin(), indices_.end(), 0U);
    std::stable_sort(indices_.begin(), indices_.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return sums[a] < sums[b]; });
    sums_.resize(lattice);
    for (std::size_t i = 0; i < lattice; ++i) sums_[i] = sums[indices_[i]];
}

void CoDecoder::step(double p, std::span<double> out) {
    const std::size_t n = model_.job_states.size();
    if (out.size() != n) fail("InvalidStates", "output span does not match the job count");
    if (n == 0) return;

    if (exhaustive_) {
        // Closest sum from below (first of its run of equal sums) against the
        // closest from above; equal cost keeps the lower total.
        const auto it = std::lower_bound(sums_.begin(), sums_.end(), p);
        const auto above = static_cast<std::size_t>(it - sums_.begin());
        std::size_t pick = 0;
        if (above < sums_.size() && sums_[above] == p) {
            pick = above;
        } else if (above > 0) {
            std::size_t below = above - 1;
            while (below > 0 && sums_[below - 1] == sums_[below]) --below;
            pick = below;
            if (above < sums_.size() && std::abs(sums_[above] - p) < std::abs(p - sums_[below])) pick = above;
        }
        std::size_t idx = indices_[pick];
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = levels_[i][idx / radix_[i]];
            idx %= radix_[i];
        }
        return;
    }

    // Coordinate descent per job, warm-started from the previous timestep.
    for (int sweep = 0; sweep < 32; ++sweep) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double others = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) others += model_.job_states[j][assign_[j]];
            }
            std::size_t best = assign_[i];
            double best_cost = std::abs(p - others - model_.job_states[i][best]);
            for (std::size_t k = 0; k < model_.job_states[i].size(); ++k) {
                const double cost = std::abs(p - others - model_.job_states[i][k]);
                if (cost < best_cost || (cost == best_cost && k < best)) {
                    best = k;
                    best_cost = cost;
                }
            }
            if (best != assign_[i]) {
                assign_[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = model_.job_states[i][assign_[i]];
}

std::vector<std::vector<double>> co_predict(const CoModel& model, std::span<const double> aggregate_w, CoMode mode) {
    CoDecoder decoder(model, mode);
    const std::size_t n = decoder.job_count();
    std::vector<std::vector<double>> out(n, std::vector<double>(aggregate_w.size(), 0.0));
    std::vector<double> row(n);
    for (std::size_t t = 0; t < aggregate_w.size(); ++t) {
        decoder.step(aggregate_w[t], row);
        for (std::size_t i = 0; i < n; ++i) out[i][t] = row[i];
    }
    return out;
}

void to_json(nlohmann::json& j, const MeanModel& m) { j = nlohmann::json{{"job_means_w", m.job_means_w}}; }

void from_json(const nlohmann::json& j, MeanModel& m) { j.at("job_means_w").get_to(m.job_means_w); }

void to_json(nlohmann::json& j, const CoModel& m) {
    j = nlohmann::json{{"job_ids", m.job_ids}, {"job_states_w", m.job_states}};
}

void from_json(const nlohmann::json& j, CoModel& m) {
    j.at("job_ids").get_to(m.job_ids);
    j.at("job_states_w").get_to(m.job_states);
    if (m.job_ids.size() != m.job_states.size()) throw Error("baselines", "InvalidStates", "ids and states differ in count");
}

}  // namespace wattscope::baselines
