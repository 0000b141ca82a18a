#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace wattscope::baselines {

// Training power per job, keyed by job id.
using JobPowerMap = std::map<std::string, std::vector<double>>;

struct MeanModel {
    std::map<std::string, double> job_means_w;
};

MeanModel mean_fit(const JobPowerMap& data);

// Constant training mean for every timestep, whatever the aggregate.
// Throws baselines.UnknownJob.
std::vector<double> mean_predict(const MeanModel& model, const std::string& job_id, std::size_t length);
std::map<std::string, std::vector<double>> mean_predict(const MeanModel& model, std::span<const double> aggregate_w);

struct CoModel {
    std::vector<std::string> job_ids;             // lexicographic job order used for tie-breaks
    std::vector<std::vector<double>> job_states;  // ascending, K per job
};

enum class CoMode { Auto, Exhaustive, Greedy };

inline constexpr std::size_t kMaxExhaustiveStates = 1'000'000;

// K quantile states {0, 1/(K-1), ..., 1} of each job's training power.
// Throws baselines.InvalidStates when K < 2 or a job has no samples.
CoModel co_fit(const JobPowerMap& data, int K = 4);

// Per timestep, the state combination minimizing |P(t) - sum|; ties go to
// the lowest total, then the lexicographically smallest assignment.
// Returns one series per job in model.job_ids order.
// Throws baselines.StateSpaceTooLarge for Exhaustive beyond kMaxExhaustiveStates.
std::vector<std::vector<double>> co_predict(const CoModel& model, std::span<const double> aggregate_w,
                                            CoMode mode = CoMode::Auto);

// Timestep-at-a-time decoder behind co_predict. Greedy mode keeps the
// previous assignment as its starting point, so feed samples in order.
class CoDecoder {
public:
    CoDecoder(CoModel model, CoMode mode = CoMode::Auto);

    std::size_t job_count() const noexcept { return model_.job_states.size(); }
    const CoModel& model() const noexcept { return model_; }
    bool exhaustive() const noexcept { return exhaustive_; }

    // Writes one state value per job (model.job_ids order) into out.
    void step(double aggregate_w, std::span<double> out);

private:
    CoModel model_;
    bool exhaustive_ = true;
    std::vector<std::vector<double>> levels_;  // distinct states per job
    std::vector<double> sums_;            // lattice sums, ascending
    std::vector<std::uint32_t> indices_;  // combination index per sum
    std::vector<std::size_t> radix_;
    std::vector<std::size_t> assign_;     // greedy warm start
};

// Number of state combinations, saturating at SIZE_MAX.
std::size_t co_state_space(const CoModel& model) noexcept;

void to_json(nlohmann::json& j, const MeanModel& m);
void from_json(const nlohmann::json& j, MeanModel& m);
void to_json(nlohmann::json& j, const CoModel& m);
void from_json(const nlohmann::json& j, CoModel& m);

}  // namespace wattscope::baselines
