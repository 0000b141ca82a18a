#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>

namespace wattscope::monitor {

enum class Event { Ok, Degraded, Reselect };

const char* to_string(Event e) noexcept;

struct MonitorConfig {
    double threshold = 0.10;  // relative aggregate error
    int persistence = 12;     // consecutive breaches before Reselect
    std::size_t history_capacity = 288;
};

// Tracks |P - sum(inferred)| / P for one server stream. Single writer.
class MonitorState {
public:
    // Throws monitor.InvalidConfig.
    explicit MonitorState(const MonitorConfig& config = {});

    const MonitorConfig& config() const noexcept { return config_; }
    int breach_run() const noexcept { return breach_run_; }
    // Most recent relative errors, oldest first, at most history_capacity.
    const std::deque<double>& history() const noexcept { return history_; }

    // Throws monitor.NonPositiveAggregate when aggregate_w <= 0.
    Event observe(double aggregate_w, std::span<const double> inferred_w);

    // The state machine on a precomputed relative error.
    Event observe_error(double rel_err);

private:
    MonitorConfig config_;
    int breach_run_ = 0;
    std::deque<double> history_;
};

struct EventRecord {
    std::int64_t timestamp = 0;
    std::string server_id;
    double rel_err = 0.0;
    Event event = Event::Ok;
};

// One JSON object per line: {"timestamp","server_id","rel_err","event"}.
std::string to_jsonl(const EventRecord& record);

}  // namespace wattscope::monitor
