#include "wattscope/monitor.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "wattscope/error.hpp"

namespace wattscope::monitor {

const char* to_string(Event e) noexcept {
    switch (e) {
        case Event::Ok: return "ok";
        case Event::Degraded: return "degraded";
        case Event::Reselect: return "reselect";
    }
    return "?";
}

MonitorState::MonitorState(const MonitorConfig& config) : config_(config) {
    if (!(config_.threshold >= 0.0) || !std::isfinite(config_.threshold)) {
        throw Error("monitor", "InvalidConfig", "threshold must be a non-negative number");
    }
    if (config_.persistence < 1) throw Error("monitor", "InvalidConfig", "persistence must be at least 1");
    if (config_.history_capacity < 1) throw Error("monitor", "InvalidConfig", "history capacity must be at least 1");
}

Event MonitorState::observe(double aggregate_w, std::span<const double> inferred_w) {
    if (!(aggregate_w > 0.0)) {
        throw Error("monitor", "NonPositiveAggregate", "aggregate reading must be positive");
    }
    double sum = 0.0;
    for (double v : inferred_w) sum += v;
    return observe_error(std::abs(aggregate_w - sum) / aggregate_w);
}

Event MonitorState::observe_error(double rel_err) {
    history_.push_back(rel_err);
    while (history_.size() > config_.history_capacity) history_.pop_front();
    if (!(rel_err > config_.threshold)) {
        breach_run_ = 0;
        return Event::Ok;
    }
    if (++breach_run_ >= config_.persistence) {
        breach_run_ = 0;
        return Event::Reselect;
    }
    return Event::Degraded;
}

std::string to_jsonl(const EventRecord& record) {
    nlohmann::ordered_json j;
    j["timestamp"] = record.timestamp;
    j["server_id"] = record.server_id;
    j["rel_err"] = record.rel_err;
    j["event"] = to_string(record.event);
    return j.dump();
}

}  // namespace wattscope::monitor
