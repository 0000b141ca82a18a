#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace wattscope {

// splitmix64 finalizer; stable across platforms, used to derive per-unit seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

double mean_of(std::span<const double> xs);
// Population variance (divides by N).
double variance_of(std::span<const double> xs);

// Linear-interpolated quantile of an unsorted sample, q in [0,1].
double quantile_of(std::span<const double> xs, double q);

}  // namespace wattscope
