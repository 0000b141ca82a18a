#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <utility>

#include "wattscope/error.hpp"

namespace wattscope::testing {

// Name of the wattscope::Error thrown by f, or "" when f returns normally.
template <typename F>
std::string error_name(F&& f) {
    try {
        std::forward<F>(f)();
    } catch (const Error& e) {
        return e.name();
    }
    return "";
}

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("wattscope-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace wattscope::testing
