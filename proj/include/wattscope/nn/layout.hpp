#pragma once

#include <string>
#include <vector>

#include "wattscope/nn/config.hpp"

namespace wattscope::nn {

// A named, column-major matrix inside the flat parameter vector.
struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
    friend bool operator==(const ParamSlice&, const ParamSlice&) = default;
};

class ParamLayout {
public:
    explicit ParamLayout(const NetworkConfig& config);

    const std::vector<ParamSlice>& slices() const noexcept { return slices_; }
    const ParamSlice& at(const std::string& name) const;
    std::size_t total() const noexcept { return total_; }

private:
    void add(std::string name, int rows, int cols);

    std::vector<ParamSlice> slices_;
    std::size_t total_ = 0;
};

}  // namespace wattscope::nn
