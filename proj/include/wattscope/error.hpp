#pragma once

#include <stdexcept>
#include <string>

namespace wattscope {

// Domain error carrying a stable, module-qualified name such as
// "trace.GapTooLong". The CLI prints name() verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string module, std::string kind, const std::string& detail)
        : std::runtime_error(module + "." + kind + ": " + detail),
          module_(std::move(module)),
          kind_(std::move(kind)) {}

    const std::string& module() const noexcept { return module_; }
    const std::string& kind() const noexcept { return kind_; }
    std::string name() const { return module_ + "." + kind_; }

private:
    std::string module_;
    std::string kind_;
};

}  // namespace wattscope
