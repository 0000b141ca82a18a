#include "wattscope/nn/layout.hpp"

#include "wattscope/error.hpp"

namespace wattscope::nn {

ParamLayout::ParamLayout(const NetworkConfig& c) {
    add("conv.weight", c.conv_filters, c.conv_kernel);
    add("conv.bias", c.conv_filters, 1);
    if (!c.bypass_recurrent) {
        for (const char* dir : {"fwd", "bwd"}) {
            const std::string p = std::string("gru1.") + dir;
            add(p + ".wx", 3 * c.gru1_units, c.conv_filters);
            add(p + ".wh", 3 * c.gru1_units, c.gru1_units);
            add(p + ".bias", 3 * c.gru1_units, 1);
        }
        for (const char* dir : {"fwd", "bwd"}) {
            const std::string p = std::string("gru2.") + dir;
            add(p + ".wx", 3 * c.gru2_units, 2 * c.gru1_units);
            add(p + ".wh", 3 * c.gru2_units, c.gru2_units);
            add(p + ".bias", 3 * c.gru2_units, 1);
        }
    }
    add("dense1.weight", c.dense1_units, c.dense1_inputs());
    add("dense1.bias", c.dense1_units, 1);
    add("dense2.weight", 1, c.dense1_units);
    add("dense2.bias", 1, 1);
}

void ParamLayout::add(std::string name, int rows, int cols) {
    slices_.push_back(ParamSlice{std::move(name), total_, rows, cols});
    total_ += slices_.back().size();
}

const ParamSlice& ParamLayout::at(const std::string& name) const {
    for (const auto& s : slices_) {
        if (s.name == name) return s;
    }
    throw Error("nn", "ShapeMismatch", "no parameter slice named " + name);
}

}  // namespace wattscope::nn
