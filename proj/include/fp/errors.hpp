#pragma once

#include <stdexcept>
#include <string>

namespace fp {

// Bad user-supplied input (missing file, unsupported format, out-of-range
// parameter). CLI maps this to exit code 2.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed on otherwise valid input (alignment failure,
// degenerate tensors, training divergence). CLI maps this to exit code 3.
struct PipelineError : std::runtime_error {
    explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
    PipelineError(const std::string& stage, const std::string& msg)
        : std::runtime_error("[" + stage + "] " + msg), stage_name(stage) {}
    std::string stage_name;
};

}  // namespace fp
