#pragma once

#include <stdexcept>
#include <string>

namespace steerid {

// Error taxonomy shared by library and CLI. The CLI maps these onto exit
// codes: usage 1, data/format/io 2, numerical divergence 3.

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed inputs: bad header, unparseable row, broken manifest.
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Valid format but unusable content: too few samples, degenerate signal,
// infeasible per-driver balance.
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent configuration: shape mismatch, missing feature stats,
// class-count mismatch at inference.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct checkpoint_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
    long step;
    divergence_error(const std::string& msg, long step_)
        : std::runtime_error(msg + " (step " + std::to_string(step_) + ")"), step(step_) {}
};

}  // namespace steerid
