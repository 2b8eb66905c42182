#pragma once

#include <stdexcept>
#include <string>

namespace stagecut {

// Malformed input bytes: bad CIFAR record length, ragged CSV, non-numeric cell.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A threshold search that cannot meet its acceptance level on the given store.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A partition whose cuts collapse (t1 >= t2); reported, never silently fixed.
class DegeneratePartitionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical blow-up (NaN/Inf) inside the ODE integrator; message carries the step index.
class SamplerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace stagecut
