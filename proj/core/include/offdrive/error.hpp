#pragma once

#include <stdexcept>
#include <string>

namespace offdrive {

// Invalid or inconsistent configuration; raised before any simulation runs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed, truncated or mismatched input data (datasets, checkpoints, CSV).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace offdrive
