#ifndef FAIRPILOT_ERROR_HPP
#define FAIRPILOT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fairpilot {

/// Malformed input bytes (CSV syntax, JSON documents).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input is well-formed but violates a domain rule (unknown column,
/// empty group, infeasible hyperparameter range, ...). The CLI maps this
/// to exit code 1 and the service to a 4xx status.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model could not be trained on the given partition.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fairpilot

#endif
