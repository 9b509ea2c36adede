#pragma once

#include <stdexcept>
#include <string>

namespace afp {

enum class ErrorKind {
    invalid_parameter,
    invalid_config,
    evaluation,
    numerical_failure,
    explosion_detected,
    capacity_exceeded,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidParameter : Error {
    explicit InvalidParameter(const std::string& w) : Error(ErrorKind::invalid_parameter, w) {}
};

struct InvalidConfig : Error {
    explicit InvalidConfig(const std::string& w) : Error(ErrorKind::invalid_config, w) {}
};

// A test function returned a non-finite value at some atom.
struct EvaluationError : Error {
    EvaluationError(const std::string& w, double at) : Error(ErrorKind::evaluation, w), location(at) {}
    double location;
};

struct NumericalFailure : Error {
    explicit NumericalFailure(const std::string& w, long step = -1)
        : Error(ErrorKind::numerical_failure, w), step_index(step) {}
    long step_index;
};

struct ExplosionDetected : Error {
    ExplosionDetected(const std::string& w, double t) : Error(ErrorKind::explosion_detected, w), time(t) {}
    double time;
};

struct CapacityExceeded : Error {
    CapacityExceeded(const std::string& w, long st) : Error(ErrorKind::capacity_exceeded, w), state(st) {}
    long state;
};

} // namespace afp
