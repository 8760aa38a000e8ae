#ifndef QMXW_ERROR_HPP
#define QMXW_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qmxw {

/// Error class drives the process exit code in the CLI front end.
enum class ErrorClass {
    config = 2,       // malformed or inconsistent configuration
    assumption = 3,   // a certified hypothesis failed
    solver = 4,       // time stepping or nonlinear inversion failed
    verification = 5  // a diagnostic check failed
};

/// Exception with a stable machine-readable code (e.g. "NO_CONVERGENCE").
class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), cls_(cls), code_(std::move(code)) {}

    ErrorClass error_class() const { return cls_; }
    const std::string& code() const { return code_; }

private:
    ErrorClass cls_;
    std::string code_;
};

}  // namespace qmxw

#endif
