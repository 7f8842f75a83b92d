#pragma once

#include <stdexcept>
#include <string>

namespace mcf {

enum class ErrorCode {
    Io,
    Parse,
    NonManifold,
    NonOrientable,
    MultiComponent,
    IsolatedVertex,
    InvalidArgument,
    Precondition,
    SolverFailure,
    CflViolation,
    SelfIntersection,
    NoBlowup,
    NotAShrinker,
    GraphTest,
    Curvature,
    Disconnected,
    Inconsistent,
    Convergence,
    Coverage,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool ok, ErrorCode code, const std::string& what) {
    if (!ok) throw Error(code, what);
}

}  // namespace mcf
