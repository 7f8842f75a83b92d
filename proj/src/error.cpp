#include "mcflab/error.hpp"

namespace mcf {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::NonManifold: return "non-manifold";
    case ErrorCode::NonOrientable: return "non-orientable";
    case ErrorCode::MultiComponent: return "multi-component";
    case ErrorCode::IsolatedVertex: return "isolated-vertex";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::SolverFailure: return "solver-failure";
    case ErrorCode::CflViolation: return "cfl-violation";
    case ErrorCode::SelfIntersection: return "self-intersection";
    case ErrorCode::NoBlowup: return "no-blowup";
    case ErrorCode::NotAShrinker: return "not-a-shrinker";
    case ErrorCode::GraphTest: return "graph-test";
    case ErrorCode::Curvature: return "curvature";
    case ErrorCode::Disconnected: return "disconnected";
    case ErrorCode::Inconsistent: return "inconsistent";
    case ErrorCode::Convergence: return "convergence";
    case ErrorCode::Coverage: return "coverage";
    }
    return "unknown";
}

}  // namespace mcf
