#include <cmath>
#include <fstream>
#include <sstream>

#include "mcflab/flow.hpp"

namespace mcf {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(x))
        fail(ErrorCode::InvalidArgument, "bad number for " + key + ": '" + v + "'");
    return x;
}

long to_long(const std::string& key, const std::string& v) {
    double x = to_double(key, v);
    if (x != std::floor(x)) fail(ErrorCode::InvalidArgument, key + " must be an integer");
    return static_cast<long>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail(ErrorCode::InvalidArgument, "bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

std::string to_string(FlowMode m) { return m == FlowMode::MCF ? "mcf" : "rmcf"; }
std::string to_string(Scheme s) { return s == Scheme::Explicit ? "explicit" : "semi_implicit"; }

void apply_flow_setting(FlowConfig& c, const std::string& key, const std::string& value) {
    const std::string& v = value;
    if (key == "mode") {
        if (v == "mcf" || v == "MCF") c.mode = FlowMode::MCF;
        else if (v == "rmcf" || v == "RMCF") c.mode = FlowMode::RMCF;
        else fail(ErrorCode::InvalidArgument, "mode must be mcf or rmcf");
    } else if (key == "scheme") {
        if (v == "explicit") c.scheme = Scheme::Explicit;
        else if (v == "semi_implicit" || v == "semi-implicit") c.scheme = Scheme::SemiImplicit;
        else fail(ErrorCode::InvalidArgument, "scheme must be explicit or semi_implicit");
    } else if (key == "dt") {
        c.dt = to_double(key, v);
        c.dt_policy = DtPolicy::Fixed;
    } else if (key == "cfl") {
        c.cfl = to_double(key, v);
        c.dt_policy = DtPolicy::Cfl;
    } else if (key == "dt_policy") {
        if (v == "fixed") c.dt_policy = DtPolicy::Fixed;
        else if (v == "cfl") c.dt_policy = DtPolicy::Cfl;
        else fail(ErrorCode::InvalidArgument, "dt_policy must be fixed or cfl");
    } else if (key == "remesh") {
        c.remesh = to_bool(key, v);
    } else if (key == "remesh.min") {
        c.remesh_min = to_double(key, v);
    } else if (key == "remesh.max") {
        c.remesh_max = to_double(key, v);
    } else if (key == "stop.max_time") {
        c.max_time = to_double(key, v);
    } else if (key == "stop.max_steps") {
        c.max_steps = to_long(key, v);
    } else if (key == "stop.max_A") {
        c.max_A = to_double(key, v);
    } else if (key == "stop.min_area") {
        c.min_area = to_double(key, v);
    } else if (key == "trace.every") {
        c.trace_every = static_cast<int>(to_long(key, v));
    } else if (key == "selfcheck.every") {
        c.selfcheck_every = static_cast<int>(to_long(key, v));
    } else if (key == "selfcheck.error") {
        c.selfcheck_error = to_bool(key, v);
    } else if (key == "checkpoint.every") {
        c.checkpoint_every = static_cast<int>(to_long(key, v));
    } else if (key == "checkpoint.dir") {
        c.checkpoint_dir = v;
    } else if (key == "solver.tol") {
        c.solver_tol = to_double(key, v);
    } else if (key == "solver.max_iter") {
        c.solver_max_iter = static_cast<int>(to_long(key, v));
    } else if (key == "fit.fraction") {
        c.fit_fraction = to_double(key, v);
    } else {
        fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
    }
}

void FlowConfig::validate() const {
    require(dt > 0, ErrorCode::InvalidArgument, "dt must be positive");
    require(cfl > 0 && cfl <= 1, ErrorCode::InvalidArgument, "cfl safety factor must lie in (0,1]");
    require(remesh_min > 0 && remesh_min < remesh_max, ErrorCode::InvalidArgument,
            "remesh.min must be positive and below remesh.max");
    require(max_steps > 0, ErrorCode::InvalidArgument, "stop.max_steps must be positive");
    require(trace_every > 0, ErrorCode::InvalidArgument, "trace.every must be positive");
    require(selfcheck_every >= 0 && checkpoint_every >= 0, ErrorCode::InvalidArgument,
            "cadences must be nonnegative");
    require(solver_tol > 0 && solver_max_iter > 0, ErrorCode::InvalidArgument,
            "solver settings must be positive");
    require(fit_fraction > 0 && fit_fraction <= 1, ErrorCode::InvalidArgument,
            "fit.fraction must lie in (0,1]");
}

FlowConfig parse_flow_config(const std::string& text, FlowConfig cfg) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::Parse, "config line " + std::to_string(lineno) + ": expected key = value");
        apply_flow_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

FlowConfig load_flow_config(const std::filesystem::path& path, FlowConfig base) {
    std::ifstream f(path);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_flow_config(ss.str(), std::move(base));
}

}  // namespace mcf
