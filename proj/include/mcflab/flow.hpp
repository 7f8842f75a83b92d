#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcflab/geometry.hpp"
#include "mcflab/remesh.hpp"
#include "mcflab/shrinker.hpp"

namespace mcf {

enum class FlowMode { MCF, RMCF };
enum class Scheme { Explicit, SemiImplicit };
enum class DtPolicy { Fixed, Cfl };

struct FlowConfig {
    FlowMode mode = FlowMode::MCF;
    Scheme scheme = Scheme::SemiImplicit;
    DtPolicy dt_policy = DtPolicy::Fixed;
    double dt = 1e-4;
    // Safety factor c in dt <= c h_min^2 / 4.
    double cfl = 1.0;

    bool remesh = true;
    double remesh_min = 0.8;
    double remesh_max = 4.0 / 3.0;

    double max_time = 1e30;
    long max_steps = 1000000;
    double max_A = 1e6;
    double min_area = 0.0;

    int trace_every = 1;
    int selfcheck_every = 10;
    bool selfcheck_error = false;
    int checkpoint_every = 0;
    std::string checkpoint_dir;

    double solver_tol = 1e-12;
    int solver_max_iter = 1000;
    double fit_fraction = 0.3;

    void validate() const;
};

// "key = value" lines; '#' starts a comment. Unknown keys are errors.
FlowConfig parse_flow_config(const std::string& text, FlowConfig base = {});
FlowConfig load_flow_config(const std::filesystem::path& path, FlowConfig base = {});
void apply_flow_setting(FlowConfig& cfg, const std::string& key, const std::string& value);
std::string to_string(FlowMode m);
std::string to_string(Scheme s);

struct StepInfo {
    double t = 0.0;
    double dt = 0.0;
    // sup |x_new - x_old| over vertices, before remeshing.
    double max_displacement = 0.0;
    int solver_iterations = 0;
    double area = 0.0;
    int nverts = 0;
    bool remeshed = false;
    RemeshReport remesh;
    int self_intersections = -1;  // -1 when not checked this step
};

class FlowStepper {
public:
    FlowStepper(TriMesh mesh, FlowConfig cfg, double t0 = 0.0);

    // dt_cap shortens the step, e.g. to land on a stop time.
    StepInfo step(double dt_cap = 1e300);

    const TriMesh& mesh() const { return mesh_; }
    double time() const { return t_; }
    long steps() const { return steps_; }
    double target_edge() const { return h0_; }
    const FlowConfig& config() const { return cfg_; }
    double next_dt() const;

private:
    TriMesh mesh_;
    FlowConfig cfg_;
    double t_;
    long steps_ = 0;
    double h0_;
    std::vector<Vec3> warm_;
};

std::pair<TriMesh, StepInfo> step_flow(const TriMesh& mesh, const FlowConfig& cfg, double t);

struct FlowRecord {
    double t = 0.0;
    double maxH = 0.0;
    double maxA = 0.0;
    double area = 0.0;
    double F = 0.0;
    double typeI = 0.0;
    double resL2 = 0.0;
    double resSup = 0.0;
    int nverts = 0;
};

struct FlowTrace {
    std::vector<FlowRecord> records;
    std::string termination;
    long steps = 0;
    int self_intersection_events = 0;
    int remesh_events = 0;
    double worst_remesh_area_change = 0.0;
    // RMCF only: steps where F rose by more than 1e-6 relative.
    int monotonicity_violations = 0;
    std::vector<Checkpoint> checkpoints;
};

struct RunOptions {
    // Keep every k-th step's mesh in memory (0 = none).
    int keep_every = 0;
};

FlowTrace run_flow(const TriMesh& mesh, const FlowConfig& cfg, const RunOptions& opts = {},
                   TriMesh* final_mesh = nullptr);

FlowRecord measure(const TriMesh& mesh, double t, FlowMode mode, std::optional<double> T_hat);

std::string trace_csv(const FlowTrace& trace);

struct Extinction {
    double T = 0.0;
    double Lambda = 0.0;
    // RMS misfit of 1/maxH^2 relative to its range over the window.
    double residual = 0.0;
    int samples = 0;
};

Extinction estimate_extinction(const FlowTrace& trace, double fraction = 0.3);
Extinction estimate_extinction(const std::vector<double>& t, const std::vector<double>& maxH,
                               double fraction = 0.3);

TriMesh tangent_rescale(const TriMesh& mesh, const Vec3& x0, double c);
// Inverse of tangent_rescale.
TriMesh tangent_unscale(const TriMesh& mesh, const Vec3& x0, double c);

enum class TimeDirection { McfToRmcf, RmcfToMcf };

struct Reparam {
    double time;
    // sqrt(1 - s) for mcf_to_rmcf, its inverse the other way.
    double factor;
};

// s = 1 - exp(-(t - t_ref)) and back.
Reparam time_reparametrize(double t, TimeDirection dir, double t_ref = 0.0);

}  // namespace mcf
