#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mcflab/singular_kernel.hpp"
#include "mcflab/types.hpp"

namespace mcf {

// Universal constant in the Li-Yau exponent A. Calibration on local positive
// eigenfunctions (calibrate_liyau_C over harnack_calibration_set(7, 2400)) gives 0.156.
inline constexpr double kLiYauC = 0.5;

struct LiYauParams {
    double alpha = 2.0;
    double R = 1.0;
    double K = 0.0;      // -K lower Ricci bound on B_2R
    double theta = 0.0;  // Delta q <= theta
    double gamma = 0.0;  // |grad q| <= gamma
    int n = 2;
    double C = kLiYauC;

    void validate() const;
};

double liyau_A(const LiYauParams& p);

// (t2/t1)^{n alpha/2} exp(A (t2 - t1) + rho).
double liyau_bound(const LiYauParams& p, double t1, double t2, double path_action);

// alpha d^2 / (4 dt) + dt * int_0^1 q(gamma(s), (1 - s) t2 + s t1) ds along the
// geodesic gamma from y to x; q may be empty.
double straight_path_action(const HeatKernelModel& m, double alpha, const Vec3& x, const Vec3& y,
                            double t1, double t2, const SpaceTimeField& q = {});

// Point at geodesic distance r from c in direction angle (tangent frame at c).
Vec3 geodesic_offset(const HeatKernelModel& m, const Vec3& c, double r, double angle);

struct HarnackProblem {
    HeatKernelModel model;
    SpaceTimeField u;
    SpaceTimeField q;  // potential in (Delta - q - d/dt) u = 0, empty for q = 0
    Vec3 center = Vec3::Zero();
    LiYauParams params;       // u solves the equation on B_2R(center)
    double inner_radius = 0;  // Omega' = B_inner(center), inner <= R
    double t1 = 0, t2 = 0;
    int rings = 3;
    int angles = 8;
    double residual_tol = 1e-3;
};

struct ChainNode {
    Vec3 p;
    double t = 0;
};

struct HarnackReport {
    double quotient = 0;  // sup_{Omega'} u(., t1) / inf_{Omega'} u(., t2)
    double bound = 0;     // Li-Yau bound at the diameter of the sample set
    LiYauParams params;
    double t1 = 0, t2 = 0;
    // max over sample pairs of u(x, t1) / (u(y, t2) bound(x, y))
    double worst_pair_ratio = 0;
    Vec3 worst_x = Vec3::Zero(), worst_y = Vec3::Zero();
    double max_residual = 0;  // relative residual of the equation at the samples
    std::vector<ChainNode> chain;
    double chain_R = 0, chain_theta = 0;
    bool pass = false;
};

// Relative residual |Delta u - q u - u_t| / (|Delta u| + |q u| + |u_t| + |u|) by
// central differences; on the sphere the Laplacian uses geodesics through x.
double heat_residual(const HeatKernelModel& m, const SpaceTimeField& u, const SpaceTimeField& q,
                     const Vec3& x, double t, double h = 1e-3);

HarnackReport harnack_scan(const HarnackProblem& P);

// Smallest C with every sampled pair inside the bound; the problems' own C is ignored.
double calibrate_liyau_C(const std::vector<HarnackProblem>& problems);

struct KSChain {
    int N = 0;
    double R = 0;
    double theta = 0;
    std::vector<ChainNode> nodes;  // p_0 = y at s, ..., p_N = x at t
};

// Chain of parabolic balls joining (y, s) to (x, t) along the segment with
// N the smallest integer above max{2(t - s)/s, l / min(sqrt(s)/4, delta/4)}.
// clearance(p) optionally gives the distance of p to the domain boundary.
KSChain ks_chain(const Vec3& x, const Vec3& y, double s, double t, double l, double delta,
                 const std::function<double(const Vec3&)>& clearance = {});

// Exact re-check of the chain constraints: t_{i+1} - theta R^2 >= s/4 and
// |p_{i+1} - p_i| <= R/2.
bool ks_chain_valid(const KSChain& c, double s);

// Product of Li-Yau bounds over the chain segments, balls of radius chain.R.
double chained_liyau_bound(const HeatKernelModel& m, const KSChain& chain, LiYauParams p,
                           const SpaceTimeField& q = {});

// u(y, s) / u(x, t) against the chained bound along ks_chain(x, y, s, t, |x - y|, delta);
// u must solve the equation on the delta-neighbourhood of the segment.
HarnackReport harnack_chain_check(const HeatKernelModel& m, const SpaceTimeField& u,
                                  const SpaceTimeField& q, const LiYauParams& p, const Vec3& x,
                                  const Vec3& y, double s, double t, double delta);

struct HarnackCase {
    std::string family;
    HarnackProblem problem;
    bool chained = false;
    Vec3 x = Vec3::Zero(), y = Vec3::Zero();
    double delta = 0;
};

// Randomised exact solutions on the flat torus and the unit sphere: heat kernels
// from a point, eigenfunctions positive on a cap or square, constant potentials.
std::vector<HarnackCase> harnack_suite(unsigned seed, int count);

HarnackReport run_case(const HarnackCase& c);

// Local Dirichlet-type eigenfunctions near the edge of their positivity domain.
std::vector<HarnackProblem> harnack_calibration_set(unsigned seed, int count);

}  // namespace mcf
