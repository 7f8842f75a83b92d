#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mcflab/geometry.hpp"

namespace mcf {

// (4 pi t0)^{-1} ∫ exp(-|x-x0|^2 / 4t0) dmu, centroid rule on faces
// subdivided until their diameter is at most sqrt(t0)/4.
double f_functional(const TriMesh& mesh, const Vec3& x0 = Vec3::Zero(), double t0 = 1.0);

struct EntropyGrid {
    int n_space = 5;
    int n_scale = 9;
    int rounds = 3;
    // t0 range as multiples of diam^2.
    double scale_lo = 1e-2;
    double scale_hi = 1e2;
};

struct EntropyResult {
    double value = 0.0;
    Vec3 x0 = Vec3::Zero();
    double t0 = 1.0;
    // Spacing of the coarse grid, for "within one cell" comparisons.
    Vec3 cell = Vec3::Zero();
};

EntropyResult entropy_estimate(const TriMesh& mesh, const EntropyGrid& grid = {});

struct Residual {
    double l2 = 0.0;
    double sup = 0.0;
    std::vector<double> field;
};

// r = H - <x,n>/(2 tau); tau absent means tau = 1 (the 1/2 normalisation).
// Vertices outside the mask (or on the boundary) are excluded.
Residual shrinker_residual(const TriMesh& mesh, const MeshGeometry& g,
                           std::optional<double> T_minus_t = std::nullopt,
                           const std::vector<char>* mask = nullptr);

struct Checkpoint {
    double t;
    TriMesh mesh;
};

struct DensityCurve {
    std::vector<double> t;
    std::vector<double> theta;
    bool monotone = true;
    double max_increase = 0.0;
    double limit = 0.0;
};

DensityCurve gaussian_density(const std::vector<Checkpoint>& flow, const Vec3& x0, double T);

// Value at 0 of the quadratic through three (s, y) samples.
double extrapolate_to_zero(const double s[3], const double y[3]);

struct IlmanenCheck {
    double lhs = 0.0;
    double h2 = 0.0;
    double genus_term = 0.0;
    double ratio_term = 0.0;
    double area_ratio = 0.0;
    int genus = 0;
    double slack = 0.0;
};

// genus < 0 computes the genus of the clipped surface.
IlmanenCheck ilmanen_bound_check(const TriMesh& mesh, const MeshGeometry& g, const Vec3& p,
                                 double R, double eps, int genus);

enum class ShapeClass { PlaneLike, SphereLike, CylinderLike, Other };
const char* to_string(ShapeClass c);

struct ClassifyOptions {
    double delta = 0.05;
    double eps_entropy = 0.1;
    double residual_sup = 0.1;
    EntropyGrid grid;
};

struct Classification {
    ShapeClass shape = ShapeClass::Other;
    double entropy = 0.0;
    double sup_H = 0.0;
    double residual_sup = 0.0;
};

Classification classify_flat(const TriMesh& mesh, const MeshGeometry& g,
                             const ClassifyOptions& opts = {},
                             const std::vector<char>* mask = nullptr);

inline const double kSphereEntropy = 4.0 / std::exp(1.0);
inline const double kCylinderEntropy = std::sqrt(2.0 * kPi / std::exp(1.0));

}  // namespace mcf
