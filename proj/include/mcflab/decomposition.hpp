#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcflab/geometry.hpp"

namespace mcf {

enum class VoxelLabel : std::uint8_t { Outside = 0, High = 1, Thick = 2, Thin = 3, NearSurface = 4 };
const char* to_string(VoxelLabel l);

struct DecomposeOptions {
    // |A| threshold for the set S; NaN means 1/eps.
    double curvature_threshold = std::numeric_limits<double>::quiet_NaN();
    Vec3 center = Vec3::Zero();
};

struct BallDecomposition {
    double eps = 0.0;
    double R = 0.0;
    int res = 0;
    double voxel = 0.0;
    Vec3 center = Vec3::Zero();
    // x fastest, then y, then z.
    std::vector<VoxelLabel> labels;
    std::vector<int> S;
    double vol_high = 0.0;
    double vol_thick = 0.0;
    double vol_thin = 0.0;
    double vol_near = 0.0;
    int boundary_voxels = 0;

    Vec3 voxel_center(int i, int j, int k) const;
    VoxelLabel at(int i, int j, int k) const {
        return labels[(static_cast<std::size_t>(k) * res + j) * res + i];
    }
};

BallDecomposition decompose(const TriMesh& mesh, const MeshGeometry& g, double eps, double R,
                            int voxel_res, const DecomposeOptions& opts = {});

// Run-length encoding: "res\n" then "label count" pairs, one per line.
std::string encode_rle(const BallDecomposition& d);

// Exact triangle / axis-aligned box overlap (separating axes).
bool triangle_box_overlap(const Vec3& center, const Vec3& half, const Vec3& a, const Vec3& b,
                          const Vec3& c);

struct TimeSeries {
    std::vector<double> t;
    std::vector<double> value;
};

// inf over s in [t - tau, t] of the piecewise-constant (left-continuous hold) series.
double f_of_t(const TimeSeries& tn, double t, double tau);

struct Selection {
    std::vector<double> times;
    std::vector<int> indices;
    bool complete = false;
    std::string message;
};

// Doubling search on sampled f: from a start s, jump to the first sample in
// [s, s+l] exceeding 2 f(s) until none does, emit s, restart at s + l + gap.
Selection select_times(const TimeSeries& f, double t0, double l, int count, double gap = 1.0);
Selection select_times(const std::function<double(double)>& f, double t0, double l, int count,
                       double horizon, double dt, double gap = 1.0);

}  // namespace mcf
