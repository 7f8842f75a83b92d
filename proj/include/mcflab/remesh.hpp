#pragma once

#include "mcflab/trimesh.hpp"

namespace mcf {

struct RemeshOptions {
    double target = 0.0;
    double min_ratio = 0.8;
    double max_ratio = 4.0 / 3.0;
    int smoothing_passes = 1;
    double smoothing = 0.5;
    int min_vertices = 12;
};

struct RemeshReport {
    int splits = 0;
    int collapses = 0;
    double area_before = 0.0;
    double area_after = 0.0;
};

struct EdgeRange {
    double min = 0.0;
    double max = 0.0;
};
EdgeRange edge_length_range(const TriMesh& mesh);

bool needs_remesh(const TriMesh& mesh, const RemeshOptions& opts);

// Isotropic remeshing: midpoint splits of long edges, link-condition-checked
// collapses of short ones, then tangential smoothing projected back onto the
// remeshed surface. Boundary vertices stay fixed; topology is preserved.
TriMesh remesh(const TriMesh& mesh, const RemeshOptions& opts, RemeshReport* report = nullptr);

// Pairs of non-adjacent faces that intersect.
int count_self_intersections(const TriMesh& mesh, int limit = 1 << 30);

}  // namespace mcf
