#pragma once

#include <span>
#include <string>
#include <vector>

#include "mcflab/error.hpp"
#include "mcflab/types.hpp"

namespace mcf {

struct BuildOptions {
    bool allow_multi = false;
    // Relative to the mean face area.
    double degenerate_ratio = 1e-14;
};

struct BuildReport {
    int collapsed_faces = 0;
    int flipped_faces = 0;
    int components = 0;
};

struct Edge {
    int v0, v1;
    // Halfedge v0 -> v1; its twin (if any) runs v1 -> v0.
    int he;
};

// Triangle mesh with halfedge adjacency. Halfedge h lives in face h/3 and
// runs from faces[h/3][h%3] to faces[h/3][(h+1)%3].
class TriMesh {
public:
    TriMesh() = default;

    static TriMesh build(std::vector<Vec3> positions, std::vector<Face> faces,
                         const BuildOptions& opts = {},
                         BuildReport* report = nullptr);

    int num_vertices() const { return static_cast<int>(pos_.size()); }
    int num_faces() const { return static_cast<int>(faces_.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const std::vector<Vec3>& positions() const { return pos_; }
    const Vec3& position(int v) const { return pos_[v]; }
    const std::vector<Face>& faces() const { return faces_; }
    const Face& face(int f) const { return faces_[f]; }
    const std::vector<Edge>& edges() const { return edges_; }

    // Topology is unchanged; the caller keeps any geometry cache in sync.
    void set_positions(std::vector<Vec3> p);

    static int next(int he) { return he - he % 3 + (he + 1) % 3; }
    static int prev(int he) { return he - he % 3 + (he + 2) % 3; }
    int origin(int he) const { return faces_[he / 3][he % 3]; }
    int target(int he) const { return faces_[he / 3][(he + 1) % 3]; }
    int twin(int he) const { return twin_[he]; }
    int edge_of(int he) const { return he_edge_[he]; }

    std::span<const int> vertex_faces(int v) const {
        return {vf_.data() + vf_off_[v], vf_.data() + vf_off_[v + 1]};
    }
    std::span<const int> vertex_neighbors(int v) const {
        return {vv_.data() + vv_off_[v], vv_.data() + vv_off_[v + 1]};
    }

    bool closed() const { return closed_; }
    bool is_boundary_vertex(int v) const { return boundary_v_[v] != 0; }
    bool is_boundary_edge(int e) const { return twin_[edges_[e].he] < 0; }
    int num_components() const { return components_; }
    // Component id per face.
    const std::vector<int>& face_component() const { return face_comp_; }

    double face_area(int f) const;
    Vec3 face_normal(int f) const;
    double total_area() const;
    double mean_edge_length() const;
    Vec3 centroid() const;
    int euler_characteristic() const;

private:
    std::vector<Vec3> pos_;
    std::vector<Face> faces_;
    std::vector<int> twin_;
    std::vector<int> he_edge_;
    std::vector<Edge> edges_;
    std::vector<int> vf_off_, vf_;
    std::vector<int> vv_off_, vv_;
    std::vector<char> boundary_v_;
    std::vector<int> face_comp_;
    bool closed_ = true;
    int components_ = 0;
};

}  // namespace mcf
