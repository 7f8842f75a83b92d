#include "mcflab/trimesh.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <unordered_map>

namespace mcf {

namespace {

std::uint64_t key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

double tri_area(const std::vector<Vec3>& p, const Face& f) {
    return 0.5 * (p[f[1]] - p[f[0]]).cross(p[f[2]] - p[f[0]]).norm();
}

int find(std::vector<int>& parent, int x) {
    while (parent[x] != x) {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    return x;
}

// Merges the shortest edge of every near-zero-area face until none remain.
int collapse_degenerate(const std::vector<Vec3>& pos, std::vector<Face>& faces,
                        double ratio) {
    int collapsed = 0;
    for (int round = 0; round < 16; ++round) {
        double mean = 0.0;
        for (const Face& f : faces) mean += tri_area(pos, f);
        if (faces.empty()) break;
        mean /= static_cast<double>(faces.size());
        const double tol = ratio * mean;

        std::vector<int> parent(pos.size());
        std::iota(parent.begin(), parent.end(), 0);
        bool any = false;
        for (const Face& f : faces) {
            if (tri_area(pos, f) > tol) continue;
            int best = 0;
            double best_len = (pos[f[1]] - pos[f[0]]).squaredNorm();
            for (int k = 1; k < 3; ++k) {
                double len = (pos[f[(k + 1) % 3]] - pos[f[k]]).squaredNorm();
                if (len < best_len) {
                    best_len = len;
                    best = k;
                }
            }
            int a = find(parent, f[best]);
            int b = find(parent, f[(best + 1) % 3]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
            any = true;
            ++collapsed;
        }
        if (!any) break;
        std::vector<Face> kept;
        kept.reserve(faces.size());
        for (Face f : faces) {
            for (int& v : f) v = find(parent, v);
            if (f[0] != f[1] && f[1] != f[2] && f[0] != f[2]) kept.push_back(f);
        }
        faces.swap(kept);
    }
    return collapsed;
}

}  // namespace

TriMesh TriMesh::build(std::vector<Vec3> positions, std::vector<Face> faces,
                       const BuildOptions& opts, BuildReport* report) {
    const int nv = static_cast<int>(positions.size());
    BuildReport rep;

    std::vector<Face> clean;
    clean.reserve(faces.size());
    for (const Face& f : faces) {
        for (int v : f) {
            if (v < 0 || v >= nv) fail(ErrorCode::Parse, "face index out of range");
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
            ++rep.collapsed_faces;
            continue;
        }
        clean.push_back(f);
    }
    rep.collapsed_faces += collapse_degenerate(positions, clean, opts.degenerate_ratio);
    const int nf = static_cast<int>(clean.size());

    // Undirected edge -> incident faces.
    std::unordered_map<std::uint64_t, std::array<int, 3>> edge_faces;
    edge_faces.reserve(static_cast<std::size_t>(nf) * 2);
    for (int f = 0; f < nf; ++f) {
        for (int k = 0; k < 3; ++k) {
            int a = clean[f][k], b = clean[f][(k + 1) % 3];
            auto& slot = edge_faces.try_emplace(key(std::min(a, b), std::max(a, b)),
                                                std::array<int, 3>{-1, -1, 0})
                             .first->second;
            if (slot[2] >= 2) fail(ErrorCode::NonManifold, "edge shared by more than two faces");
            slot[slot[2]++] = f;
        }
    }

    // Orientation repair and components by BFS over face adjacency.
    std::vector<int> comp(nf, -1);
    std::vector<char> flipped(nf, 0);
    auto has_directed = [&](const Face& f, int a, int b) {
        for (int k = 0; k < 3; ++k)
            if (f[k] == a && f[(k + 1) % 3] == b) return true;
        return false;
    };
    int ncomp = 0;
    for (int seed = 0; seed < nf; ++seed) {
        if (comp[seed] >= 0) continue;
        std::queue<int> q;
        q.push(seed);
        comp[seed] = ncomp;
        while (!q.empty()) {
            int f = q.front();
            q.pop();
            for (int k = 0; k < 3; ++k) {
                int a = clean[f][k], b = clean[f][(k + 1) % 3];
                const auto& slot = edge_faces.at(key(std::min(a, b), std::max(a, b)));
                int g = slot[0] == f ? slot[1] : slot[0];
                if (g < 0 || g == f) continue;
                bool consistent = has_directed(clean[g], b, a);
                if (comp[g] < 0) {
                    if (!consistent) {
                        std::swap(clean[g][1], clean[g][2]);
                        flipped[g] ^= 1;
                    }
                    comp[g] = ncomp;
                    q.push(g);
                } else if (!consistent) {
                    fail(ErrorCode::NonOrientable, "no consistent orientation exists");
                }
            }
        }
        ++ncomp;
    }
    // Closed components face outward (positive enclosed volume).
    {
        std::vector<double> vol(ncomp, 0.0);
        std::vector<char> open(ncomp, 0);
        for (int f = 0; f < nf; ++f) {
            const Face& t = clean[f];
            vol[comp[f]] += positions[t[0]].dot(positions[t[1]].cross(positions[t[2]]));
            for (int k = 0; k < 3; ++k) {
                int a = t[k], b = t[(k + 1) % 3];
                if (edge_faces.at(key(std::min(a, b), std::max(a, b)))[2] < 2) open[comp[f]] = 1;
            }
        }
        for (int f = 0; f < nf; ++f) {
            if (!open[comp[f]] && vol[comp[f]] < 0) {
                std::swap(clean[f][1], clean[f][2]);
                flipped[f] ^= 1;
            }
        }
    }
    for (char c : flipped) rep.flipped_faces += c;
    rep.components = ncomp;
    if (ncomp > 1 && !opts.allow_multi) {
        fail(ErrorCode::MultiComponent,
             "non-single-component accepted only with flag --allow-multi");
    }

    TriMesh m;
    m.pos_ = std::move(positions);
    m.faces_ = std::move(clean);
    m.face_comp_ = std::move(comp);
    m.components_ = ncomp;

    // Twins.
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(static_cast<std::size_t>(nf) * 3);
    for (int h = 0; h < 3 * nf; ++h) {
        if (!directed.emplace(key(m.origin(h), m.target(h)), h).second)
            fail(ErrorCode::NonManifold, "duplicate directed edge");
    }
    m.twin_.assign(3 * nf, -1);
    m.he_edge_.assign(3 * nf, -1);
    m.closed_ = true;
    for (int h = 0; h < 3 * nf; ++h) {
        auto it = directed.find(key(m.target(h), m.origin(h)));
        if (it != directed.end()) {
            m.twin_[h] = it->second;
        } else {
            m.closed_ = false;
        }
        if (m.twin_[h] < 0 || h < m.twin_[h]) {
            int e = static_cast<int>(m.edges_.size());
            m.edges_.push_back({m.origin(h), m.target(h), h});
            m.he_edge_[h] = e;
            if (m.twin_[h] >= 0) m.he_edge_[m.twin_[h]] = e;
        }
    }

    // Vertex -> faces and vertex -> neighbours (CSR).
    m.vf_off_.assign(nv + 1, 0);
    for (const Face& f : m.faces_)
        for (int v : f) ++m.vf_off_[v + 1];
    std::partial_sum(m.vf_off_.begin(), m.vf_off_.end(), m.vf_off_.begin());
    m.vf_.resize(m.vf_off_[nv]);
    {
        std::vector<int> fill(m.vf_off_.begin(), m.vf_off_.end() - 1);
        for (int f = 0; f < nf; ++f)
            for (int v : m.faces_[f]) m.vf_[fill[v]++] = f;
    }
    m.vv_off_.assign(nv + 1, 0);
    for (const Edge& e : m.edges_) {
        ++m.vv_off_[e.v0 + 1];
        ++m.vv_off_[e.v1 + 1];
    }
    std::partial_sum(m.vv_off_.begin(), m.vv_off_.end(), m.vv_off_.begin());
    m.vv_.resize(m.vv_off_[nv]);
    {
        std::vector<int> fill(m.vv_off_.begin(), m.vv_off_.end() - 1);
        for (const Edge& e : m.edges_) {
            m.vv_[fill[e.v0]++] = e.v1;
            m.vv_[fill[e.v1]++] = e.v0;
        }
    }
    m.boundary_v_.assign(nv, 0);
    for (int h = 0; h < 3 * nf; ++h) {
        if (m.twin_[h] < 0) {
            m.boundary_v_[m.origin(h)] = 1;
            m.boundary_v_[m.target(h)] = 1;
        }
    }

    // Faces around each vertex must form a single fan.
    for (int v = 0; v < nv; ++v) {
        auto fs = m.vertex_faces(v);
        if (fs.size() < 2) continue;
        std::vector<int> seen;
        seen.reserve(fs.size());
        std::vector<int> stack{fs[0]};
        while (!stack.empty()) {
            int f = stack.back();
            stack.pop_back();
            if (std::find(seen.begin(), seen.end(), f) != seen.end()) continue;
            seen.push_back(f);
            for (int k = 0; k < 3; ++k) {
                int h = 3 * f + k;
                if (m.origin(h) != v && m.target(h) != v) continue;
                if (m.twin_[h] >= 0) stack.push_back(m.twin_[h] / 3);
            }
        }
        if (seen.size() != fs.size())
            fail(ErrorCode::NonManifold, "non-manifold vertex " + std::to_string(v));
    }

    if (report) *report = rep;
    return m;
}

void TriMesh::set_positions(std::vector<Vec3> p) {
    require(p.size() == pos_.size(), ErrorCode::InvalidArgument,
            "position count mismatch");
    pos_ = std::move(p);
}

double TriMesh::face_area(int f) const { return tri_area(pos_, faces_[f]); }

Vec3 TriMesh::face_normal(int f) const {
    const Face& t = faces_[f];
    Vec3 n = (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (int f = 0; f < num_faces(); ++f) a += face_area(f);
    return a;
}

double TriMesh::mean_edge_length() const {
    if (edges_.empty()) return 0.0;
    double s = 0.0;
    for (const Edge& e : edges_) s += (pos_[e.v1] - pos_[e.v0]).norm();
    return s / static_cast<double>(edges_.size());
}

Vec3 TriMesh::centroid() const {
    Vec3 c = Vec3::Zero();
    if (pos_.empty()) return c;
    for (const Vec3& p : pos_) c += p;
    return c / static_cast<double>(pos_.size());
}

int TriMesh::euler_characteristic() const {
    int used = 0;
    for (int v = 0; v < num_vertices(); ++v) used += vf_off_[v + 1] > vf_off_[v];
    return used - num_edges() + num_faces();
}

}  // namespace mcf
