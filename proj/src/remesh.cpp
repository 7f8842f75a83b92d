#include "mcflab/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>

#include "mcflab/bvh.hpp"
#include "mcflab/geometry.hpp"

namespace mcf {

namespace {

std::uint64_t ekey(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

struct Soup {
    std::vector<Vec3> pos;
    std::vector<Face> faces;
    std::vector<char> boundary;
};

double edge2(const Soup& s, int a, int b) { return (s.pos[a] - s.pos[b]).squaredNorm(); }

// One round of conforming 1:2 / 1:3 / 1:4 splits; returns the number of edges split.
int split_round(Soup& s, double max_len) {
    const double lim2 = max_len * max_len;
    std::unordered_map<std::uint64_t, int> mid;
    std::unordered_map<std::uint64_t, int> count;
    for (const Face& f : s.faces)
        for (int k = 0; k < 3; ++k) ++count[ekey(f[k], f[(k + 1) % 3])];
    std::vector<std::uint64_t> keys;
    for (const Face& f : s.faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a < b && edge2(s, a, b) > lim2) keys.push_back(ekey(a, b));
            if (a > b && edge2(s, a, b) > lim2 && count[ekey(a, b)] == 1) keys.push_back(ekey(a, b));
        }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (std::uint64_t k : keys) {
        int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xffffffffu);
        mid[k] = static_cast<int>(s.pos.size());
        s.pos.push_back(0.5 * (s.pos[a] + s.pos[b]));
        s.boundary.push_back(count[k] == 1);
    }
    if (keys.empty()) return 0;

    std::vector<Face> out;
    out.reserve(s.faces.size() * 2);
    for (const Face& f : s.faces) {
        int m[3];
        int n = 0;
        for (int k = 0; k < 3; ++k) {
            auto it = mid.find(ekey(f[k], f[(k + 1) % 3]));
            m[k] = it == mid.end() ? -1 : it->second;
            n += m[k] >= 0;
        }
        if (n == 0) {
            out.push_back(f);
        } else if (n == 3) {
            out.push_back({f[0], m[0], m[2]});
            out.push_back({m[0], f[1], m[1]});
            out.push_back({m[2], m[1], f[2]});
            out.push_back({m[0], m[1], m[2]});
        } else if (n == 1) {
            int k = m[0] >= 0 ? 0 : m[1] >= 0 ? 1 : 2;
            int a = f[k], b = f[(k + 1) % 3], c = f[(k + 2) % 3];
            out.push_back({a, m[k], c});
            out.push_back({m[k], b, c});
        } else {
            // The unmarked edge is (c, a) after rotation.
            int k = m[0] < 0 ? 1 : m[1] < 0 ? 2 : 0;
            int a = f[k], b = f[(k + 1) % 3], c = f[(k + 2) % 3];
            int mab = m[k], mbc = m[(k + 1) % 3];
            out.push_back({mab, b, mbc});
            if (edge2(s, a, mbc) < edge2(s, mab, c)) {
                out.push_back({a, mab, mbc});
                out.push_back({a, mbc, c});
            } else {
                out.push_back({a, mab, c});
                out.push_back({mab, mbc, c});
            }
        }
    }
    s.faces.swap(out);
    return static_cast<int>(keys.size());
}

class Collapser {
public:
    Collapser(Soup& s)
        : s_(s), alive_(s.faces.size(), 1), valive_(s.pos.size(), 1), vf_(s.pos.size()),
          normal_(s.pos.size(), Vec3::Zero()) {
        for (int f = 0; f < static_cast<int>(s.faces.size()); ++f) {
            const Face& t = s.faces[f];
            Vec3 c = (s.pos[t[1]] - s.pos[t[0]]).cross(s.pos[t[2]] - s.pos[t[0]]);
            for (int v : t) {
                vf_[v].push_back(f);
                normal_[v] += c;
            }
        }
        for (Vec3& n : normal_)
            if (n.norm() > 0) n.normalize();
    }

    int run(double min_len, double max_len, int min_vertices) {
        const double lo2 = min_len * min_len, hi2 = max_len * max_len;
        std::vector<std::pair<double, std::uint64_t>> cand;
        for (const Face& f : s_.faces)
            for (int k = 0; k < 3; ++k) {
                int a = f[k], b = f[(k + 1) % 3];
                double l = edge2(s_, a, b);
                if (a < b && l < lo2) cand.emplace_back(l, ekey(a, b));
            }
        std::sort(cand.begin(), cand.end());
        int live = 0;
        for (std::size_t v = 0; v < s_.pos.size(); ++v) live += !vf_[v].empty();
        int done = 0;
        for (const auto& [len, key] : cand) {
            if (live <= min_vertices) break;
            int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
            if (!valive_[a] || !valive_[b]) continue;
            if (edge2(s_, a, b) >= lo2) continue;
            if (try_collapse(a, b, hi2)) {
                ++done;
                --live;
            }
        }
        return done;
    }

    void compact() {
        std::vector<Face> kept;
        for (std::size_t f = 0; f < s_.faces.size(); ++f)
            if (alive_[f]) kept.push_back(s_.faces[f]);
        s_.faces.swap(kept);
    }

private:
    std::vector<int> ring(int v) const {
        std::vector<int> r;
        for (int f : vf_[v])
            for (int w : s_.faces[f])
                if (w != v) r.push_back(w);
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        return r;
    }

    bool try_collapse(int a, int b, double hi2) {
        if (s_.boundary[a] || s_.boundary[b]) return false;
        std::vector<int> shared;
        for (int f : vf_[a]) {
            const Face& t = s_.faces[f];
            if (std::find(t.begin(), t.end(), b) != t.end()) shared.push_back(f);
        }
        if (shared.size() != 2) return false;
        std::vector<int> ra = ring(a), rb = ring(b), common;
        std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(common));
        if (common.size() != 2) return false;
        // A tetrahedron-like neighbourhood would degenerate.
        if (ra.size() <= 3 || rb.size() <= 3) return false;

        // Midpoint lifted by the sagitta of the circular arc matching the end normals.
        Vec3 nm = normal_[a] + normal_[b];
        if (nm.norm() > 0) nm.normalize();
        const double sag = (normal_[b] - normal_[a]).dot(s_.pos[b] - s_.pos[a]) / 8;
        const Vec3 p = 0.5 * (s_.pos[a] + s_.pos[b]) + sag * nm;
        for (int v : {a, b}) {
            for (int f : vf_[v]) {
                if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
                Face t = s_.faces[f];
                Vec3 n0 = (s_.pos[t[1]] - s_.pos[t[0]]).cross(s_.pos[t[2]] - s_.pos[t[0]]);
                std::array<Vec3, 3> q;
                for (int k = 0; k < 3; ++k) q[k] = (t[k] == a || t[k] == b) ? p : s_.pos[t[k]];
                Vec3 n1 = (q[1] - q[0]).cross(q[2] - q[0]);
                if (n1.dot(n0) <= 0.5 * n0.norm() * n1.norm()) return false;
                for (int k = 0; k < 3; ++k)
                    if ((q[(k + 1) % 3] - q[k]).squaredNorm() > hi2) return false;
            }
        }
        for (int f : shared) alive_[f] = 0;
        for (int f : vf_[b]) {
            if (!alive_[f]) continue;
            for (int& w : s_.faces[f])
                if (w == b) w = a;
            vf_[a].push_back(f);
        }
        vf_[b].clear();
        valive_[b] = 0;
        std::vector<int> keep;
        for (int f : vf_[a])
            if (alive_[f] && std::find(keep.begin(), keep.end(), f) == keep.end()) keep.push_back(f);
        vf_[a] = keep;
        for (int c : common) {
            auto& l = vf_[c];
            l.erase(std::remove_if(l.begin(), l.end(), [&](int f) { return !alive_[f]; }), l.end());
        }
        s_.pos[a] = p;
        normal_[a] = nm;
        return true;
    }

    Soup& s_;
    std::vector<char> alive_;
    std::vector<char> valive_;
    std::vector<std::vector<int>> vf_;
    std::vector<Vec3> normal_;
};

TriMesh rebuild(const Soup& s) {
    std::vector<int> remap(s.pos.size(), -1);
    std::vector<Vec3> pos;
    std::vector<Face> faces = s.faces;
    for (Face& f : faces)
        for (int& v : f) {
            if (remap[v] < 0) {
                remap[v] = static_cast<int>(pos.size());
                pos.push_back(s.pos[v]);
            }
            v = remap[v];
        }
    BuildOptions o;
    o.allow_multi = true;
    o.degenerate_ratio = 0.0;
    return TriMesh::build(std::move(pos), std::move(faces), o);
}

void smooth(TriMesh& m, const TriMesh& reference, int passes, double lambda) {
    TriangleBVH bvh(reference);
    for (int pass = 0; pass < passes; ++pass) {
        std::vector<Vec3> n = vertex_normals(m);
        std::vector<Vec3> p = m.positions();
        for (int v = 0; v < m.num_vertices(); ++v) {
            if (m.is_boundary_vertex(v)) continue;
            auto nb = m.vertex_neighbors(v);
            if (nb.empty()) continue;
            Vec3 c = Vec3::Zero();
            for (int w : nb) c += m.position(w);
            Vec3 d = c / static_cast<double>(nb.size()) - m.position(v);
            d -= d.dot(n[v]) * n[v];
            p[v] = bvh.closest(m.position(v) + lambda * d).point;
        }
        m.set_positions(std::move(p));
    }
}

}  // namespace

EdgeRange edge_length_range(const TriMesh& mesh) {
    EdgeRange r{std::numeric_limits<double>::infinity(), 0.0};
    for (const Edge& e : mesh.edges()) {
        double l = (mesh.position(e.v1) - mesh.position(e.v0)).norm();
        r.min = std::min(r.min, l);
        r.max = std::max(r.max, l);
    }
    return r;
}

bool needs_remesh(const TriMesh& mesh, const RemeshOptions& o) {
    EdgeRange r = edge_length_range(mesh);
    return r.min < o.min_ratio * o.target || r.max > o.max_ratio * o.target;
}

TriMesh remesh(const TriMesh& mesh, const RemeshOptions& o, RemeshReport* report) {
    require(o.target > 0 && o.min_ratio < o.max_ratio, ErrorCode::InvalidArgument,
            "remesh thresholds must satisfy 0 < min < max");
    RemeshReport rep;
    rep.area_before = mesh.total_area();
    Soup s{mesh.positions(), mesh.faces(), std::vector<char>(mesh.num_vertices())};
    for (int v = 0; v < mesh.num_vertices(); ++v) s.boundary[v] = mesh.is_boundary_vertex(v);

    const double hi = o.max_ratio * o.target, lo = o.min_ratio * o.target;
    for (int round = 0; round < 8; ++round) {
        int n = split_round(s, hi);
        rep.splits += n;
        if (n == 0) break;
    }
    for (int round = 0; round < 4; ++round) {
        Collapser c(s);
        int n = c.run(lo, hi, o.min_vertices);
        c.compact();
        rep.collapses += n;
        if (n == 0) break;
    }
    TriMesh out = rebuild(s);
    if (o.smoothing_passes > 0) {
        const TriMesh surface = out;
        smooth(out, surface, o.smoothing_passes, o.smoothing);
    }
    rep.area_after = out.total_area();
    if (report) *report = rep;
    return out;
}

int count_self_intersections(const TriMesh& mesh, int limit) {
    TriangleBVH bvh(mesh);
    int hits = 0;
    for (int f = 0; f < mesh.num_faces() && hits < limit; ++f) {
        const Face& a = mesh.face(f);
        Box box;
        for (int v : a) box.grow(mesh.position(v));
        bvh.query(box, [&](int g) {
            if (g <= f) return;
            const Face& b = mesh.face(g);
            for (int u : a)
                for (int w : b)
                    if (u == w) return;
            if (triangles_intersect(mesh.position(a[0]), mesh.position(a[1]), mesh.position(a[2]),
                                    mesh.position(b[0]), mesh.position(b[1]), mesh.position(b[2])))
                ++hits;
        });
    }
    return hits;
}

}  // namespace mcf
