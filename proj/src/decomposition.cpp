#include "mcflab/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcflab/bvh.hpp"

namespace mcf {

namespace {

bool axis_test(const Vec3& axis, const Vec3& v0, const Vec3& v1, const Vec3& v2, const Vec3& h) {
    double p0 = axis.dot(v0), p1 = axis.dot(v1), p2 = axis.dot(v2);
    double r = h.x() * std::abs(axis.x()) + h.y() * std::abs(axis.y()) + h.z() * std::abs(axis.z());
    return std::min({p0, p1, p2}) > r || std::max({p0, p1, p2}) < -r;
}

}  // namespace

const char* to_string(VoxelLabel l) {
    switch (l) {
        case VoxelLabel::Outside: return "outside";
        case VoxelLabel::High: return "high";
        case VoxelLabel::Thick: return "thick";
        case VoxelLabel::Thin: return "thin";
        case VoxelLabel::NearSurface: return "near_surface";
    }
    return "outside";
}

bool triangle_box_overlap(const Vec3& center, const Vec3& half, const Vec3& a, const Vec3& b,
                          const Vec3& c) {
    const Vec3 v0 = a - center, v1 = b - center, v2 = c - center;
    const Vec3 e[3] = {v1 - v0, v2 - v1, v0 - v2};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            if (axis_test(Vec3::Unit(i).cross(e[k]), v0, v1, v2, half)) return false;
    for (int i = 0; i < 3; ++i) {
        if (std::min({v0[i], v1[i], v2[i]}) > half[i] || std::max({v0[i], v1[i], v2[i]}) < -half[i])
            return false;
    }
    return !axis_test(e[0].cross(e[1]), v0, v1, v2, half);
}

Vec3 BallDecomposition::voxel_center(int i, int j, int k) const {
    return center + Vec3(-R + (i + 0.5) * voxel, -R + (j + 0.5) * voxel, -R + (k + 0.5) * voxel);
}

BallDecomposition decompose(const TriMesh& mesh, const MeshGeometry& g, double eps, double R,
                            int res, const DecomposeOptions& opts) {
    require(eps > 0 && R > 0, ErrorCode::InvalidArgument, "eps and R must be positive");
    require(res >= 32, ErrorCode::InvalidArgument, "voxel_res must be at least 32");
    BallDecomposition d;
    d.eps = eps;
    d.R = R;
    d.res = res;
    d.center = opts.center;
    d.voxel = 2 * R / res;
    const double h = d.voxel;
    const double diag = std::sqrt(3.0) * h;
    if (eps < 2 * diag)
        fail(ErrorCode::InvalidArgument, "voxel resolution too coarse: eps < 2 voxel diagonals");
    const std::size_t n = static_cast<std::size_t>(res) * res * res;
    auto idx = [res](int i, int j, int k) {
        return (static_cast<std::size_t>(k) * res + j) * res + i;
    };
    d.labels.assign(n, VoxelLabel::Outside);
    for (int k = 0; k < res; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i)
                if ((d.voxel_center(i, j, k) - d.center).norm() < R) d.labels[idx(i, j, k)] = VoxelLabel::Thin;

    // S: high-curvature vertices inside the ball.
    const double thr = std::isnan(opts.curvature_threshold) ? 1.0 / eps : opts.curvature_threshold;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if ((mesh.position(v) - d.center).norm() < R && std::sqrt(g.A2(v)) > thr) d.S.push_back(v);

    auto cell = [&](double x, int axis) {
        return static_cast<int>(std::floor((x - (d.center[axis] - R)) / h));
    };
    auto clampi = [res](int x) { return std::clamp(x, 0, res - 1); };

    // H: within eps/2 of S.
    const double rh = eps / 2;
    for (int v : d.S) {
        const Vec3& p = mesh.position(v);
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
            lo[a] = clampi(cell(p[a] - rh, a));
            hi[a] = clampi(cell(p[a] + rh, a));
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    auto& l = d.labels[idx(i, j, k)];
                    if (l != VoxelLabel::Outside && (d.voxel_center(i, j, k) - p).norm() < rh)
                        l = VoxelLabel::High;
                }
    }
    // Surface band.
    const Vec3 half = Vec3::Constant(h / 2);
    for (const Face& f : mesh.faces()) {
        const Vec3 &a = mesh.position(f[0]), &b = mesh.position(f[1]), &c = mesh.position(f[2]);
        int lo[3], hi[3];
        for (int ax = 0; ax < 3; ++ax) {
            double mn = std::min({a[ax], b[ax], c[ax]}), mx = std::max({a[ax], b[ax], c[ax]});
            if (mx < d.center[ax] - R || mn > d.center[ax] + R) goto next_face;
            lo[ax] = clampi(cell(mn, ax));
            hi[ax] = clampi(cell(mx, ax));
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    auto& l = d.labels[idx(i, j, k)];
                    if (l != VoxelLabel::Thin) continue;
                    if (triangle_box_overlap(d.voxel_center(i, j, k), half, a, b, c))
                        l = VoxelLabel::NearSurface;
                }
    next_face:;
    }

    // Free voxels are still labelled Thin; find their 6-connected components.
    std::vector<int> comp(n, -1);
    std::vector<std::size_t> order;
    std::vector<std::size_t> comp_start;
    const int di[6] = {1, -1, 0, 0, 0, 0}, dj[6] = {0, 0, 1, -1, 0, 0}, dk[6] = {0, 0, 0, 0, 1, -1};
    for (std::size_t s = 0; s < n; ++s) {
        if (d.labels[s] != VoxelLabel::Thin || comp[s] >= 0) continue;
        const int id = static_cast<int>(comp_start.size());
        comp_start.push_back(order.size());
        comp[s] = id;
        order.push_back(s);
        for (std::size_t q = comp_start.back(); q < order.size(); ++q) {
            std::size_t u = order[q];
            int i = static_cast<int>(u % res), j = static_cast<int>((u / res) % res),
                k = static_cast<int>(u / (static_cast<std::size_t>(res) * res));
            for (int m = 0; m < 6; ++m) {
                int a = i + di[m], b = j + dj[m], c = k + dk[m];
                if (a < 0 || b < 0 || c < 0 || a >= res || b >= res || c >= res) continue;
                std::size_t w = idx(a, b, c);
                if (d.labels[w] == VoxelLabel::Thin && comp[w] < 0) {
                    comp[w] = id;
                    order.push_back(w);
                }
            }
        }
    }
    comp_start.push_back(order.size());

    // A component is thick when it holds a seed y with B(y, eps - diag) inside B_R \ (H u Sigma).
    const double r = eps - diag;
    TriangleBVH bvh(mesh);
    std::vector<Vec3> spts;
    for (int v : d.S) spts.push_back(mesh.position(v));
    auto is_seed = [&](const Vec3& y) {
        if ((y - d.center).norm() + r > R) return false;
        for (const Vec3& s : spts)
            if ((y - s).norm() < rh + r) return false;
        return mesh.num_faces() == 0 || bvh.closest(y).dist2 >= r * r;
    };
    for (std::size_t c = 0; c + 1 < comp_start.size(); ++c) {
        bool thick = false;
        for (std::size_t q = comp_start[c]; q < comp_start[c + 1] && !thick; ++q) {
            std::size_t u = order[q];
            int i = static_cast<int>(u % res), j = static_cast<int>((u / res) % res),
                k = static_cast<int>(u / (static_cast<std::size_t>(res) * res));
            thick = is_seed(d.voxel_center(i, j, k));
        }
        if (thick)
            for (std::size_t q = comp_start[c]; q < comp_start[c + 1]; ++q) d.labels[order[q]] = VoxelLabel::Thick;
    }

    const double vv = h * h * h;
    for (int k = 0; k < res; ++k)
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) {
                VoxelLabel l = d.labels[idx(i, j, k)];
                if (l == VoxelLabel::Outside) continue;
                if (l == VoxelLabel::High) d.vol_high += vv;
                if (l == VoxelLabel::Thick) d.vol_thick += vv;
                if (l == VoxelLabel::Thin) d.vol_thin += vv;
                if (l == VoxelLabel::NearSurface) d.vol_near += vv;
                // Voxels whose box straddles the sphere |x - c| = R.
                if ((d.voxel_center(i, j, k) - d.center).norm() > R - 0.5 * diag) ++d.boundary_voxels;
            }
    return d;
}

std::string encode_rle(const BallDecomposition& d) {
    std::string out = std::to_string(d.res) + "\n";
    std::size_t i = 0;
    while (i < d.labels.size()) {
        std::size_t j = i;
        while (j < d.labels.size() && d.labels[j] == d.labels[i]) ++j;
        out += std::to_string(static_cast<int>(d.labels[i])) + " " + std::to_string(j - i) + "\n";
        i = j;
    }
    return out;
}

double f_of_t(const TimeSeries& s, double t, double tau) {
    require(tau >= 0, ErrorCode::InvalidArgument, "tau must be nonnegative");
    require(!s.t.empty() && s.t.size() == s.value.size(), ErrorCode::InvalidArgument,
            "empty or mismatched series");
    const double a = t - tau;
    if (a < s.t.front() || t > s.t.back())
        fail(ErrorCode::Coverage, "window [" + std::to_string(a) + ", " + std::to_string(t) +
                                      "] not covered by samples");
    // Sample holding at a.
    auto it = std::upper_bound(s.t.begin(), s.t.end(), a);
    std::size_t k = static_cast<std::size_t>(it - s.t.begin()) - 1;
    double m = s.value[k];
    for (std::size_t i = k + 1; i < s.t.size() && s.t[i] <= t; ++i) m = std::min(m, s.value[i]);
    return m;
}

Selection select_times(const TimeSeries& f, double t0, double l, int count, double gap) {
    require(l > 0 && count > 0 && gap >= 0, ErrorCode::InvalidArgument, "bad selector arguments");
    require(f.t.size() == f.value.size(), ErrorCode::InvalidArgument, "mismatched series");
    Selection sel;
    const std::size_t n = f.t.size();
    std::size_t s = 0;
    while (s < n && !(f.t[s] > t0 + l && f.value[s] > 0)) ++s;
    if (s == n) {
        sel.message = "no positive start found";
        return sel;
    }
    while (static_cast<int>(sel.times.size()) < count) {
        if (s >= n || f.t[s] + l > f.t.back()) {
            sel.message = "search exhausted the sampled horizon";
            return sel;
        }
        std::size_t jump = n;
        for (std::size_t j = s; j < n && f.t[j] <= f.t[s] + l; ++j) {
            if (f.value[j] > 2 * f.value[s]) {
                jump = j;
                break;
            }
        }
        if (jump < n) {
            s = jump;
            continue;
        }
        sel.times.push_back(f.t[s]);
        sel.indices.push_back(static_cast<int>(s));
        const double next = f.t[s] + l + gap;
        while (s < n && f.t[s] < next) ++s;
    }
    sel.complete = true;
    return sel;
}

Selection select_times(const std::function<double(double)>& f, double t0, double l, int count,
                       double horizon, double dt, double gap) {
    require(dt > 0 && horizon > t0, ErrorCode::InvalidArgument, "bad sampling grid");
    TimeSeries s;
    const long m = static_cast<long>(std::floor((horizon - t0) / dt + 1e-9));
    for (long i = 0; i <= m; ++i) {
        double t = t0 + i * dt;
        s.t.push_back(t);
        s.value.push_back(f(t));
    }
    return select_times(s, t0, l, count, gap);
}

}  // namespace mcf
