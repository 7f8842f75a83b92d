#include <gtest/gtest.h>

#include <cmath>

#include "mcflab/primitives.hpp"
#include "mcflab/sheets.hpp"

using namespace mcf;

namespace {

TriMesh radial(const TriMesh& ref, const std::function<double(const Vec3&)>& radius) {
    return transformed(ref, [&](const Vec3& p) { return Vec3(p.normalized() * radius(p)); });
}

TriMesh tilted_sphere(int level, double r) {
    Eigen::AngleAxisd rot(0.3, Vec3(1, 2, 3).normalized());
    return transformed(icosphere(level, r), [&](const Vec3& p) { return Vec3(rot * p); });
}

std::vector<char> box_mask(const TriMesh& m, double half) {
    std::vector<char> mask(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        const Vec3& p = m.position(v);
        mask[v] = std::abs(p.x()) <= half && std::abs(p.y()) <= half;
    }
    return mask;
}

double plane_graph_ratio(double eps) {
    const double half = 2.0, dt = 1e-3;
    const int n = 40, steps = 20;
    auto plus = rmcf_plane_graph(half, n, [eps](double x, double y) {
        return eps * (1 + 0.5 * (x * x - 2) + 0.3 * x * y);
    }, dt, steps);
    auto minus = rmcf_plane_graph(half, n, [eps](double x, double) {
        return -eps * (0.5 + 0.2 * x);
    }, dt, steps);
    TriMesh ref = plane_patch(half, n);
    auto mask = box_mask(ref, 1.5);
    return linearized_residual(ref, compute_geometry(ref), plus, minus, dt, &mask).ratio;
}

}  // namespace

TEST(Sheets, IdenticalTargetIsOneFlatSheet) {
    TriMesh ref = icosphere(3, 2.0);
    SheetBundle b = decompose_sheets(ref, ref, 0.0, 10.0, {});
    EXPECT_EQ(b.m, 1);
    EXPECT_TRUE(b.dropped.empty());
    for (int v : b.mask_indices()) EXPECT_NEAR(b.heights[0][v], 0.0, 1e-12);
}

TEST(Sheets, TwoParallelPlanes) {
    const double h = 0.05;
    TriMesh target = merge({plane_patch(1.0, 7, -h), plane_patch(1.0, 7, h)});
    TriMesh ref = plane_patch(0.9, 10);
    SheetBundle b = decompose_sheets(target, ref, 0.0, 10.0, {});
    ASSERT_EQ(b.m, 2);
    HeightDifference d = height_difference(b, 0);
    for (int v : b.mask_indices()) {
        EXPECT_NEAR(b.heights[0][v], -h, 1e-12);
        EXPECT_NEAR(d.u[v], 2 * h, 1e-12);
        EXPECT_NEAR(d.w[v], 1.0, 1e-12);
    }
}

TEST(Sheets, ConcentricSpheres) {
    TriMesh target = merge({icosphere(4, 2.01), icosphere(4, 1.99)});
    TriMesh ref = tilted_sphere(3, 2.0);
    SheetBundle b = decompose_sheets(target, ref, 0.0, 10.0, {});
    ASSERT_EQ(b.m, 2);
    HeightDifference d = height_difference(b, 0);
    for (int v : b.mask_indices()) EXPECT_NEAR(d.u[v], 0.02, 0.02 * 0.05);
}

TEST(Sheets, VaryingGapNormalisesToRatio) {
    TriMesh ref = icosphere(3, 2.0);
    auto gap = [](const Vec3& p) { return 0.01 * (1.5 + 0.25 * p.z()); };
    TriMesh outer = radial(ref, [&](const Vec3& p) { return 2 + gap(p) / 2; });
    TriMesh inner = radial(ref, [&](const Vec3& p) { return 2 - gap(p) / 2; });
    SheetBundle b = decompose_sheets(merge({outer, inner}), ref, 0.0, 10.0, {});
    ASSERT_EQ(b.m, 2);
    const int x0 = 3;
    HeightDifference d = height_difference(b, x0);
    EXPECT_EQ(d.w[x0], 1.0);
    for (int v : b.mask_indices()) {
        double expected = gap(ref.position(v)) / gap(ref.position(x0));
        EXPECT_NEAR(d.w[v], expected, 1e-3 * expected);
    }
}

TEST(Sheets, NormalisedDifferenceIgnoresScale) {
    TriMesh ref = icosphere(3, 2.0);
    TriMesh target = merge({radial(ref, [](const Vec3& p) { return 2.02 + 0.003 * p.x(); }),
                            radial(ref, [](const Vec3&) { return 1.99; })});
    SheetBundle b = decompose_sheets(target, ref, 0.0, 10.0, {});
    HeightDifference d = height_difference(b, 7);
    for (double c : {1e-3, 0.5, 7.0}) {
        SheetBundle s = b;
        for (auto& sheet : s.heights)
            for (double& x : sheet) x *= c;
        HeightDifference ds = height_difference(s, 7);
        for (int v : b.mask_indices()) EXPECT_NEAR(ds.w[v], d.w[v], 1e-14 * std::abs(d.w[v]));
    }
}

TEST(Sheets, RoundTripReproducesTarget) {
    TriMesh ref = icosphere(3, 2.0);
    TriMesh target = radial(ref, [](const Vec3& p) { return 2.0 + 0.01 * p.y(); });
    SheetBundle b = decompose_sheets(target, ref, 0.0, 10.0, {});
    ASSERT_EQ(b.m, 1);
    MeshGeometry g = compute_geometry(ref);
    const double h = ref.mean_edge_length();
    for (int v : b.mask_indices()) {
        Vec3 x = ref.position(v) + b.heights[0][v] * g.normal(v);
        EXPECT_LE((x - target.position(v)).norm(), h * h);
    }
}

TEST(Sheets, MaskExcludesSingularNeighbourhoodAndOutside) {
    TriMesh ref = plane_patch(2.0, 20);
    TriMesh target = plane_patch(2.0, 9, 0.1);
    Vec3 s(0.5, 0.0, 0.0);
    SheetBundle b = decompose_sheets(target, ref, 0.4, 1.5, {s});
    for (int v = 0; v < ref.num_vertices(); ++v) {
        const Vec3& p = ref.position(v);
        bool expected = p.norm() < 1.5 && (p - s).norm() >= 0.4;
        EXPECT_EQ(static_cast<bool>(b.mask[v]), expected) << v;
    }
}

TEST(Sheets, SheetCountChangeIsAnError) {
    TriMesh target = merge({plane_patch(1.0, 8, 0.0), plane_patch(0.3, 4, 0.1)});
    TriMesh ref = plane_patch(0.9, 12, 0.05);
    try {
        decompose_sheets(target, ref, 0.0, 10.0, {});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Inconsistent);
        EXPECT_NE(std::string(e.what()).find("vertex"), std::string::npos);
    }
}

TEST(Sheets, GrazingHitsAreDropped) {
    const double tilt = 1.5;
    TriMesh wall = transformed(plane_patch(0.5, 4), [&](const Vec3& p) {
        double r = p.x() + 0.5;
        return Vec3(0.31 + r * std::cos(tilt), p.y(), 0.2 + r * std::sin(tilt));
    });
    TriMesh target = merge({plane_patch(1.2, 9, 0.1), wall});
    TriMesh ref = plane_patch(1.0, 40);
    SheetBundle b = decompose_sheets(target, ref, 0.0, 10.0, {});
    EXPECT_EQ(b.m, 1);
    ASSERT_FALSE(b.dropped.empty());
    for (int v : b.dropped) {
        const Vec3& p = ref.position(v);
        EXPECT_GE(p.x(), 0.3);
        EXPECT_LE(p.x(), 0.39);
        EXPECT_LE(std::abs(p.y()), 0.5 + 1e-12);
        EXPECT_FALSE(b.mask[v]);
    }
}

TEST(Sheets, SingleSheetHasNoHeightDifference) {
    TriMesh ref = plane_patch(1.0, 4);
    SheetBundle b = decompose_sheets(ref, ref, 0.0, 10.0, {});
    EXPECT_THROW(height_difference(b, 0), Error);
}

TEST(Multiplicity, SinglePlane) {
    Multiplicity m = multiplicity_at({plane_patch(2.0, 16)}, Vec3(0.1, -0.2, 0), {0.5, 0.2, 0.1});
    EXPECT_EQ(m.m, 1);
    for (double t : m.theta) EXPECT_NEAR(t, 1.0, 0.05);
}

TEST(Multiplicity, DoublePlaneFromMidsurface) {
    const double gap = 1e-3;
    TriMesh two = merge({plane_patch(2.0, 16, -gap / 2), plane_patch(2.0, 16, gap / 2)});
    Multiplicity m = multiplicity_at({two}, Vec3::Zero(), {0.5, 0.2, 0.1});
    EXPECT_EQ(m.m, 2);
    for (double t : m.theta) EXPECT_NEAR(t, 2.0, 0.05);
}

TEST(Multiplicity, SpherePointIsOne) {
    Multiplicity m = multiplicity_at({icosphere(5)}, icosphere(5).position(0), {0.1, 0.05});
    EXPECT_EQ(m.m, 1);
    EXPECT_LT(m.confidence, 0.05);
}

TEST(Multiplicity, StableUnderRefinement) {
    for (auto make : {+[](int n) { return plane_patch(1.0, n); },
                      +[](int n) {
                          return merge({plane_patch(1.0, n, -1e-3), plane_patch(1.0, n, 1e-3)});
                      }}) {
        int m8 = multiplicity_at({make(8)}, Vec3::Zero(), {0.3, 0.1}).m;
        int m16 = multiplicity_at({make(8), make(16)}, Vec3::Zero(), {0.3, 0.1}).m;
        EXPECT_EQ(m8, m16);
    }
    int s4 = multiplicity_at({icosphere(4)}, Vec3(0, 0, 1), {0.2, 0.1}).m;
    int s5 = multiplicity_at({icosphere(4), icosphere(5)}, Vec3(0, 0, 1), {0.2, 0.1}).m;
    EXPECT_EQ(s4, s5);
}

TEST(Multiplicity, OffSurfacePointIsIllDefined) {
    try {
        multiplicity_at({plane_patch(2.0, 16)}, Vec3(0, 0, 0.07), {0.1});
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("ill-defined"), std::string::npos);
    }
}

TEST(GraphGeometry, ZeroGraph) {
    TriMesh ref = tilted_sphere(3, 2.0);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u(ref.num_vertices(), 0.0);
    auto du = field_derivatives(ref, g, u);
    GraphQuantities q = graph_quantities(ref, g, u, du);
    std::vector<double> H = mean_curvature_of_graph(ref, g, u, du);
    for (int v = 0; v < ref.num_vertices(); ++v) {
        EXPECT_EQ(q.w[v], 1.0);
        EXPECT_EQ(q.nu[v], 1.0);
        EXPECT_NEAR(q.eta[v], ref.position(v).dot(g.normal(v)), 1e-15);
        EXPECT_NEAR(H[v], g.H(v), 1e-12);
    }
}

TEST(GraphGeometry, PlaneGraphOfLinearFunction) {
    TriMesh ref = plane_patch(1.0, 10);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v)
        u[v] = 0.3 * ref.position(v).x() - 0.2 * ref.position(v).y() + 0.1;
    auto du = field_derivatives(ref, g, u);
    GraphQuantities q = graph_quantities(ref, g, u, du);
    const double w = std::sqrt(1 + 0.09 + 0.04);
    for (int v = 0; v < ref.num_vertices(); ++v) {
        EXPECT_NEAR(q.w[v], w, 1e-12);
        EXPECT_NEAR(q.nu[v], w, 1e-12);
    }
}

TEST(GraphGeometry, OffsetSphereQuantities) {
    TriMesh ref = icosphere(4, 2.0);
    MeshGeometry g = compute_geometry(ref);
    for (double s : {0.1, 0.2, -0.1}) {
        std::vector<double> u(ref.num_vertices(), s);
        auto du = field_derivatives(ref, g, u);
        GraphQuantities q = graph_quantities(ref, g, u, du);
        for (int v = 0; v < ref.num_vertices(); ++v) {
            EXPECT_NEAR(q.nu[v], sqr(1 + s / 2), 5e-3);
            EXPECT_NEAR(q.eta[v], 2 + s, 5e-3);
        }
    }
}

TEST(GraphGeometry, PlaneGraphOfQuadratic) {
    TriMesh ref = plane_patch(1.0, 12);
    MeshGeometry g = compute_geometry(ref);
    auto qf = [](double x, double y) { return 0.2 * (x * x + 0.5 * y * y) + 0.1 * x * y; };
    std::vector<double> u(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v)
        u[v] = qf(ref.position(v).x(), ref.position(v).y());
    auto du = field_derivatives(ref, g, u);
    std::vector<double> H = mean_curvature_of_graph(ref, g, u, du);
    auto mask = box_mask(ref, 0.8);
    for (int v = 0; v < ref.num_vertices(); ++v) {
        if (!mask[v]) continue;
        double x = ref.position(v).x(), y = ref.position(v).y();
        double fx = 0.4 * x + 0.1 * y, fy = 0.2 * y + 0.1 * x;
        double fxx = 0.4, fyy = 0.2, fxy = 0.1;
        double W2 = 1 + fx * fx + fy * fy;
        double exact = -((1 + fy * fy) * fxx - 2 * fx * fy * fxy + (1 + fx * fx) * fyy) /
                       std::pow(W2, 1.5);
        EXPECT_NEAR(H[v], exact, 1e-10);
        EXPECT_NEAR(H[v], -0.6, 0.6 * 3 * (fx * fx + fy * fy) + 1e-12);
    }
}

TEST(GraphGeometry, OffsetSphereMeanCurvature) {
    TriMesh ref = icosphere(4, 2.0);
    MeshGeometry g = compute_geometry(ref);
    for (double s : {0.1, 0.2}) {
        std::vector<double> u(ref.num_vertices(), s);
        auto du = field_derivatives(ref, g, u);
        std::vector<double> H = mean_curvature_of_graph(ref, g, u, du);
        TriMesh lifted = transformed(ref, [&](const Vec3& p) { return Vec3(p * (2 + s) / 2); });
        MeshGeometry gl = compute_geometry(lifted);
        for (int v = 0; v < ref.num_vertices(); ++v) {
            EXPECT_NEAR(H[v], 2 / (2 + s), 0.03 * 2 / (2 + s));
            EXPECT_NEAR(H[v], gl.H(v), 0.03 * 2 / (2 + s));
        }
    }
}

TEST(GraphGeometry, TranslatedSphereAsGraph) {
    // p + (a z / 2) n is the sphere translated by a e_z up to O(a^2).
    const double a = 0.05;
    TriMesh ref = icosphere(4, 2.0);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v) u[v] = 0.5 * a * ref.position(v).z();
    auto du = field_derivatives(ref, g, u);
    std::vector<double> H = mean_curvature_of_graph(ref, g, u, du);
    std::vector<Vec3> pos(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v) pos[v] = ref.position(v) + u[v] * g.normal(v);
    TriMesh lifted = ref;
    lifted.set_positions(pos);
    MeshGeometry gl = compute_geometry(lifted);
    for (int v = 0; v < ref.num_vertices(); ++v) {
        EXPECT_NEAR(H[v], 1.0, 0.01);
        EXPECT_NEAR(H[v], gl.H(v), 0.01);
    }
}

TEST(Linearized, EqualGraphsGiveZero) {
    TriMesh ref = plane_patch(1.0, 8);
    std::vector<std::vector<double>> f(4, std::vector<double>(ref.num_vertices(), 0.01));
    LinearizedResidual r = linearized_residual(ref, compute_geometry(ref), f, f, 1e-3);
    EXPECT_EQ(r.r_norm, 0.0);
    EXPECT_EQ(r.ratio, 0.0);
}

TEST(Linearized, ExactGrowingMode) {
    const double eps = 1e-3, dt = 1e-3;
    auto plus = rmcf_plane_graph(1.0, 10, [eps](double, double) { return eps; }, dt, 10);
    for (std::size_t k = 0; k < plus.size(); ++k)
        EXPECT_NEAR(plus[k][0], eps * std::exp(0.5 * dt * k), 1e-15);
    std::vector<std::vector<double>> zero(plus.size(), std::vector<double>(plus[0].size(), 0.0));
    TriMesh ref = plane_patch(1.0, 10);
    LinearizedResidual r = linearized_residual(ref, compute_geometry(ref), plus, zero, dt);
    EXPECT_LE(r.ratio, 1e-3);
}

TEST(Linearized, RatioFallsWithAmplitude) {
    double r2 = plane_graph_ratio(1e-2);
    double r3 = plane_graph_ratio(1e-3);
    EXPECT_GE(r2 / r3, 5.0);
    double prev = r2;
    for (double eps : {5e-3, 2e-3}) {
        double r = plane_graph_ratio(eps);
        EXPECT_LE(r, 1.2 * prev);
        prev = r;
    }
}

TEST(Linearized, GraphLeavingTubeIsAnError) {
    TriMesh ref = icosphere(2, 2.0);
    std::vector<std::vector<double>> f(3, std::vector<double>(ref.num_vertices(), 0.0));
    f[2][5] = -3.0;
    EXPECT_THROW(linearized_residual(ref, compute_geometry(ref), f, f, 1e-3), Error);
}

TEST(Projection, NormalLineGivesRatioOne) {
    TriMesh ref = icosphere(3);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u1(ref.num_vertices()), u2(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v) {
        u1[v] = 0.01 * (1 + 0.2 * ref.position(v).x());
        u2[v] = 0.03;
    }
    ProjectionOptions o;
    o.theta_max = 0.0;
    o.samples = 50;
    EXPECT_NEAR(projection_bound_check(ref, g, u1, u2, o).worst, 1.0, 1e-9);
}

TEST(Projection, FlatSheetsFollowCosine) {
    TriMesh ref = plane_patch(1.0, 20);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u1(ref.num_vertices(), 0.01), u2(ref.num_vertices(), 0.04);
    ProjectionOptions o;
    o.theta_max = kPi / 6;
    o.fixed_angle = true;
    o.samples = 100;
    auto mask = box_mask(ref, 0.8);
    ProjectionCheck c = projection_bound_check(ref, g, u1, u2, o, &mask);
    EXPECT_NEAR(c.worst, std::cos(kPi / 6), 1e-12);
}

TEST(Projection, CurvedPatchStaysBelowTwo) {
    TriMesh ref = icosphere(4);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u1(ref.num_vertices()), u2(ref.num_vertices());
    std::vector<char> mask(ref.num_vertices());
    for (int v = 0; v < ref.num_vertices(); ++v) {
        const Vec3& p = ref.position(v);
        u1[v] = 0.01 * (1 + 0.3 * p.x() * p.y());
        u2[v] = 0.02 + 0.005 * p.y();
        mask[v] = p.z() > 0.5;
    }
    ProjectionOptions o;
    o.samples = 1000;
    ProjectionCheck c = projection_bound_check(ref, g, u1, u2, o, &mask);
    EXPECT_EQ(c.samples, 1000);
    EXPECT_LE(c.worst, 2.0);
    EXPECT_GT(c.worst, 0.5);
}

TEST(Projection, RejectsLargeC1Norm) {
    TriMesh ref = plane_patch(1.0, 8);
    MeshGeometry g = compute_geometry(ref);
    std::vector<double> u1(ref.num_vertices(), 0.0), u2(ref.num_vertices(), 0.6);
    EXPECT_THROW(projection_bound_check(ref, g, u1, u2), Error);
}

TEST(Sheets, JsonHasMaskAndHeights) {
    TriMesh target = merge({plane_patch(1.0, 5, -0.1), plane_patch(1.0, 5, 0.1)});
    SheetBundle b = decompose_sheets(target, plane_patch(0.5, 2), 0.0, 10.0, {Vec3(5, 5, 5)});
    std::string js = sheets_json(b);
    EXPECT_NE(js.find("\"m\": 2"), std::string::npos);
    EXPECT_NE(js.find("\"heights\""), std::string::npos);
    EXPECT_NE(js.find("\"singular\""), std::string::npos);
}
