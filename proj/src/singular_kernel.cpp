#include "mcflab/singular_kernel.hpp"

#include <algorithm>
#include <cmath>

#include "mcflab/error.hpp"
#include "mcflab/quadrature.hpp"
#include "mcflab/shrinker.hpp"

namespace mcf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double wrap(double d, double p) {
    d = std::fmod(d, p);
    if (d > p / 2) d -= p;
    if (d < -p / 2) d += p;
    return d;
}

// Heat kernel of the circle of length a.
double circle_kernel(double x, double a, double t) {
    double xw = wrap(x, a);
    int images = static_cast<int>(std::ceil(std::sqrt(160 * t) / a)) + 1;
    int modes = static_cast<int>(std::ceil(a / (2 * kPi) * std::sqrt(40 / t))) + 1;
    double s = 0.0;
    if (images <= modes) {
        for (int n = -images; n <= images; ++n) s += std::exp(-sqr(xw + n * a) / (4 * t));
        return s / std::sqrt(4 * kPi * t);
    }
    for (int m = 1; m <= modes; ++m) {
        double k = 2 * kPi * m / a;
        s += std::exp(-k * k * t) * std::cos(k * xw);
    }
    return (1 + 2 * s) / a;
}

double sphere_series(double c, double t, int L) {
    double p0 = 1.0, p1 = c;
    double s = 1.0 + 3 * std::exp(-2 * t) * c;
    for (int l = 2; l <= L; ++l) {
        double p2 = ((2 * l - 1) * c * p1 - (l - 1) * p0) / l;
        p0 = p1;
        p1 = p2;
        s += (2 * l + 1) * std::exp(-l * (l + 1.0) * t) * p2;
    }
    return s / (4 * kPi);
}

int truncation_or_zero(double t, int max_l) {
    for (int L = 8; L <= max_l; ++L)
        if ((2 * L + 3) * std::exp(-L * (L + 1.0) * t) < 1e-14) return L;
    return 0;
}

double sinc(double z) { return std::abs(z) < 1e-8 ? 1 - z * z / 6 : std::sin(z) / z; }

// Delta u0 for u0 = (s / sin s)^{1/2} as a radial function on the unit sphere.
double sphere_lap_u0(double s) {
    if (s == 0.0) return 1.0 / 3;
    double g1, g2;
    if (s < 1e-2) {
        double s2 = s * s;
        g1 = 0.5 * s * (1.0 / 3 + s2 / 45 + 2 * s2 * s2 / 945);
        g2 = 0.5 * (1.0 / 3 + s2 / 15 + 2 * s2 * s2 / 189);
    } else {
        g1 = 0.5 * (1 / s - 1 / std::tan(s));
        g2 = 0.5 * (1 / sqr(std::sin(s)) - 1 / (s * s));
    }
    return sphere_u0(s) * (g2 + g1 * g1 + g1 / std::tan(s));
}

Vec3 unit(const Vec3& v) {
    double n = v.norm();
    require(n > 0, ErrorCode::InvalidArgument, "sphere point at the origin");
    return v / n;
}

double parametrix_value(const HeatKernelModel& m, double d, double t, int k) {
    double u0 = 1.0, u1 = 0.0;
    if (m.surface == SurfaceKind::Sphere) {
        u0 = sphere_u0(d);
        if (k == 1) u1 = sphere_u1(d);
    }
    return std::exp(-d * d / (4 * t)) / (4 * kPi * t) * (u0 + k * t * u1);
}

// Point at distance r from c in direction theta.
Vec3 offset_point(const HeatKernelModel& m, const Vec3& c, double r, double theta) {
    if (m.surface != SurfaceKind::Sphere)
        return c + r * Vec3(std::cos(theta), std::sin(theta), 0.0);
    Vec3 n = unit(c);
    Vec3 a = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 e1 = (a - a.dot(n) * n).normalized();
    Vec3 e2 = n.cross(e1);
    return std::cos(r) * n + std::sin(r) * (std::cos(theta) * e1 + std::sin(theta) * e2);
}

double density_left(const MeasureSamples& nu, double s) {
    const auto& e = nu.edges;
    if (s <= e.front() || s > e.back()) return 0.0;
    auto it = std::lower_bound(e.begin(), e.end(), s);
    return nu.density[static_cast<std::size_t>(it - e.begin()) - 1];
}

bool zero_on(const MeasureSamples& nu, double s0, double s1) {
    if (density_left(nu, s1) > 0) return false;
    for (std::size_t i = 0; i < nu.density.size(); ++i)
        if (nu.density[i] > 0 && nu.edges[i] < s1 && nu.edges[i + 1] > s0) return false;
    return true;
}

double potential(const HeatKernelModel& m, const SingularCurve& curve, const MeasureSamples& nu,
                 const Vec3& x, double t, double T_start, Vec3* grad) {
    if (grad) grad->setZero();
    double lo = std::max(T_start, nu.edges.front());
    double hi = std::min(t, nu.edges.back());
    if (!(hi > lo)) return 0.0;
    const double tau_lo = t - hi, tau_hi = t - lo;
    const double r_now = geodesic_distance(m, x, curve.position(t));
    if (tau_lo == 0.0 && r_now == 0.0 && density_left(nu, t) > 0) return kInf;

    const GaussRule& g = gauss_legendre_rule(16);
    double total = 0.0;
    Vec3 gsum = Vec3::Zero();
    double b = tau_hi;
    bool done = false;
    for (int level = 0; level < 80 && !done; ++level) {
        double a = b / 8;
        if (a <= tau_lo) {
            a = tau_lo;
            done = true;
        }
        std::vector<double> cuts{a, b};
        for (double e : nu.edges) {
            double tau = t - e;
            if (tau > a && tau < b) cuts.push_back(tau);
        }
        std::sort(cuts.begin(), cuts.end());
        double level_sum = 0.0;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double pa = cuts[c], pb = cuts[c + 1];
            if (!(pb > pa)) continue;
            double dens = density_left(nu, t - pa);
            if (dens == 0.0) continue;
            double ua = std::log(pa), ub = std::log(pb);
            double half = 0.5 * (ub - ua), mid = 0.5 * (ua + ub);
            for (int q = 0; q < 16; ++q) {
                double tau = std::exp(mid + half * g.x[q]);
                Vec3 y = curve.position(t - tau);
                double p = heat_kernel(m, x, y, tau);
                double w = g.w[q] * half * tau * dens;
                level_sum += w * p;
                if (grad) gsum -= w * p * (x - y) / (2 * tau);
            }
        }
        total += level_sum;
        if (!done) {
            if (zero_on(nu, t - a, t))
                done = true;
            else if (r_now > 0 && r_now * r_now / (4 * a) > 60 &&
                     std::abs(level_sum) <= 1e-15 * std::abs(total))
                done = true;
        }
        b = a;
    }
    if (!done)
        fail(ErrorCode::Convergence,
             "singular potential quadrature did not converge within 80 levels");
    if (grad) *grad = gsum;
    return total;
}

double w_sum(const std::vector<BackwardV>& vs, const Vec3& x, double t, Vec3* grad) {
    double w = 0.0;
    if (grad) grad->setZero();
    for (const BackwardV& v : vs) {
        if (grad) {
            Vec3 g;
            w += v.value(x, t, g);
            *grad += g;
        } else {
            w += v.value(x, t);
        }
    }
    return w;
}

struct CutProblem {
    const std::vector<BackwardV>* vs = nullptr;
    const SpaceTimeField* u = nullptr;
    double L = 0.0;
    double rbar = 0.5;
    const CutOptions* opts = nullptr;
    bool nonneg = false;
    bool sandwich = false;
    double r0 = 0.0;
};

// int over the union of rbar-balls of |grad w|^2 1{w <= L} u at time t.
double cut_slice(const CutProblem& P, double t) {
    const auto& vs = *P.vs;
    const int nc = static_cast<int>(vs.size());
    std::vector<Vec3> centers(nc);
    for (int k = 0; k < nc; ++k) centers[k] = vs[k].curve.position(t);
    const GaussRule& g = gauss_legendre_rule(8);
    const int na = P.opts->angles;
    const double dtheta = 2 * kPi / na;
    const double gamma = vs.front().gamma;
    double total = 0.0;
    for (int k = 0; k < nc; ++k) {
        for (int j = 0; j < na; ++j) {
            double th = (j + 0.5) * dtheta;
            Vec3 e(std::cos(th), std::sin(th), 0.0);
            auto w_at = [&](double r) { return w_sum(vs, centers[k] + r * e, t, nullptr); };
            double r_out = P.rbar;
            if (w_at(r_out) > P.L) continue;
            double r_in = r_out;
            int steps = 0;
            while (true) {
                r_in = r_out / 4;
                if (++steps > 60)
                    fail(ErrorCode::Convergence, "cut radius not found on a ray");
                if (w_at(r_in) > P.L) break;
                r_out = r_in;
            }
            double lo = std::log(r_in), hi = std::log(r_out);
            for (int it = 0; it < 40; ++it) {
                double mid = 0.5 * (lo + hi);
                if (w_at(std::exp(mid)) > P.L)
                    lo = mid;
                else
                    hi = mid;
            }
            double s0 = hi, s1 = std::log(P.rbar);
            if (!(s1 > s0)) continue;
            int cells = std::max(1, static_cast<int>(std::ceil((s1 - s0) / P.opts->cell)));
            double hcell = (s1 - s0) / cells, ray = 0.0;
            for (int c = 0; c < cells; ++c) {
                double mid = s0 + (c + 0.5) * hcell;
                for (int q = 0; q < 8; ++q) {
                    double r = std::exp(mid + 0.5 * hcell * g.x[q]);
                    Vec3 x = centers[k] + r * e;
                    Vec3 gw;
                    double w = w_sum(vs, x, t, &gw);
                    if (w > P.L || (P.nonneg && w < 0)) continue;
                    double weight = 1.0;
                    if (nc > 1) {
                        double den = 0.0;
                        bool all_inside = true;
                        double lsum = 0.0;
                        for (int i = 0; i < nc; ++i) {
                            double ri = (x - centers[i]).norm();
                            if (ri < P.rbar) den += 1 / (ri * ri);
                            if (ri >= P.r0) all_inside = false;
                            lsum += std::log(1 / ri);
                        }
                        weight = (1 / (r * r)) / den;
                        if (P.sandwich && all_inside) {
                            double tol = 1e-6 * std::abs(lsum) + 1e-9;
                            if (w > lsum + tol || w < gamma * lsum - tol)
                                fail(ErrorCode::Precondition,
                                     "tilde v sandwich violated at t = " + std::to_string(t));
                        }
                    } else if (P.sandwich && r < P.r0) {
                        double l = std::log(1 / r);
                        double tol = 1e-6 * l + 1e-9;
                        if (w > l + tol || w < gamma * l - tol)
                            fail(ErrorCode::Precondition,
                                 "tilde v sandwich violated at t = " + std::to_string(t));
                    }
                    ray += g.w[q] * 0.5 * hcell * weight * gw.squaredNorm() * (*P.u)(x, t) * r * r;
                }
            }
            total += dtheta * ray;
        }
    }
    return total;
}

double time_integral(const std::vector<double>& breaks, int panels,
                     const std::function<double(double)>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (breaks[i + 1] > breaks[i]) s += integrate(f, breaks[i], breaks[i + 1], panels, 8);
    return s;
}

double smoothstep(double z) {
    z = std::clamp(z, 0.0, 1.0);
    return z * z * (3 - 2 * z);
}

double quintic(double s) { return s * s * s * (10 + s * (-15 + 6 * s)); }
double quintic_d(double s) { return 30 * s * s * (1 - s) * (1 - s); }

}  // namespace

const char* to_string(SurfaceKind s) {
    switch (s) {
        case SurfaceKind::Plane: return "plane";
        case SurfaceKind::Torus: return "torus";
        case SurfaceKind::Sphere: return "sphere";
    }
    return "?";
}

void HeatKernelModel::validate() const {
    require(order == 0 || order == 1, ErrorCode::InvalidArgument, "parametrix order must be 0 or 1");
    require(max_truncation >= 8, ErrorCode::InvalidArgument, "sphere truncation must be at least 8");
    require(std::isnan(rho0) || rho0 > 0, ErrorCode::InvalidArgument, "rho0 must be positive");
    if (surface == SurfaceKind::Torus)
        require(period_x > 0 && period_y > 0, ErrorCode::InvalidArgument,
                "torus periods must be positive");
}

double HeatKernelModel::harmonic_radius() const {
    if (!std::isnan(rho0)) return rho0;
    switch (surface) {
        case SurfaceKind::Plane: return kInf;
        case SurfaceKind::Torus: return std::min(period_x, period_y) / 2;
        case SurfaceKind::Sphere: return kPi;
    }
    return kInf;
}

double geodesic_distance(const HeatKernelModel& m, const Vec3& x, const Vec3& y) {
    switch (m.surface) {
        case SurfaceKind::Plane: return (x - y).norm();
        case SurfaceKind::Torus:
            return std::hypot(wrap(x.x() - y.x(), m.period_x), wrap(x.y() - y.y(), m.period_y));
        case SurfaceKind::Sphere: {
            Vec3 a = unit(x), b = unit(y);
            return std::atan2(a.cross(b).norm(), a.dot(b));
        }
    }
    return 0.0;
}

int sphere_truncation(double t, int max_truncation) {
    require(t > 0, ErrorCode::InvalidArgument, "t must be positive");
    int L = truncation_or_zero(t, max_truncation);
    if (L == 0)
        fail(ErrorCode::Precondition,
             "t too small for the configured max truncation " + std::to_string(max_truncation));
    return L;
}

double spectral_kernel(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t) {
    m.validate();
    require(t > 0, ErrorCode::InvalidArgument, "t must be positive");
    switch (m.surface) {
        case SurfaceKind::Plane:
            return std::exp(-(x - y).squaredNorm() / (4 * t)) / (4 * kPi * t);
        case SurfaceKind::Torus:
            return circle_kernel(x.x() - y.x(), m.period_x, t) *
                   circle_kernel(x.y() - y.y(), m.period_y, t);
        case SurfaceKind::Sphere: {
            int L = sphere_truncation(t, m.max_truncation);
            double c = std::clamp(unit(x).dot(unit(y)), -1.0, 1.0);
            return sphere_series(c, t, L);
        }
    }
    return 0.0;
}

double sphere_u0(double d) { return d == 0.0 ? 1.0 : std::sqrt(d / std::sin(d)); }

double sphere_u1(double d) {
    const GaussRule& g = gauss_legendre_rule(16);
    double s = 0.0;
    for (int q = 0; q < 16; ++q) {
        double sig = 0.5 * (g.x[q] + 1);
        s += 0.5 * g.w[q] * std::sqrt(sinc(d * sig)) * sphere_lap_u0(d * sig);
    }
    return sphere_u0(d) * s;
}

ParametrixValue parametrix_eval(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t,
                                int k) {
    m.validate();
    require(k == 0 || k == 1, ErrorCode::InvalidArgument, "parametrix order must be 0 or 1");
    require(t > 0 && t <= 1, ErrorCode::InvalidArgument, "t must lie in (0, 1]");
    double d = geodesic_distance(m, x, y);
    double rho = m.harmonic_radius();
    if (!(d < rho / 2))
        fail(ErrorCode::Precondition, "distance " + std::to_string(d) + " exceeds rho0/2");
    ParametrixValue out;
    if (m.surface == SurfaceKind::Sphere) {
        out.u0 = sphere_u0(d);
        out.u1 = sphere_u1(d);
    }
    out.value = std::exp(-d * d / (4 * t)) / (4 * kPi * t) * (out.u0 + k * t * out.u1);
    out.error_budget = std::pow(t, k);
    return out;
}

double heat_kernel(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t) {
    if (m.surface == SurfaceKind::Plane)
        return std::exp(-(x - y).squaredNorm() / (4 * t)) / (4 * kPi * t);
    if (m.mode == KernelMode::Parametrix) return parametrix_eval(m, x, y, t, m.order).value;
    if (m.surface == SurfaceKind::Sphere && truncation_or_zero(t, m.max_truncation) == 0) {
        double d = geodesic_distance(m, x, y);
        return d < kPi / 2 ? parametrix_value(m, d, t, 1) : 0.0;
    }
    return spectral_kernel(m, x, y, t);
}

SingularCurve::SingularCurve(const HeatKernelModel& m, std::vector<double> t, std::vector<Vec3> x,
                             double sigma)
    : t_(std::move(t)), x_(std::move(x)), sigma_(sigma), sphere_(m.surface == SurfaceKind::Sphere) {
    require(!t_.empty() && t_.size() == x_.size(), ErrorCode::InvalidArgument,
            "curve needs matching time and position samples");
    require(sigma_ >= 0, ErrorCode::InvalidArgument, "Lipschitz constant must be nonnegative");
    if (sphere_)
        for (Vec3& p : x_) p = unit(p);
    auto dist = [&](const Vec3& a, const Vec3& b) {
        return sphere_ ? geodesic_distance(m, a, b) : (a - b).norm();
    };
    for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
        require(t_[i + 1] > t_[i], ErrorCode::InvalidArgument, "curve samples must be time-sorted");
        double dt = t_[i + 1] - t_[i];
        double slack = 1e-12 * std::max(1.0, sigma_ * dt);
        if (dist(x_[i], x_[i + 1]) > sigma_ * dt + slack)
            fail(ErrorCode::InvalidArgument,
                 "Lipschitz bound violated between samples " + std::to_string(i) + " and " +
                     std::to_string(i + 1));
        if (sphere_) {
            double tm = t_[i] + dt / 2;
            Vec3 pm = position(tm);
            if (dist(x_[i], pm) > sigma_ * dt / 2 + slack || dist(pm, x_[i + 1]) > sigma_ * dt / 2 + slack)
                fail(ErrorCode::InvalidArgument, "Lipschitz bound violated after interpolation");
        }
    }
}

SingularCurve SingularCurve::stationary(const HeatKernelModel& m, const Vec3& x, double t0,
                                        double t1) {
    return SingularCurve(m, {t0, t1}, {x, x}, 0.0);
}

Vec3 SingularCurve::position(double t) const {
    if (t <= t_.front()) return x_.front();
    if (t >= t_.back()) return x_.back();
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - t_.begin()) - 1;
    double a = (t - t_[i]) / (t_[i + 1] - t_[i]);
    Vec3 p = (1 - a) * x_[i] + a * x_[i + 1];
    return sphere_ ? unit(p) : p;
}

SingularCurve SingularCurve::reversed() const {
    SingularCurve r = *this;
    double s = t_.front() + t_.back();
    std::reverse(r.t_.begin(), r.t_.end());
    std::reverse(r.x_.begin(), r.x_.end());
    for (double& v : r.t_) v = s - v;
    return r;
}

MeasureSamples MeasureSamples::lebesgue(double a, double b, double c) {
    MeasureSamples m{{a, b}, {c}};
    m.validate();
    return m;
}

void MeasureSamples::validate() const {
    require(edges.size() >= 2 && edges.size() == density.size() + 1, ErrorCode::InvalidArgument,
            "measure needs n + 1 edges for n densities");
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
        require(edges[i + 1] > edges[i], ErrorCode::InvalidArgument, "measure grid must increase");
    for (double d : density)
        require(std::isfinite(d) && d >= 0, ErrorCode::InvalidArgument,
                "measure densities must be nonnegative");
}

double MeasureSamples::density_at(double s) const {
    if (s < edges.front() || s >= edges.back()) return 0.0;
    auto it = std::upper_bound(edges.begin(), edges.end(), s);
    return density[static_cast<std::size_t>(it - edges.begin()) - 1];
}

double MeasureSamples::mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) m += density[i] * (edges[i + 1] - edges[i]);
    return m;
}

double singular_potential_U(const HeatKernelModel& m, const SingularCurve& curve,
                            const MeasureSamples& nu, const Vec3& x, double t, double T_start) {
    m.validate();
    nu.validate();
    require(t > T_start, ErrorCode::InvalidArgument, "need t > T_start");
    return potential(m, curve, nu, x, t, T_start, nullptr);
}

double singular_potential_grad(const HeatKernelModel& m, const SingularCurve& curve,
                               const MeasureSamples& nu, const Vec3& x, double t,
                               double T_start, Vec3& grad) {
    require(m.surface == SurfaceKind::Plane, ErrorCode::Precondition,
            "potential gradient is implemented on the plane only");
    nu.validate();
    require(t > T_start, ErrorCode::InvalidArgument, "need t > T_start");
    return potential(m, curve, nu, x, t, T_start, &grad);
}

double BackwardV::value(const Vec3& x, double t) const {
    double tr = curve.t_begin() + curve.t_end() - t;
    if (tr <= curve.t_begin()) return 0.0;
    return k * potential(model, reversed, lebesgue, x, tr, curve.t_begin(), nullptr);
}

double BackwardV::value(const Vec3& x, double t, Vec3& grad) const {
    require(model.surface == SurfaceKind::Plane, ErrorCode::Precondition,
            "gradient of v is implemented on the plane only");
    double tr = curve.t_begin() + curve.t_end() - t;
    if (tr <= curve.t_begin()) {
        grad.setZero();
        return 0.0;
    }
    double u = potential(model, reversed, lebesgue, x, tr, curve.t_begin(), &grad);
    grad *= k;
    return k * u;
}

double BackwardV::V(const Vec3& x, double t) const { return std::exp(-2 * value(x, t)); }

BackwardV backward_v(const HeatKernelModel& m, const SingularCurve& curve, double t_lo,
                     double t_hi, double gamma, const BackwardVOptions& opts) {
    m.validate();
    require(gamma > 0.5 && gamma < 1, ErrorCode::InvalidArgument, "gamma must lie in (1/2, 1)");
    require(curve.t_begin() < t_lo && t_lo < t_hi && t_hi < curve.t_end(),
            ErrorCode::InvalidArgument, "window must lie inside the curve samples");
    require(opts.r_min > 0 && opts.r_min < opts.r_max && opts.r_max < 1 && opts.radii >= 2 &&
                opts.angles >= 1 && opts.times >= 1,
            ErrorCode::InvalidArgument, "bad validation annulus");
    BackwardV out;
    out.model = m;
    out.curve = curve;
    out.reversed = curve.reversed();
    out.lebesgue = MeasureSamples::lebesgue(curve.t_begin(), curve.t_end());
    out.t_lo = t_lo;
    out.t_hi = t_hi;
    out.gamma = gamma;
    out.k = 1.0;

    struct Sample {
        double r, U, gradU;
    };
    std::vector<Sample> samples;
    const bool plane = m.surface == SurfaceKind::Plane;
    for (int it = 0; it < opts.times; ++it) {
        double t = opts.times == 1 ? t_lo : t_lo + (t_hi - t_lo) * it / (opts.times - 1);
        Vec3 c = curve.position(t);
        for (int ir = 0; ir < opts.radii; ++ir) {
            double r = opts.r_min * std::pow(opts.r_max / opts.r_min,
                                             static_cast<double>(ir) / (opts.radii - 1));
            for (int ia = 0; ia < opts.angles; ++ia) {
                Vec3 x = offset_point(m, c, r, 2 * kPi * (ia + 0.25) / opts.angles);
                Sample s{r, 0.0, 0.0};
                if (plane) {
                    Vec3 g;
                    s.U = out.value(x, t, g);
                    s.gradU = g.norm();
                } else {
                    s.U = out.value(x, t);
                }
                samples.push_back(s);
            }
        }
    }
    double k = kInf;
    for (const Sample& s : samples) {
        require(s.U > 0, ErrorCode::Precondition, "potential vanishes on the validation annulus");
        k = std::min(k, std::log(1 / s.r) / s.U);
    }
    out.k = k;
    double lo = kInf, hi = -kInf, glo = kInf, ghi = -kInf;
    for (const Sample& s : samples) {
        double q = k * s.U / std::log(1 / s.r);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
        if (plane) {
            double gq = k * s.gradU * s.r;
            glo = std::min(glo, gq);
            ghi = std::max(ghi, gq);
        }
    }
    out.lower_margin = lo - gamma;
    out.upper_margin = 1 - hi;
    if (plane) {
        out.grad_lower_margin = glo - gamma;
        out.grad_upper_margin = 1 - ghi;
    }
    bool ok = out.lower_margin >= 0 && (!plane || (out.grad_lower_margin >= 0 && out.grad_upper_margin >= 0));
    if (!ok) {
        double admissible = 0.0;
        std::vector<double> radii;
        for (const Sample& s : samples) radii.push_back(s.r);
        std::sort(radii.begin(), radii.end());
        radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
        for (double r : radii) {
            bool good = true;
            for (const Sample& s : samples) {
                if (s.r > r) continue;
                if (k * s.U / std::log(1 / s.r) < gamma) good = false;
                if (plane && (k * s.gradU * s.r < gamma || k * s.gradU * s.r > 1)) good = false;
            }
            if (!good) break;
            admissible = r;
        }
        fail(ErrorCode::Precondition,
             "gamma sandwich fails on the validation annulus; admissible radius " +
                 std::to_string(admissible));
    }
    return out;
}

Cutoffs make_cutoffs(double delta, double t1, double t2, double t3, double t4, double r1) {
    require(t3 < t1 && t1 < t2 && t2 < t4, ErrorCode::InvalidArgument,
            "need t3 < t1 < t2 < t4");
    require(0 < delta && delta < r1, ErrorCode::InvalidArgument, "need 0 < delta < r1");
    return Cutoffs{t1, t2, t3, t4, delta, r1};
}

double Cutoffs::zeta(double t) const {
    if (t <= t3 || t >= t4) return r1;
    if (t >= t1 && t <= t2) return delta;
    if (t < t1) return r1 + (delta - r1) * quintic((t - t3) / (t1 - t3));
    return delta + (r1 - delta) * quintic((t - t2) / (t4 - t2));
}

double Cutoffs::zeta_dt(double t) const {
    if (t <= t3 || t >= t4 || (t >= t1 && t <= t2)) return 0.0;
    if (t < t1) return (delta - r1) * quintic_d((t - t3) / (t1 - t3)) / (t1 - t3);
    return (r1 - delta) * quintic_d((t - t2) / (t4 - t2)) / (t4 - t2);
}

double Cutoffs::zeta_slope_bound() const { return 2 * r1 * (1 / (t1 - t3) + 1 / (t4 - t2)); }

double Cutoffs::eta(double z) { return smoothstep(z); }

double Cutoffs::eta_d(double z) { return z <= 0 || z >= 1 ? 0.0 : 6 * z * (1 - z); }

double Cutoffs::H(double z) {
    if (z <= 0) return 0.0;
    if (z >= 1) return z - 0.5;
    return z * z * z - 0.5 * z * z * z * z;
}

double Cutoffs::H_d(double z) { return eta(z); }

AnnulusIntegrals annulus_integrals(const HeatKernelModel& m, const SingularCurve& curve,
                                   const SpaceTimeField& u, double delta, double R, double t1,
                                   double t2, const AnnulusOptions& opts) {
    require(m.surface == SurfaceKind::Plane, ErrorCode::Precondition,
            "annulus integrals are implemented on the plane only");
    require(opts.radial_cells >= 8, ErrorCode::Precondition,
            "under-resolved annulus: need at least 8 radial cells");
    require(opts.angles >= 4 && opts.time_panels >= 1, ErrorCode::InvalidArgument,
            "bad angular or time resolution");
    require(0 < delta && delta < R && R < 1, ErrorCode::InvalidArgument, "need 0 < delta < R < 1");
    require(t1 < t2, ErrorCode::InvalidArgument, "need t1 < t2");
    const int na = opts.angles;
    const double dth = 2 * kPi / na;
    auto ring = [&](double t, double s0, double s1, bool first) {
        Vec3 c = curve.position(t);
        double sum = 0.0;
        for (int j = 0; j < na; ++j) {
            double th = (j + 0.5) * dth;
            Vec3 e(std::cos(th), std::sin(th), 0.0);
            sum += integrate(
                [&](double s) {
                    double r = std::exp(s);
                    double val = u(c + r * e, t);
                    return first ? val * r / std::abs(s) : val * r * r;
                },
                s0, s1, opts.radial_cells, 8);
        }
        return sum * dth;
    };
    AnnulusIntegrals out;
    out.J1 = integrate([&](double t) { return ring(t, std::log(delta), std::log(R), true); }, t1,
                       t2, opts.time_panels, 8);
    out.J2 = integrate([&](double t) { return ring(t, std::log(delta / 2), std::log(delta), false); },
                       t1, t2, opts.time_panels, 8) /
             delta;
    return out;
}

AnnulusTrend annulus_trend(const HeatKernelModel& m, const SingularCurve& curve,
                           const SpaceTimeField& u, const std::vector<double>& deltas, double R,
                           double t1, double t2, const AnnulusOptions& opts) {
    require(!deltas.empty(), ErrorCode::InvalidArgument, "empty delta sequence");
    AnnulusTrend out;
    for (double d : deltas) {
        AnnulusIntegrals a = annulus_integrals(m, curve, u, d, R, t1, t2, opts);
        out.delta.push_back(d);
        out.J1.push_back(a.J1);
        out.J2.push_back(a.J2);
    }
    out.J1_decreasing = true;
    for (std::size_t i = 0; i + 1 < out.J1.size(); ++i)
        if (!(out.J1[i + 1] < out.J1[i])) out.J1_decreasing = false;
    double mx = *std::max_element(out.J2.begin(), out.J2.end());
    out.J2_bounded = std::isfinite(mx) && mx <= 2 * out.J2.front();
    return out;
}

TestFunction tapered_indicator(double a, double b, double w) {
    require(a < b && w > 0, ErrorCode::InvalidArgument, "need a < b and w > 0");
    TestFunction f;
    f.psi = [a, b, w](double t) {
        if (t <= a - w || t >= b + w) return 0.0;
        if (t < a) return smoothstep((t - (a - w)) / w);
        if (t > b) return smoothstep(((b + w) - t) / w);
        return 1.0;
    };
    f.breaks = {a - w, a, b, b + w};
    return f;
}

double i_functional(const std::vector<BackwardV>& vs, const SpaceTimeField& u, double rho,
                    double r0, double t1, double t2, const CutOptions& opts,
                    const std::vector<double>& extra_breaks) {
    require(!vs.empty(), ErrorCode::InvalidArgument, "need at least one curve");
    require(rho > 0 && rho < 1 && r0 > 0 && r0 < 1 && t1 < t2, ErrorCode::InvalidArgument,
            "need 0 < rho < 1, 0 < r0 < 1 and t1 < t2");
    CutProblem P;
    P.vs = &vs;
    P.u = &u;
    P.L = std::abs(std::log(rho));
    P.rbar = r0;
    P.opts = &opts;
    P.nonneg = true;
    P.sandwich = true;
    P.r0 = r0;
    std::vector<double> breaks{t1, t2};
    for (double b : extra_breaks)
        if (b > t1 && b < t2) breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double s = time_integral(breaks, opts.time_panels, [&](double t) { return cut_slice(P, t); });
    return s / (P.L * P.L);
}

Recovery measure_recovery(const std::vector<BackwardV>& vs, const SpaceTimeField& u,
                          const std::vector<double>& rhos, const TestFunction& psi,
                          const CutOptions& opts) {
    require(!vs.empty(), ErrorCode::InvalidArgument, "need at least one curve");
    require(rhos.size() >= 3, ErrorCode::InvalidArgument, "need at least three rho samples");
    for (double r : rhos)
        require(r > 0 && r < 1, ErrorCode::InvalidArgument, "rho must lie in (0, 1)");
    require(psi.breaks.size() >= 2, ErrorCode::InvalidArgument, "test function needs a support");
    Recovery out;
    CutProblem P;
    P.vs = &vs;
    P.u = &u;
    P.rbar = opts.rbar;
    P.opts = &opts;
    for (double rho : rhos) {
        P.L = std::abs(std::log(rho));
        double s = time_integral(psi.breaks, opts.time_panels, [&](double t) {
            double p = psi.psi(t);
            return p == 0.0 ? 0.0 : p * cut_slice(P, t);
        });
        out.rho.push_back(rho);
        out.raw.push_back(2 * s / (P.L * P.L));
    }
    const std::size_t n = rhos.size();
    double h[3], y[3];
    for (int i = 0; i < 3; ++i) {
        h[i] = 1 / std::abs(std::log(rhos[n - 3 + i]));
        y[i] = out.raw[n - 3 + i];
    }
    out.value = extrapolate_to_zero(h, y);
    double two = y[2] - h[2] * (y[2] - y[1]) / (h[2] - h[1]);
    double scale = 0.0;
    for (double r : out.raw) scale = std::max(scale, std::abs(r));
    out.flagged = std::abs(out.value - two) > 0.2 * std::max(std::abs(out.value), scale) ||
                  out.value < -1e-8;
    return out;
}

Domination domination_check(const std::vector<double>& mu,
                            const std::vector<std::vector<double>>& mu_k, double gamma,
                            double tol) {
    Domination d;
    double g4 = std::pow(gamma, 4);
    for (const auto& row : mu_k) {
        require(row.size() == mu.size(), ErrorCode::InvalidArgument,
                "every recovery needs the same test functions");
        std::vector<double> m(row.size());
        for (std::size_t j = 0; j < row.size(); ++j) {
            m[j] = mu[j] - g4 * row[j];
            if (m[j] < -tol || row[j] < -tol) d.holds = false;
        }
        d.margins.push_back(std::move(m));
    }
    return d;
}

}  // namespace mcf
