#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mcflab/types.hpp"

namespace mcf {

enum class SurfaceKind { Plane, Torus, Sphere };
enum class KernelMode { Spectral, Parametrix };

const char* to_string(SurfaceKind s);

struct HeatKernelModel {
    SurfaceKind surface = SurfaceKind::Plane;
    // Torus periods; torus and plane points use the x and y coordinates.
    double period_x = 2 * kPi;
    double period_y = 2 * kPi;
    KernelMode mode = KernelMode::Spectral;
    int order = 0;
    int max_truncation = 4000;
    // Harmonic radius; NaN means the injectivity radius of the model.
    double rho0 = std::numeric_limits<double>::quiet_NaN();

    void validate() const;
    double harmonic_radius() const;
};

double geodesic_distance(const HeatKernelModel& m, const Vec3& x, const Vec3& y);

// Smallest L >= 8 with (2L + 3) e^{-L(L+1) t} < 1e-14.
int sphere_truncation(double t, int max_truncation = 4000);

// Exact kernel: Gaussian on the plane, image or Fourier sums on the torus,
// Legendre series on the unit sphere.
double spectral_kernel(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t);

struct ParametrixValue {
    double value = 0.0;
    double u0 = 1.0;
    double u1 = 0.0;
    // t^{k+1-m/2}: the scale of the remainder, whose constant is not known.
    double error_budget = 0.0;
};

// (4 pi t)^{-1} e^{-d^2/4t} (u0 + k t u1). On the sphere u0 = (d / sin d)^{1/2}
// and u1 comes from the transport recursion by 16-point quadrature.
ParametrixValue parametrix_eval(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t,
                                int k);

double sphere_u0(double d);
double sphere_u1(double d);

// Kernel in the model's mode. Sphere times below the spectral range fall back
// to the order-1 parametrix.
double heat_kernel(const HeatKernelModel& m, const Vec3& x, const Vec3& y, double t);

class SingularCurve {
public:
    SingularCurve() = default;
    // Positions are linearly interpolated (and renormalised on the sphere).
    SingularCurve(const HeatKernelModel& m, std::vector<double> t, std::vector<Vec3> x,
                  double sigma);
    static SingularCurve stationary(const HeatKernelModel& m, const Vec3& x, double t0, double t1);

    Vec3 position(double t) const;
    double t_begin() const { return t_.front(); }
    double t_end() const { return t_.back(); }
    double sigma() const { return sigma_; }
    const std::vector<double>& times() const { return t_; }
    const std::vector<Vec3>& positions() const { return x_; }
    // s -> xi(t_begin + t_end - s).
    SingularCurve reversed() const;

private:
    std::vector<double> t_;
    std::vector<Vec3> x_;
    double sigma_ = 0.0;
    bool sphere_ = false;
};

// Piecewise-constant measure: density[i] on [edges[i], edges[i+1]).
struct MeasureSamples {
    std::vector<double> edges;
    std::vector<double> density;

    static MeasureSamples lebesgue(double a, double b, double c = 1.0);
    void validate() const;
    double density_at(double s) const;
    double mass() const;
};

// U(x, t) = int_{T_start}^t p(x, xi(s), t - s) d nu(s), geometric subdivision
// towards s = t (ratio 8, at most 80 levels), 16-point Gauss in log(t - s) on
// each level. Returns +inf on the curve where nu has density.
double singular_potential_U(const HeatKernelModel& m, const SingularCurve& curve,
                            const MeasureSamples& nu, const Vec3& x, double t, double T_start);

// U and its gradient; plane only.
double singular_potential_grad(const HeatKernelModel& m, const SingularCurve& curve,
                               const MeasureSamples& nu, const Vec3& x, double t,
                               double T_start, Vec3& grad);

using SpaceTimeField = std::function<double(const Vec3&, double)>;

struct BackwardVOptions {
    double r_min = 1e-4;
    double r_max = 1e-2;
    int radii = 9;
    int angles = 4;
    int times = 5;
};

// v = k U(x, T0 + T1 - t; reversed curve, Lebesgue on [T0, T1]), with k the
// largest scale keeping v <= log(1/r) on the validation annulus.
struct BackwardV {
    HeatKernelModel model;
    SingularCurve curve;
    SingularCurve reversed;
    MeasureSamples lebesgue;
    double t_lo = 0.0, t_hi = 0.0;
    double gamma = 0.75;
    double k = 0.0;
    // min v / log(1/r) - gamma and 1 - max v / log(1/r) on the annulus.
    double lower_margin = 0.0;
    double upper_margin = 0.0;
    // The same for r |grad v| (plane only, NaN otherwise).
    double grad_lower_margin = std::numeric_limits<double>::quiet_NaN();
    double grad_upper_margin = std::numeric_limits<double>::quiet_NaN();

    double value(const Vec3& x, double t) const;
    double value(const Vec3& x, double t, Vec3& grad) const;
    double V(const Vec3& x, double t) const;
};

BackwardV backward_v(const HeatKernelModel& m, const SingularCurve& curve, double t_lo,
                     double t_hi, double gamma, const BackwardVOptions& opts = {});

// zeta: delta on [t1, t2], r1 outside (t3, t4), quintic in between.
// eta: cubic smoothstep on [0, 1]; H(z) = int_0^z eta.
struct Cutoffs {
    double t1 = 0, t2 = 0, t3 = 0, t4 = 0, delta = 0, r1 = 0;

    double zeta(double t) const;
    double zeta_dt(double t) const;
    double zeta_slope_bound() const;
    static double eta(double z);
    static double eta_d(double z);
    static double H(double z);
    static double H_d(double z);
};

Cutoffs make_cutoffs(double delta, double t1, double t2, double t3, double t4, double r1);

struct AnnulusOptions {
    int radial_cells = 8;
    int angles = 16;
    int time_panels = 4;
};

struct AnnulusIntegrals {
    double J1 = 0.0;
    double J2 = 0.0;
};

// J1 = int int_{delta < r < R} u / (r |log r|), J2 = delta^{-1} int int_{delta/2 < r < delta} u,
// r the distance to xi(t); plane only.
AnnulusIntegrals annulus_integrals(const HeatKernelModel& m, const SingularCurve& curve,
                                   const SpaceTimeField& u, double delta, double R, double t1,
                                   double t2, const AnnulusOptions& opts = {});

struct AnnulusTrend {
    std::vector<double> delta, J1, J2;
    bool J1_decreasing = false;
    // max J2 <= 2 J2(first delta).
    bool J2_bounded = false;
};

AnnulusTrend annulus_trend(const HeatKernelModel& m, const SingularCurve& curve,
                           const SpaceTimeField& u, const std::vector<double>& deltas, double R,
                           double t1, double t2, const AnnulusOptions& opts = {});

struct TestFunction {
    std::function<double(double)> psi;
    // Support endpoints and kinks, increasing.
    std::vector<double> breaks;
};

// 1 on [a, b], cubic smoothstep tapers of width w outside.
TestFunction tapered_indicator(double a, double b, double w);

struct CutOptions {
    double rbar = 0.5;
    int angles = 8;
    double cell = 0.75;  // radial cell width in log r
    int time_panels = 3;
};

// I(rho) = |log rho|^{-2} int_{t1}^{t2} int_{Q_{r0}, rho <= r~ <= 1} u |grad v~|^2 with
// v~ the sum of the curves' v and r~ = e^{-v~}.
double i_functional(const std::vector<BackwardV>& vs, const SpaceTimeField& u, double rho,
                    double r0, double t1, double t2, const CutOptions& opts = {},
                    const std::vector<double>& extra_breaks = {});

struct Recovery {
    std::vector<double> rho;
    std::vector<double> raw;
    double value = 0.0;
    bool flagged = false;
};

// 2 |log rho|^{-2} int |grad w|^2 1{w <= |log rho|} psi u over the rbar-balls
// around the curves, w the sum of the given v, extrapolated to rho -> 0 by a
// quadratic in 1/|log rho| through the last three samples.
Recovery measure_recovery(const std::vector<BackwardV>& vs, const SpaceTimeField& u,
                          const std::vector<double>& rhos, const TestFunction& psi,
                          const CutOptions& opts = {});

struct Domination {
    bool holds = true;
    // margins[k][j] = mu_j - gamma^4 mu_k,j
    std::vector<std::vector<double>> margins;
};

Domination domination_check(const std::vector<double>& mu,
                            const std::vector<std::vector<double>>& mu_k, double gamma,
                            double tol = 1e-8);

}  // namespace mcf
