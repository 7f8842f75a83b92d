#pragma once

#include <vector>

namespace mcf {

// Gauss-Legendre nodes and weights on [-1, 1], 1 <= n <= 64.
struct GaussRule {
    std::vector<double> x, w;
};

const GaussRule& gauss_legendre_rule(int n);

// Composite n-point Gauss-Legendre on [a, b].
template <class F>
double integrate(F&& f, double a, double b, int panels, int n = 8) {
    const GaussRule& r = gauss_legendre_rule(n);
    double h = (b - a) / panels, s = 0.0;
    for (int p = 0; p < panels; ++p) {
        double mid = a + (p + 0.5) * h;
        double part = 0.0;
        for (int k = 0; k < n; ++k) part += r.w[k] * f(mid + 0.5 * h * r.x[k]);
        s += part;
    }
    return 0.5 * h * s;
}

}  // namespace mcf
