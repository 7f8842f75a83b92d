#include "mcflab/quadrature.hpp"

#include <cmath>

#include "mcflab/error.hpp"
#include "mcflab/types.hpp"

namespace mcf {

namespace {

GaussRule build_rule(int n) {
    GaussRule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.x[n - 1 - i] = x;
        r.w[n - 1 - i] = 2 / ((1 - x * x) * dp * dp);
    }
    return r;
}

}  // namespace

const GaussRule& gauss_legendre_rule(int n) {
    static const std::vector<GaussRule> rules = [] {
        std::vector<GaussRule> out(65);
        for (int k = 1; k <= 64; ++k) out[k] = build_rule(k);
        return out;
    }();
    require(n >= 1 && n <= 64, ErrorCode::InvalidArgument, "Gauss rule order out of range");
    return rules[n];
}

}  // namespace mcf
