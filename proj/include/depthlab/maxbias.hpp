#pragma once

// Closed-form maximum-bias curves, breakdown points and the auxiliary
// functions of the location-scale breakdown fixed point.

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <fmt/format.h>

#include "depthlab/depth.hpp"
#include "depthlab/numerics.hpp"

namespace depthlab {

namespace detail {

inline void check_epsilon(double eps, double breakdown, const char* who) {
    if (!(eps >= 0.0)) throw DomainError(std::string(who) + ": epsilon must be >= 0");
    if (eps >= breakdown)
        throw DivergenceError(fmt::format("{}: epsilon {} reaches the breakdown point {:.10g}", who, eps, breakdown),
                              breakdown);
}

/// Phi^{-1}(a) for a curve argument that must stay below 1.
inline double bounded_quantile(double a, double breakdown, const char* who) {
    if (!(a < 1.0)) throw DivergenceError(std::string(who) + ": curve diverges", breakdown);
    const double v = std_normal_quantile(a);
    if (!std::isfinite(v)) throw DivergenceError(std::string(who) + ": curve diverges", breakdown);
    return v;
}

}  // namespace detail

inline double beta_constant() {
    const double q = std_normal_quantile(0.75);
    return q * q;
}

inline double scatter_breakdown() { return 1.0 / 3.0; }

inline double tukey_median_maxbias(double eps) {
    detail::check_epsilon(eps, 1.0 / 3.0, "tukey_median_maxbias");
    return detail::bounded_quantile((1.0 + eps) / (2.0 * (1.0 - eps)), 1.0 / 3.0, "tukey_median_maxbias");
}

inline double univ_median_maxbias(double eps) {
    detail::check_epsilon(eps, 0.5, "univ_median_maxbias");
    return detail::bounded_quantile(1.0 / (2.0 * (1.0 - eps)), 0.5, "univ_median_maxbias");
}

struct EigenPair {
    double l1;
    double lp;
    double beta;
};

/// Extreme eigenvalues of the deepest eigen-restricted matrix under point-mass contamination.
inline EigenPair scatter_eigen_bounds(double eps) {
    detail::check_epsilon(eps, scatter_breakdown(), "scatter_eigen_bounds");
    const double a = detail::bounded_quantile((3.0 - eps) / (4.0 * (1.0 - eps)), scatter_breakdown(),
                                              "scatter_eigen_bounds");
    const double b = std_normal_quantile((3.0 - 5.0 * eps) / (4.0 * (1.0 - eps)));
    return {a * a, b * b, beta_constant()};
}

inline double scatter_explosion_ratio(double eps) {
    const auto e = scatter_eigen_bounds(eps);
    return std::sqrt(e.l1) / std::sqrt(e.beta);
}

inline double scatter_implosion_ratio(double eps) {
    const auto e = scatter_eigen_bounds(eps);
    if (!(e.lp > 0)) throw DivergenceError("scatter_maxbias: implosion at breakdown", scatter_breakdown());
    const double v = std::sqrt(e.beta) / std::sqrt(e.lp);
    if (!std::isfinite(v)) throw DivergenceError("scatter_maxbias: implosion at breakdown", scatter_breakdown());
    return v;
}

inline double scatter_maxbias(double eps) {
    return std::max(scatter_explosion_ratio(eps), scatter_implosion_ratio(eps));
}

/// Explosion bias expressed as excess over the uncontaminated value.
inline double scatter_excess(double eps) { return scatter_explosion_ratio(eps) - 1.0; }

/// E Phi(t |Z|) for standard normal Z.
inline double g_function(double t) {
    if (!(t >= 0)) throw DomainError("g_function: t must be >= 0");
    if (t == 0) return 0.5;
    auto f = [t](double z) { return 2.0 * std_normal_pdf(z) * std_normal_cdf(t * z); };
    std::vector<double> breaks;
    // resolve the kink region of Phi(t z) near z ~ 1/t
    for (double s : {0.5, 1.0, 2.0, 4.0, 8.0})
        if (s / t < 12.0) breaks.push_back(s / t);
    return integrate(f, 0.0, 12.0, breaks, 1e-13);
}

inline double regdepth_maxbias(double eps) {
    detail::check_epsilon(eps, 1.0 / 3.0, "regdepth_maxbias");
    const double target = (1.0 + eps) / (2.0 * (1.0 - eps));
    if (eps == 0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (g_function(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw DivergenceError("regdepth_maxbias: no root below 1e8", 1.0 / 3.0);
    }
    boost::uintmax_t iterations = 100;
    const auto root = boost::math::tools::toms748_solve([target](double t) { return g_function(t) - target; }, lo, hi,
                                                        boost::math::tools::eps_tolerance<double>(44), iterations);
    return 0.5 * (root.first + root.second);
}

// ---------------------------------------------------------------------------
// Location-scale breakdown fixed point

inline double ls2_aux_h(double x, double y) { return std_normal_cdf(x) - std_normal_cdf(0.5 * (x + y)); }

/// Maximizer over x of ls2_aux_h(x, y).
inline double ls2_aux_argmax(double y) {
    return (y + 2.0 * std::sqrt(y * y + 6.0 * std::numbers::ln2)) / 3.0;
}

inline double ls2_fixed_point_map(double delta) {
    if (!(delta > 0 && delta < 0.5)) throw DomainError("ls2_fixed_point_map: delta must lie in (0,1/2)");
    const double y = std_normal_quantile(delta / (1.0 - delta));
    return (1.0 - delta) * ls2_aux_h(ls2_aux_argmax(y), y);
}

inline double ls2_breakdown() {
    double lo = 1e-6, hi = 1.0 / 3.0 - 1e-6;
    while (hi - lo > 1e-15) {
        const double mid = 0.5 * (lo + hi);
        if (mid - ls2_fixed_point_map(mid) < 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Exploding point-mass sequence

struct DepthLimitTrace {
    std::vector<double> r;
    std::vector<double> depth;
    double limit;
};

/// Point-mass depth of the scalar scatter l1 = r^2/4 as r grows through 10..10^4.
inline DepthLimitTrace pointmass_depth_limit(double eps) {
    if (!(eps > 0 && eps < 1)) throw DomainError("pointmass_depth_limit: epsilon must lie in (0,1)");
    DepthLimitTrace out;
    const Direction e(Vector::Ones(1));
    for (double r : {1e1, 1e2, 1e3, 1e4}) {
        const SpdMatrix gamma(Matrix::Constant(1, 1, 0.25 * r * r));
        out.r.push_back(r);
        out.depth.push_back(scatter_depth_pointmass(gamma, eps, r, e));
    }
    out.limit = out.depth.back();
    return out;
}

// ---------------------------------------------------------------------------
// Curve tables

struct MaxBiasCurve {
    std::string id;
    std::vector<double> epsilon;
    std::vector<double> values;
    double breakdown;
};

inline const std::vector<std::string>& curve_ids() {
    static const std::vector<std::string> ids = {"tukey",        "univ-median", "scatter-envelope",
                                                 "scatter-excess", "scatter-l1", "scatter-lp",
                                                 "regdepth"};
    return ids;
}

inline double curve_breakdown(const std::string& id) {
    if (id == "univ-median") return 0.5;
    if (id == "tukey" || id == "regdepth") return 1.0 / 3.0;
    if (id == "scatter-envelope" || id == "scatter-excess" || id == "scatter-l1" || id == "scatter-lp")
        return scatter_breakdown();
    throw DomainError("unknown curve id: " + id);
}

inline double curve_value(const std::string& id, double eps) {
    if (id == "tukey") return tukey_median_maxbias(eps);
    if (id == "univ-median") return univ_median_maxbias(eps);
    if (id == "scatter-envelope") return scatter_maxbias(eps);
    if (id == "scatter-excess") return scatter_excess(eps);
    if (id == "scatter-l1") return scatter_eigen_bounds(eps).l1;
    if (id == "scatter-lp") return scatter_eigen_bounds(eps).lp;
    if (id == "regdepth") return regdepth_maxbias(eps);
    throw DomainError("unknown curve id: " + id);
}

inline MaxBiasCurve curve_table(const std::string& id, const std::vector<double>& grid) {
    MaxBiasCurve c{id, {}, {}, curve_breakdown(id)};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0)) throw DomainError("curve_table: epsilon must be >= 0");
        if (grid[i] >= c.breakdown)
            throw DivergenceError(fmt::format("curve_table: epsilon {} outside [0, {:.10g}) for curve {}", grid[i],
                                              c.breakdown, id),
                                  c.breakdown);
        if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("curve_table: grid must be increasing");
    }
    for (double eps : grid) {
        try {
            const double v = curve_value(id, eps);
            if (!std::isfinite(v)) continue;
            c.epsilon.push_back(eps);
            c.values.push_back(v);
        } catch (const DivergenceError&) {
            // numerically at the singularity; the row is omitted
        }
    }
    return c;
}

/// Grid a, a+step, ... up to b inclusive (with a small tolerance on the endpoint).
inline std::vector<double> epsilon_grid(double a, double b, double step) {
    if (!(step > 0) || !(b >= a)) throw DomainError("epsilon_grid: need step > 0 and b >= a");
    std::vector<double> g;
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= count; ++i) g.push_back(a + static_cast<double>(i) * step);
    return g;
}

inline void write_curve_csv(std::ostream& out, const MaxBiasCurve& c) {
    out << "epsilon,value,curve_id\n";
    for (std::size_t i = 0; i < c.values.size(); ++i)
        out << fmt::format("{:.10g},{:.17g},{}\n", c.epsilon[i], c.values[i], c.id);
    out << fmt::format("# breakdown={:.17g}\n", c.breakdown);
}

}  // namespace depthlab
