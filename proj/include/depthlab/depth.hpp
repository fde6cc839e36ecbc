#pragma once

// Depth functions over empirical and analytic distributions.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "depthlab/dataset.hpp"
#include "depthlab/numerics.hpp"

namespace depthlab {

namespace detail {

/// Smallest number of vectors w_i with u.w_i >= 0 over all planar directions u.
/// The minimum is attained on open arcs between critical angles, so only arcs are visited.
inline long min_halfplane_count_2d(const std::vector<std::array<double, 2>>& w) {
    if (w.empty()) return 0;
    struct Event {
        double angle;
        int delta;
    };
    const double two_pi = 2.0 * std::numbers::pi;
    auto wrap = [&](double a) {
        a = std::fmod(a, two_pi);
        return a < 0 ? a + two_pi : a;
    };
    std::vector<Event> ev;
    ev.reserve(2 * w.size());
    std::vector<double> angles(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double a = std::atan2(w[i][1], w[i][0]);
        angles[i] = a;
        ev.push_back({wrap(a - 0.5 * std::numbers::pi), +1});
        ev.push_back({wrap(a + 0.5 * std::numbers::pi), -1});
    }
    std::sort(ev.begin(), ev.end(), [](const Event& x, const Event& y) { return x.angle < y.angle; });

    constexpr double tol = 1e-12;
    std::vector<Event> groups;
    for (const auto& e : ev) {
        if (!groups.empty() && e.angle - groups.back().angle < tol)
            groups.back().delta += e.delta;
        else
            groups.push_back(e);
    }
    if (groups.size() > 1 && groups.front().angle + two_pi - groups.back().angle < tol) {
        groups.front().delta += groups.back().delta;
        groups.pop_back();
    }
    if (groups.size() < 2) return 0;

    const double ref = 0.5 * (groups[0].angle + groups[1].angle);
    long count = 0;
    for (double a : angles)
        if (std::cos(ref - a) > 0) ++count;
    long best = count;
    for (std::size_t k = 1; k <= groups.size(); ++k) {
        count += groups[k % groups.size()].delta;
        best = std::min(best, count);
    }
    return best;
}

/// Exact infimum over u of #{u.w_i >= 0} for vectors in dimension 1 or 2.
inline long min_closed_halfspace_count(const std::vector<Vector>& w) {
    long zeros = 0;
    if (w.empty()) return 0;
    const auto dim = w.front().size();
    if (dim == 1) {
        long pos = 0, neg = 0;
        for (const auto& v : w) {
            if (v(0) > 0) ++pos;
            else if (v(0) < 0) ++neg;
            else ++zeros;
        }
        return std::min(pos, neg) + zeros;
    }
    if (dim != 2) throw DomainError("exact halfspace depth needs dimension <= 2");
    std::vector<std::array<double, 2>> nz;
    nz.reserve(w.size());
    for (const auto& v : w) {
        if (v(0) == 0 && v(1) == 0)
            ++zeros;
        else
            nz.push_back({v(0), v(1)});
    }
    return min_halfplane_count_2d(nz) + zeros;
}

inline double fraction(long count, Eigen::Index n) {
    return static_cast<double>(count) / static_cast<double>(n);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Location

inline double tukey_depth_1d(double theta, const Dataset& data) {
    if (data.p() != 1) throw DomainError("tukey_depth_1d: data must be univariate");
    long le = 0, ge = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double x = data.matrix()(i, 0);
        if (x <= theta) ++le;
        if (x >= theta) ++ge;
    }
    return detail::fraction(std::min(le, ge), data.n());
}

/// Exact halfspace depth for p <= 2.
inline double tukey_depth_exact(const Vector& theta, const Dataset& data) {
    if (theta.size() != data.p()) throw DomainError("tukey_depth_exact: dimension mismatch");
    std::vector<Vector> w;
    w.reserve(static_cast<std::size_t>(data.n()));
    for (Eigen::Index i = 0; i < data.n(); ++i) w.push_back(theta - data.row(i));
    return detail::fraction(detail::min_closed_halfspace_count(w), data.n());
}

/// Halfspace depth minimized over the given directions and their negatives.
inline double tukey_depth(const Vector& theta, const Dataset& data, const std::vector<Direction>& dirs) {
    if (theta.size() != data.p()) throw DomainError("tukey_depth: dimension mismatch");
    const Matrix u = direction_matrix(dirs);
    if (u.rows() != data.p()) throw DomainError("tukey_depth: direction dimension mismatch");
    const Matrix proj = data.matrix() * u;
    const Vector t = u.transpose() * theta;
    long best = data.n();
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        long le = 0, ge = 0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            if (proj(i, k) <= t(k)) ++le;
            if (proj(i, k) >= t(k)) ++ge;
        }
        best = std::min({best, le, ge});
    }
    return detail::fraction(best, data.n());
}

// ---------------------------------------------------------------------------
// Scatter

inline double scatter_depth(const SpdMatrix& gamma, const Dataset& data, const Vector& center,
                            const std::vector<Direction>& dirs) {
    if (gamma.dim() != data.p() || center.size() != data.p())
        throw DomainError("scatter_depth: dimension mismatch");
    const Matrix u = direction_matrix(dirs);
    const Matrix proj = (data.matrix().rowwise() - center.transpose()) * u;
    long best = data.n();
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        const double tau = gamma.quad(u.col(k));
        long le = 0, ge = 0;
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const double s = proj(i, k) * proj(i, k);
            if (s <= tau) ++le;
            if (s >= tau) ++ge;
        }
        best = std::min({best, le, ge});
    }
    return detail::fraction(best, data.n());
}

/// P(Z^2 <= q) for a standard normal Z.
inline double gauss_inner_prob(double q) {
    if (q <= 0) return 0.0;
    return 2.0 * std_normal_cdf(std::sqrt(q)) - 1.0;
}

/// Scatter depth of gamma under N(0, I).
inline double scatter_depth_gaussian(const SpdMatrix& gamma) {
    return std::min(gauss_inner_prob(gamma.lp()), 1.0 - gauss_inner_prob(gamma.l1()));
}

// ---------------------------------------------------------------------------
// Regression

inline Vector regression_residuals(const Vector& beta, const RegressionData& data) {
    if (data.m() != 1) throw DomainError("regression depth: response must be univariate");
    if (beta.size() != data.p()) throw DomainError("regression depth: dimension mismatch");
    return data.y.col(0) - data.x * beta;
}

inline double regression_depth(const Vector& beta, const RegressionData& data,
                               const std::vector<Direction>& dirs) {
    const Vector r = regression_residuals(beta, data);
    const Matrix u = direction_matrix(dirs);
    if (u.rows() != data.p()) throw DomainError("regression_depth: direction dimension mismatch");
    const Matrix proj = data.x * u;
    long best = data.n();
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        long cnt = 0;
        for (Eigen::Index i = 0; i < data.n(); ++i)
            if (proj(i, k) * r(i) >= 0) ++cnt;
        best = std::min(best, cnt);
    }
    return detail::fraction(best, data.n());
}

/// Exact regression depth for p <= 2.
inline double regression_depth_exact(const Vector& beta, const RegressionData& data) {
    const Vector r = regression_residuals(beta, data);
    std::vector<Vector> w;
    w.reserve(static_cast<std::size_t>(data.n()));
    for (Eigen::Index i = 0; i < data.n(); ++i) w.push_back(r(i) * data.x.row(i).transpose());
    return detail::fraction(detail::min_closed_halfspace_count(w), data.n());
}

// ---------------------------------------------------------------------------
// Multivariate regression

inline Matrix mvreg_residuals(const Matrix& b, const RegressionData& data) {
    if (b.rows() != data.p() || b.cols() != data.m())
        throw DomainError("mvreg depth: coefficient matrix has wrong shape");
    return data.y - data.x * b;
}

/// Gaussian unit-Frobenius matrices plus the rank-one candidates x_j r_j^T.
inline std::vector<Matrix> mvreg_candidates(const Matrix& b, const RegressionData& data, int count,
                                            RngStream rng) {
    const Matrix r = mvreg_residuals(b, data);
    std::vector<Matrix> out;
    Matrix z(data.p(), data.m());
    for (int k = 0; k < count; ++k) {
        for (Eigen::Index i = 0; i < z.rows(); ++i)
            for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
        if (z.norm() > 1e-12) out.push_back(z / z.norm());
    }
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        Matrix c = data.x.row(i).transpose() * r.row(i);
        if (c.norm() > 0) out.push_back(c / c.norm());
    }
    return out;
}

inline double mvreg_depth(const Matrix& b, const RegressionData& data, const std::vector<Matrix>& u_samples) {
    if (u_samples.empty()) throw DomainError("mvreg_depth: no direction samples");
    const Matrix r = mvreg_residuals(b, data);
    long best = data.n();
    for (const auto& u : u_samples) {
        if (u.rows() != data.p() || u.cols() != data.m()) throw DomainError("mvreg_depth: sample shape");
        if (u.norm() == 0) throw DomainError("mvreg_depth: zero direction sample");
        const Matrix ux = data.x * u;  // row i holds (U^T x_i)^T
        long cnt = 0;
        for (Eigen::Index i = 0; i < data.n(); ++i)
            if (ux.row(i).dot(r.row(i)) >= 0) ++cnt;
        best = std::min(best, cnt);
    }
    return detail::fraction(best, data.n());
}

/// Exact multivariate regression depth when p*m <= 2.
inline double mvreg_depth_exact(const Matrix& b, const RegressionData& data) {
    if (data.p() * data.m() > 2) throw DomainError("mvreg_depth_exact: needs p*m <= 2");
    const Matrix r = mvreg_residuals(b, data);
    std::vector<Vector> w;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const Matrix c = data.x.row(i).transpose() * r.row(i);
        w.push_back(Eigen::Map<const Vector>(c.data(), c.size()));
    }
    return detail::fraction(detail::min_closed_halfspace_count(w), data.n());
}

inline std::vector<double> default_t_grid() {
    std::vector<double> t;
    for (int e = -10; e <= 3; ++e) t.push_back(std::ldexp(1.0, e));
    return t;
}

/// Residual-smallness form: competitors B - tV/2 for every sample V and grid value t.
inline double mvreg_depth_residual(const Matrix& b, const RegressionData& data,
                                   const std::vector<Matrix>& v_samples,
                                   const std::vector<double>& t_grid = default_t_grid()) {
    if (v_samples.empty() || t_grid.empty()) throw DomainError("mvreg_depth_residual: empty samples");
    const Matrix r = mvreg_residuals(b, data);
    const Vector own = r.rowwise().squaredNorm();
    long best = data.n();
    for (const auto& v : v_samples) {
        for (double t : t_grid) {
            if (!(t > 0)) throw DomainError("mvreg_depth_residual: t must be positive");
            const Matrix other = data.y - data.x * (b - 0.5 * t * v);
            const Vector theirs = other.rowwise().squaredNorm();
            long cnt = 0;
            for (Eigen::Index i = 0; i < data.n(); ++i)
                if (own(i) <= theirs(i)) ++cnt;
            best = std::min(best, cnt);
        }
    }
    return detail::fraction(best, data.n());
}

// ---------------------------------------------------------------------------
// Location-scale

inline double ls_depth1(double mu, double sigma, const Dataset& data) {
    if (data.p() != 1) throw DomainError("ls_depth1: data must be univariate");
    if (!(sigma > 0)) throw DomainError("ls_depth1: sigma must be positive");
    long le = 0, ge = 0, in = 0, out = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double y = data.matrix()(i, 0);
        const double a = std::fabs(y - mu);
        if (y <= mu) ++le;
        if (y >= mu) ++ge;
        if (a <= sigma) ++in;
        if (a >= sigma) ++out;
    }
    return detail::fraction(std::min({le, ge, in, out}), data.n());
}

inline double ls_depth2(double mu, double sigma, const Dataset& data) {
    if (data.p() != 1) throw DomainError("ls_depth2: data must be univariate");
    if (!(sigma > 0)) throw DomainError("ls_depth2: sigma must be positive");
    long left = 0, right = 0, low = 0, high = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double y = data.matrix()(i, 0);
        if (y >= mu - sigma && y <= mu) ++left;
        if (y >= mu && y <= mu + sigma) ++right;
        if (y <= mu - sigma) ++low;
        if (y >= mu + sigma) ++high;
    }
    return detail::fraction(std::min({left, right, low, high}), data.n());
}

// ---------------------------------------------------------------------------
// Point-mass contaminated Gaussian: P = (1-eps) N(0,I) + eps delta_{r e}

namespace detail {

struct QuadForm2 {
    // c0 + c1 cos(2 phi) + c2 sin(2 phi) on the circle cos(phi) u + sin(phi) b
    double c0, c1, c2;
    double at(double phi) const { return c0 + c1 * std::cos(2 * phi) + c2 * std::sin(2 * phi); }
};

inline QuadForm2 restrict_to_circle(const Matrix& m, const Vector& u, const Vector& b) {
    const double uu = u.dot(m * u), bb = b.dot(m * b), ub = u.dot(m * b);
    return {0.5 * (uu + bb), 0.5 * (uu - bb), ub};
}

/// Optimize u^T G u over unit u with u^T H u >= 0 by exact line search on random great circles.
inline std::optional<double> constrained_quadratic_extreme(const Matrix& g, const Matrix& h, bool maximize,
                                                           int restarts, RngStream rng) {
    const Eigen::Index p = g.rows();
    const double hscale = std::max(1.0, h.cwiseAbs().maxCoeff());
    const double feas_tol = 1e-12 * hscale;
    auto feasible = [&](const Vector& u) { return u.dot(h * u) >= -feas_tol; };
    auto better = [&](double a, double b) { return maximize ? a > b : a < b; };

    std::vector<Vector> starts;
    const auto eh = sym_eigen(h);
    if (eh.values(0) < -feas_tol) return std::nullopt;
    starts.push_back(eh.vectors.col(0));
    const auto eg = sym_eigen(g);
    for (Eigen::Index j = 0; j < p; ++j)
        if (feasible(eg.vectors.col(j))) starts.push_back(eg.vectors.col(j));
    for (int k = 0; k < restarts; ++k) {
        Vector z(p);
        for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
        z.normalize();
        if (feasible(z)) starts.push_back(z);
        else {
            // slide toward the top eigenvector of H until feasible
            Vector v = eh.vectors.col(0);
            for (double s = 0.5; s > 1e-6; s *= 0.5) {
                Vector w = ((1 - s) * v + s * z).normalized();
                if (feasible(w)) {
                    starts.push_back(w);
                    break;
                }
            }
        }
    }

    std::optional<double> best;
    for (auto u : starts) {
        double cur = u.dot(g * u);
        int stale = 0;
        for (int it = 0; it < 400 && stale < 40; ++it) {
            Vector b(p);
            if (it % 3 == 0) b = g * u;
            else if (it % 3 == 1) b = h * u;
            else for (Eigen::Index j = 0; j < p; ++j) b(j) = rng.normal();
            b -= b.dot(u) * u;
            if (b.norm() < 1e-14) {
                for (Eigen::Index j = 0; j < p; ++j) b(j) = rng.normal();
                b -= b.dot(u) * u;
                if (b.norm() < 1e-14) break;
            }
            b.normalize();
            const QuadForm2 q = restrict_to_circle(g, u, b);
            const QuadForm2 c = restrict_to_circle(h, u, b);
            std::vector<double> cand;
            const double crit = 0.5 * std::atan2(q.c2, q.c1);
            cand.push_back(crit);
            cand.push_back(crit + 0.5 * std::numbers::pi);
            const double rad = std::hypot(c.c1, c.c2);
            if (rad > 0 && std::fabs(c.c0) <= rad) {
                const double psi = std::atan2(c.c2, c.c1);
                const double ac = std::acos(std::clamp(-c.c0 / rad, -1.0, 1.0));
                cand.push_back(0.5 * (psi + ac));
                cand.push_back(0.5 * (psi - ac));
            }
            double move = 0.0, val = cur;
            for (double phi : cand) {
                for (double shift : {0.0, std::numbers::pi}) {
                    const double a = phi + shift;
                    if (c.at(a) < -feas_tol) continue;
                    const double qa = q.at(a);
                    if (better(qa, val)) {
                        val = qa;
                        move = a;
                    }
                }
            }
            if (better(val, cur + (maximize ? 1e-15 : -1e-15) * std::max(1.0, std::fabs(cur)))) {
                Vector nu = (std::cos(move) * u + std::sin(move) * b).normalized();
                if (feasible(nu)) {
                    u = nu;
                    cur = u.dot(g * u);
                    stale = 0;
                    continue;
                }
            }
            ++stale;
        }
        if (!best || better(cur, *best)) best = cur;
    }
    return best;
}

}  // namespace detail

/// Point-mass depth by constrained search over the sphere (any gamma, any e).
inline double scatter_depth_pointmass_search(const SpdMatrix& gamma, double epsilon, double r,
                                             const Direction& e, int restarts = 50,
                                             std::uint64_t seed = 0x5eed) {
    const Matrix& g = gamma.entries();
    const Matrix s = r * r * e.coords() * e.coords().transpose();
    const Matrix outer_feasible = g - s;  // q >= s
    const Matrix inner_feasible = s - g;  // s >= q
    RngStream rng(seed, 17);
    const double w = 1.0 - epsilon;
    double depth = 1.0;

    // P(|u'X|^2 <= q) minimized: small q, mass point outside (s <= q) or inside (s > q)
    if (auto qa = detail::constrained_quadratic_extreme(g, outer_feasible, false, restarts, rng.substream(1)))
        depth = std::min(depth, w * gauss_inner_prob(*qa) + epsilon);
    if (sym_eigen(inner_feasible).values(0) > 0) {
        if (auto qb = detail::constrained_quadratic_extreme(g, inner_feasible, false, restarts, rng.substream(2)))
            depth = std::min(depth, w * gauss_inner_prob(*qb));
    }
    // P(|u'X|^2 >= q) minimized: large q
    if (auto qc = detail::constrained_quadratic_extreme(g, inner_feasible, true, restarts, rng.substream(3)))
        depth = std::min(depth, w * (1.0 - gauss_inner_prob(*qc)) + epsilon);
    if (sym_eigen(outer_feasible).values(0) > 0) {
        if (auto qd = detail::constrained_quadratic_extreme(g, outer_feasible, true, restarts, rng.substream(4)))
            depth = std::min(depth, w * (1.0 - gauss_inner_prob(*qd)));
    }
    return depth;
}

/// Analytic scatter depth of gamma under (1-eps) N(0,I) + eps delta_{r e}.
inline double scatter_depth_pointmass(const SpdMatrix& gamma, double epsilon, double r, const Direction& e) {
    if (!(epsilon >= 0 && epsilon < 1)) throw DomainError("scatter_depth_pointmass: epsilon must lie in [0,1)");
    if (!(r > 0)) throw DomainError("scatter_depth_pointmass: r must be positive");
    if (e.dim() != gamma.dim()) throw DomainError("scatter_depth_pointmass: dimension mismatch");
    const double w = 1.0 - epsilon;
    const double r2 = r * r;
    const double l1 = gamma.l1();
    const double lp = gamma.lp();

    if (gamma.dim() == 1) {
        const double q = l1;
        const double inner = w * gauss_inner_prob(q) + (r2 <= q ? epsilon : 0.0);
        const double outer = w * (1.0 - gauss_inner_prob(q)) + (r2 >= q ? epsilon : 0.0);
        return std::min(inner, outer);
    }

    const Vector ge = gamma.entries() * e.coords();
    const bool top_aligned = (ge - l1 * e.coords()).norm() <= 1e-12 * l1;
    if (!top_aligned) return scatter_depth_pointmass_search(gamma, epsilon, r, e);

    const double gp = gauss_inner_prob(lp);
    const double g1 = gauss_inner_prob(l1);
    if (r2 <= l1) return std::min(w * gp + epsilon, w * (1.0 - g1));

    // second eigenvalue of the top-aligned matrix
    const double l2 = gamma.eigenvalues()(1);
    const double g_m = gauss_inner_prob(r2 * lp / (r2 + lp - l1));
    const double g_big = gauss_inner_prob(r2 * l2 / (r2 + l2 - l1));
    return std::min({w * (1.0 - g1) + epsilon, w * gp + epsilon, w * g_m, w * (1.0 - g_big)});
}

}  // namespace depthlab
