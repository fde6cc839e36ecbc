#pragma once

// Shared numerical kernels: normal and chi-square distribution functions,
// symmetric eigensolver, Mahalanobis distances, rho functions and M-scales,
// and the counter-based random stream used everywhere else.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "depthlab/error.hpp"

namespace depthlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Normal distribution

inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

// Wichura's AS 241 (PPND16), about 1e-16 relative accuracy.
inline double ppnd16(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
                  67265.770927008700853) * r + 45921.953931549871457) * r +
                13731.693765509461125) * r + 1971.5909503065514427) * r +
              133.14166789178437745) * r + 3.387132872796366608);
        const double den =
            (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
                  39307.89580009271061) * r + 21213.794301586595867) * r +
                5394.1960214247511077) * r + 687.1870074920579083) * r +
              42.313330701600911252) * r + 1.0);
        return q * num / den;
    }
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                  0.24178072517745061177) * r + 1.27045825245236838258) * r +
                3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                  0.0151986665636164571966) * r + 0.14810397642748007459) * r +
                0.68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  0.0012426609473880784386) * r + 0.026532189526576123093) * r +
                0.29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                  1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                0.0148753612908506148525) * r + 0.13692988092273580531) * r +
              0.59983220655588793769) * r + 1.0);
        val = num / den;
    }
    return q < 0 ? -val : val;
}

}  // namespace detail

inline double std_normal_quantile(double q) {
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("std_normal_quantile: probability must lie in (0,1)");
    if (q > 0.5) return -std_normal_quantile(1.0 - q);
    double x = detail::ppnd16(q);
    // one Newton step on the lower tail, where Phi has full relative precision
    const double f = std_normal_pdf(x);
    if (f > 0) x -= (std_normal_cdf(x) - q) / f;
    return x;
}

// ---------------------------------------------------------------------------
// Chi-square distribution

inline double chi2_cdf(double x, double dof) {
    if (x <= 0) return 0.0;
    return boost::math::cdf(boost::math::chi_squared_distribution<double>(dof), x);
}

inline double chi2_pdf(double x, double dof) {
    if (x <= 0) return 0.0;
    return boost::math::pdf(boost::math::chi_squared_distribution<double>(dof), x);
}

inline double chi2_quantile(double q, double dof) {
    if (!(q > 0.0 && q < 1.0))
        throw DomainError("chi2_quantile: probability must lie in (0,1)");
    return boost::math::quantile(boost::math::chi_squared_distribution<double>(dof), q);
}

/// Adaptive Gauss-Kronrod integral of f over [a,b], split at the given breakpoints.
template <class F>
double integrate(F&& f, double a, double b, std::vector<double> breaks = {},
                 double tol = 1e-12) {
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double lo = std::max(a, breaks[i]);
        const double hi = std::min(b, breaks[i + 1]);
        if (hi <= lo) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, lo, hi, 15, tol);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Small order statistics

/// Lower of the two middle order statistics for even n.
inline double lower_median(std::vector<double> v) {
    if (v.empty()) throw DomainError("lower_median: empty input");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

/// Usual median, averaging the middle pair for even n.
inline double median(std::vector<double> v) {
    if (v.empty()) throw DomainError("median: empty input");
    const std::size_t n = v.size();
    const auto hi = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), hi, v.end());
    if (n % 2 == 1) return *hi;
    const double upper = *hi;
    const double lower = *std::max_element(v.begin(), hi);
    return 0.5 * (lower + upper);
}

/// Quantile with linear interpolation between order statistics (type 7).
inline double quantile_type7(std::vector<double> v, double prob) {
    if (v.empty()) throw DomainError("quantile_type7: empty input");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---------------------------------------------------------------------------
// Symmetric eigensolver (cyclic Jacobi)

struct EigenDecomposition {
    Vector values;   // descending
    Matrix vectors;  // columns
};

inline void require_symmetric(const Matrix& m, const char* who) {
    if (m.rows() != m.cols()) throw DomainError(std::string(who) + ": matrix not square");
    if (!m.allFinite()) throw DomainError(std::string(who) + ": non-finite entries");
    const double scale = m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw DomainError(std::string(who) + ": matrix not symmetric");
}

inline EigenDecomposition sym_eigen(const Matrix& input) {
    require_symmetric(input, "sym_eigen");
    const Eigen::Index p = input.rows();
    Matrix a = 0.5 * (input + input.transpose());
    Matrix v = Matrix::Identity(p, p);
    const double norm = std::max(a.norm(), std::numeric_limits<double>::min());

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i + 1; j < p; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(off) <= 1e-15 * norm) break;

        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = i + 1; j < p; ++j) {
                const double aij = a(i, j);
                if (aij == 0.0) continue;
                const double theta = (a(j, j) - a(i, i)) / (2.0 * aij);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < p; ++k) {
                    const double aki = a(k, i), akj = a(k, j);
                    a(k, i) = c * aki - s * akj;
                    a(k, j) = s * aki + c * akj;
                }
                for (Eigen::Index k = 0; k < p; ++k) {
                    const double aik = a(i, k), ajk = a(j, k);
                    a(i, k) = c * aik - s * ajk;
                    a(j, k) = s * aik + c * ajk;
                }
                for (Eigen::Index k = 0; k < p; ++k) {
                    const double vki = v(k, i), vkj = v(k, j);
                    v(k, i) = c * vki - s * vkj;
                    v(k, j) = s * vki + c * vkj;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
    EigenDecomposition out{Vector(p), Matrix(p, p)};
    for (Eigen::Index k = 0; k < p; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = a(src, src);
        out.vectors.col(k) = v.col(src);
    }
    return out;
}

// ---------------------------------------------------------------------------
// SpdMatrix

class SpdMatrix {
public:
    explicit SpdMatrix(const Matrix& m) {
        require_symmetric(m, "SpdMatrix");
        entries_ = 0.5 * (m + m.transpose());
        auto eig = sym_eigen(entries_);
        values_ = std::move(eig.values);
        vectors_ = std::move(eig.vectors);
        const double l1 = values_(0);
        const double lp = values_(values_.size() - 1);
        if (!(lp > 0.0) || lp <= 1e-13 * l1)
            throw DomainError("SpdMatrix: matrix is not positive definite");
    }

    static SpdMatrix identity(Eigen::Index p) { return SpdMatrix(Matrix::Identity(p, p)); }

    Eigen::Index dim() const { return entries_.rows(); }
    const Matrix& entries() const { return entries_; }
    const Vector& eigenvalues() const { return values_; }
    const Matrix& eigenvectors() const { return vectors_; }
    double l1() const { return values_(0); }
    double lp() const { return values_(values_.size() - 1); }

    double quad(const Vector& u) const { return u.dot(entries_ * u); }

    Matrix inverse() const {
        return vectors_ * values_.cwiseInverse().asDiagonal() * vectors_.transpose();
    }
    Matrix sqrt() const {
        return vectors_ * values_.cwiseSqrt().asDiagonal() * vectors_.transpose();
    }
    Matrix inv_sqrt() const {
        return vectors_ * values_.cwiseSqrt().cwiseInverse().asDiagonal() *
               vectors_.transpose();
    }
    double log_det() const { return values_.array().log().sum(); }

private:
    Matrix entries_;
    Vector values_;
    Matrix vectors_;
};

inline double mahalanobis_sq(const Vector& x, const Vector& mu, const SpdMatrix& sigma) {
    if (x.size() != mu.size() || x.size() != sigma.dim())
        throw DomainError("mahalanobis_sq: dimension mismatch");
    const Vector z = sigma.eigenvectors().transpose() * (x - mu);
    return (z.array().square() / sigma.eigenvalues().array()).sum();
}

/// Squared distances of every row of x, given a precomputed inverse scatter.
inline Vector mahalanobis_rows(const Matrix& x, const Vector& mu, const Matrix& inverse) {
    const Matrix centered = x.rowwise() - mu.transpose();
    return ((centered * inverse).array() * centered.array()).rowwise().sum();
}

// ---------------------------------------------------------------------------
// Rho functions on squared-distance arguments

class RhoFunction {
public:
    enum class Kind { bisquare, shr, rocke_biflat };

    static RhoFunction bisquare() { return RhoFunction(Kind::bisquare, 0.0); }
    static RhoFunction shr() { return RhoFunction(Kind::shr, 0.0); }
    static RhoFunction rocke_biflat(double gamma) {
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw DomainError("rocke_biflat: gamma must lie in (0,1]");
        return RhoFunction(Kind::rocke_biflat, gamma);
    }

    Kind kind() const { return kind_; }
    double gamma() const { return gamma_; }

    double rho(double t) const {
        if (t <= 0) return 0.0;
        switch (kind_) {
            case Kind::bisquare: {
                if (t >= 1.0) return 1.0;
                const double u = 1.0 - t;
                return 1.0 - u * u * u;
            }
            case Kind::shr:
                if (t <= 4.0) return t / kShrMax;
                if (t <= 9.0) return shr_poly(t) / kShrMax;
                return 1.0;
            case Kind::rocke_biflat: {
                if (t < 1.0 - gamma_) return 0.0;
                if (t > 1.0 + gamma_) return 1.0;
                const double z = (t - 1.0) / gamma_;
                return 0.5 + 0.25 * z * (3.0 - z * z);
            }
        }
        return 0.0;
    }

    /// Derivative of rho, used as the reweighting function W.
    double weight(double t) const {
        if (t < 0) return 0.0;
        switch (kind_) {
            case Kind::bisquare: {
                if (t >= 1.0) return 0.0;
                const double u = 1.0 - t;
                return 3.0 * u * u;
            }
            case Kind::shr:
                if (t <= 4.0) return 1.0 / kShrMax;
                if (t <= 9.0) return shr_poly_deriv(t) / kShrMax;
                return 0.0;
            case Kind::rocke_biflat: {
                if (t <= 1.0 - gamma_ || t >= 1.0 + gamma_) return 0.0;
                const double z = (t - 1.0) / gamma_;
                return 0.75 / gamma_ * (1.0 - z * z);
            }
        }
        return 0.0;
    }

    /// Derivative of weight; needed for efficiency integrals.
    double weight_deriv(double t) const {
        switch (kind_) {
            case Kind::bisquare:
                return (t >= 0 && t < 1.0) ? -6.0 * (1.0 - t) : 0.0;
            case Kind::shr:
                return (t > 4.0 && t <= 9.0) ? shr_poly_deriv2(t) / kShrMax : 0.0;
            case Kind::rocke_biflat: {
                if (t <= 1.0 - gamma_ || t >= 1.0 + gamma_) return 0.0;
                return -1.5 * (t - 1.0) / (gamma_ * gamma_ * gamma_);
            }
        }
        return 0.0;
    }

    /// Points where rho is not smooth; handy as quadrature breakpoints.
    std::vector<double> knots() const {
        switch (kind_) {
            case Kind::bisquare: return {1.0};
            case Kind::shr: return {4.0, 9.0};
            case Kind::rocke_biflat: return {std::max(0.0, 1.0 - gamma_), 1.0 + gamma_};
        }
        return {};
    }

    // constant term 3.584 makes rho continuous at d = 4; the polynomial reaches 6.5 at d = 9
    static double shr_poly(double d) {
        return 3.584 - 1.944 * d + 0.864 * d * d - 0.104 * d * d * d +
               0.004 * d * d * d * d;
    }
    static double shr_poly_deriv(double d) {
        return -1.944 + 1.728 * d - 0.312 * d * d + 0.016 * d * d * d;
    }
    static double shr_poly_deriv2(double d) { return 1.728 - 0.624 * d + 0.048 * d * d; }

    static constexpr double kShrMax = 6.5;

private:
    RhoFunction(Kind k, double g) : kind_(k), gamma_(g) {}
    Kind kind_;
    double gamma_;
};

inline double mean_rho(std::span<const double> d, const RhoFunction& rho, double s) {
    double acc = 0.0;
    for (double x : d) acc += rho.rho(x / s);
    return acc / static_cast<double>(d.size());
}

/// M-scale: the S solving mean rho(d_i / S) = delta.
inline double m_scale(std::span<const double> d, const RhoFunction& rho, double delta) {
    if (d.empty()) throw DomainError("m_scale: empty input");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("m_scale: delta must lie in (0,1)");
    std::size_t zeros = 0;
    double dmax = 0.0;
    for (double x : d) {
        if (x < 0 || !std::isfinite(x)) throw DomainError("m_scale: distances must be finite and >= 0");
        if (x == 0) ++zeros;
        dmax = std::max(dmax, x);
    }
    if (static_cast<double>(zeros) >= (1.0 - delta) * static_cast<double>(d.size()))
        throw DomainError("m_scale: too many zero distances, no root");

    double hi = dmax;
    for (int i = 0; i < 4000 && mean_rho(d, rho, hi) > delta; ++i) hi *= 2.0;
    double lo = hi;
    for (int i = 0; i < 4000 && mean_rho(d, rho, lo) < delta; ++i) lo *= 0.5;
    if (mean_rho(d, rho, lo) < delta) throw NumericalError("m_scale: bracketing failed");

    while (hi / lo - 1.0 > 1e-14) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (mean_rho(d, rho, mid) > delta)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

// ---------------------------------------------------------------------------
// Random streams

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Hash a list of integers into one seed.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6A09E667F3BCC908ULL;
    for (auto v : parts) h = detail::mix64(h ^ detail::mix64(v));
    return h;
}

inline std::uint64_t double_bits(double x) {
    std::uint64_t out;
    static_assert(sizeof(out) == sizeof(x));
    std::memcpy(&out, &x, sizeof(out));
    return out;
}

/// Counter-based generator: draw i is a fixed hash of (seed, stream, i).
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), key_(derive_seed({seed, stream})) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return detail::mix64(key_ + 0xD1B54A32D192ED03ULL * counter_++); }

    /// Uniform on the open interval (0,1).
    double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double a = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t x;
        do x = (*this)(); while (x >= limit);
        return static_cast<std::size_t>(x % bound);
    }

    RngStream substream(std::uint64_t id) const { return RngStream(key_, id); }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// k distinct indices from [0, n), in draw order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, RngStream& rng) {
    if (k > n) throw DomainError("sample_indices: k exceeds n");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(n - i)]);
    pool.resize(k);
    return pool;
}

// ---------------------------------------------------------------------------
// Directions

class Direction {
public:
    /// Normalizes v; rejects the zero vector.
    explicit Direction(const Vector& v) {
        const double nrm = v.norm();
        if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DomainError("Direction: zero or non-finite vector");
        coords_ = v / nrm;
    }
    const Vector& coords() const { return coords_; }
    Eigen::Index dim() const { return coords_.size(); }

private:
    Vector coords_;
};

inline std::vector<Direction> unit_directions(int count, int p, RngStream rng) {
    if (count < 1 || p < 1) throw DomainError("unit_directions: count and p must be >= 1");
    std::vector<Direction> out;
    out.reserve(static_cast<std::size_t>(count));
    Vector z(p);
    while (static_cast<int>(out.size()) < count) {
        for (int j = 0; j < p; ++j) z(j) = rng.normal();
        if (z.norm() > 1e-12) out.emplace_back(z);
    }
    return out;
}

/// Directions packed as the columns of a p x count matrix.
inline Matrix direction_matrix(const std::vector<Direction>& dirs) {
    if (dirs.empty()) throw DomainError("direction_matrix: no directions");
    Matrix u(dirs.front().dim(), static_cast<Eigen::Index>(dirs.size()));
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        if (dirs[k].dim() != u.rows()) throw DomainError("direction_matrix: mixed dimensions");
        u.col(static_cast<Eigen::Index>(k)) = dirs[k].coords();
    }
    return u;
}

}  // namespace depthlab
