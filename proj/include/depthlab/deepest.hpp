#pragma once

// Depth maximizers: Tukey median, deepest scatter, deepest regression and
// the two deepest location-scale estimators.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "depthlab/depth.hpp"
#include "depthlab/maxbias.hpp"

namespace depthlab {

struct SearchConfig {
    int direction_count = 0;  // 0 means 500 * p
    int restarts = 3;
    int max_iterations = 200;
    double step_shrink = 0.5;
    double tolerance = 1e-6;
    RngStream rng{0x2545F4914F6CDD1DULL, 0};

    int directions_for(Eigen::Index p) const {
        return direction_count > 0 ? direction_count : 500 * static_cast<int>(p);
    }
    void validate() const {
        if (direction_count < 0 || restarts < 1 || max_iterations < 1)
            throw DomainError("SearchConfig: counts must be >= 1");
        if (!(step_shrink > 0 && step_shrink < 1)) throw DomainError("SearchConfig: step_shrink must lie in (0,1)");
        if (!(tolerance > 0)) throw DomainError("SearchConfig: tolerance must be positive");
    }
};

namespace detail {

inline std::vector<double> coordinate_lower_medians(const Matrix& x) {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
        out.push_back(lower_median(col));
    }
    return out;
}

inline double lower_mad(const std::vector<double>& v) {
    const double m = lower_median(v);
    std::vector<double> dev;
    dev.reserve(v.size());
    for (double x : v) dev.push_back(std::fabs(x - m));
    return lower_median(dev);
}

inline std::vector<double> coordinate_spreads(const Matrix& x) {
    std::vector<double> out;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        std::vector<double> col(x.col(j).data(), x.col(j).data() + x.rows());
        double s = lower_mad(col);
        if (!(s > 0)) {
            const double mean = x.col(j).mean();
            s = std::sqrt((x.col(j).array() - mean).square().mean());
        }
        out.push_back(s > 0 ? s : 1.0);
    }
    return out;
}

/// Halfspace depth with projections sorted once, for repeated evaluation.
class SortedProjections {
public:
    SortedProjections(const Matrix& x, const Matrix& dirs) : u_(dirs), n_(x.rows()) {
        const Matrix proj = x * dirs;
        sorted_.resize(static_cast<std::size_t>(dirs.cols()));
        for (Eigen::Index k = 0; k < dirs.cols(); ++k) {
            auto& s = sorted_[static_cast<std::size_t>(k)];
            s.assign(proj.col(k).data(), proj.col(k).data() + proj.rows());
            std::sort(s.begin(), s.end());
        }
    }
    double depth(const Vector& theta) const {
        const Vector t = u_.transpose() * theta;
        long best = n_;
        for (std::size_t k = 0; k < sorted_.size(); ++k) {
            const auto& s = sorted_[k];
            const double tk = t(static_cast<Eigen::Index>(k));
            const long le = std::upper_bound(s.begin(), s.end(), tk) - s.begin();
            const long ge = s.end() - std::lower_bound(s.begin(), s.end(), tk);
            best = std::min({best, le, ge});
        }
        return fraction(best, n_);
    }

private:
    Matrix u_;
    Eigen::Index n_;
    std::vector<std::vector<double>> sorted_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Tukey median

inline Vector tukey_median(const Dataset& data, const SearchConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index n = data.n(), p = data.p();
    const Matrix& x = data.matrix();
    const auto med = detail::coordinate_lower_medians(x);
    Vector start = Eigen::Map<const Vector>(med.data(), p);
    if (p == 1) return start;

    RngStream rng = cfg.rng.substream(101);
    std::optional<detail::SortedProjections> sampled;
    if (p > 2) {
        auto dirs = direction_matrix(unit_directions(cfg.directions_for(p), static_cast<int>(p), rng.substream(1)));
        std::vector<Vector> extra;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vector d = x.row(i).transpose() - start;
            if (d.norm() > 0) extra.push_back(d.normalized());
        }
        Matrix all(p, dirs.cols() + static_cast<Eigen::Index>(extra.size()));
        all.leftCols(dirs.cols()) = dirs;
        for (std::size_t k = 0; k < extra.size(); ++k) all.col(dirs.cols() + static_cast<Eigen::Index>(k)) = extra[k];
        sampled.emplace(x, all);
    }
    auto depth_of = [&](const Vector& t) { return sampled ? sampled->depth(t) : tukey_depth_exact(t, data); };

    Vector best = start;
    double best_depth = depth_of(start);
    std::vector<Vector> top{best};
    auto consider = [&](const Vector& c) {
        const double d = depth_of(c);
        if (d > best_depth) {
            best_depth = d;
            best = c;
            top.assign(1, c);
            return true;
        }
        if (d == best_depth) top.push_back(c);
        return false;
    };

    const Eigen::Index stride = std::max<Eigen::Index>(1, n / 500);
    for (Eigen::Index i = 0; i < n; i += stride) consider(x.row(i).transpose());
    if (n <= 100)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) consider(0.5 * (x.row(i) + x.row(j)).transpose());

    const auto spread = detail::coordinate_spreads(x);
    RngStream prng = rng.substream(2);
    for (int rs = 0; rs < cfg.restarts; ++rs) {
        for (double rad = 1.0; rad >= cfg.tolerance; rad *= cfg.step_shrink) {
            for (int trial = 0; trial < 20; ++trial) {
                Vector c = best;
                for (Eigen::Index j = 0; j < p; ++j) c(j) += rad * spread[static_cast<std::size_t>(j)] * prng.normal();
                consider(c);
            }
        }
    }
    // centre of the deepest candidates found
    Vector centroid = Vector::Zero(p);
    for (const auto& c : top) centroid += c;
    centroid /= static_cast<double>(top.size());
    if (depth_of(centroid) >= best_depth) best = centroid;
    return best;
}

// ---------------------------------------------------------------------------
// Deepest scatter

struct DeepestScatterResult {
    SpdMatrix gamma;
    double depth;
    double start_depth;
    std::vector<double> trace;  // depth after each accepted step of the winning run
    int iterations;
    double normalization;       // beta: the value of u'Gamma u for the deepest matrix at N(0, I)
};

namespace detail {

class ScatterDepthEvaluator {
public:
    struct Score {
        long count;   // minimal count over directions and sides
        long ties;    // how many (direction, side) pairs attain it
        std::vector<std::size_t> minimizers;  // first few directions attaining it
        bool better_than(const Score& o) const {
            return count > o.count || (count == o.count && ties < o.ties);
        }
    };

    ScatterDepthEvaluator(const Matrix& centered, const Matrix& dirs) : u_(dirs), n_(centered.rows()) {
        const Matrix proj = centered * dirs;
        sorted_.resize(static_cast<std::size_t>(dirs.cols()));
        for (Eigen::Index k = 0; k < dirs.cols(); ++k) {
            auto& s = sorted_[static_cast<std::size_t>(k)];
            s.resize(static_cast<std::size_t>(proj.rows()));
            for (Eigen::Index i = 0; i < proj.rows(); ++i) s[static_cast<std::size_t>(i)] = proj(i, k) * proj(i, k);
            std::sort(s.begin(), s.end());
        }
    }

    Score score(const Matrix& gamma) const {
        const Matrix gu = gamma * u_;
        Score sc{n_ + 1, 0, {}};
        for (std::size_t k = 0; k < sorted_.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double tau = u_.col(kk).dot(gu.col(kk));
            const auto& s = sorted_[k];
            const long le = std::upper_bound(s.begin(), s.end(), tau) - s.begin();
            const long ge = s.end() - std::lower_bound(s.begin(), s.end(), tau);
            for (long c : {le, ge}) {
                if (c < sc.count) {
                    sc.count = c;
                    sc.ties = 1;
                    sc.minimizers.assign(1, k);
                } else if (c == sc.count) {
                    ++sc.ties;
                    if (sc.minimizers.size() < 8 && sc.minimizers.back() != k) sc.minimizers.push_back(k);
                }
            }
        }
        return sc;
    }

    double median_square(std::size_t k) const {
        const auto& s = sorted_[k];
        const std::size_t m = s.size();
        return m % 2 == 1 ? s[m / 2] : 0.5 * (s[m / 2 - 1] + s[m / 2]);
    }
    Vector direction(std::size_t k) const { return u_.col(static_cast<Eigen::Index>(k)); }
    std::size_t size() const { return sorted_.size(); }
    Eigen::Index n() const { return n_; }

private:
    Matrix u_;
    Eigen::Index n_;
    std::vector<std::vector<double>> sorted_;
};

/// Rescale the quadratic form of gamma along u by factor f, affine-equivariantly.
inline Matrix rescale_along(const Matrix& gamma, const Vector& u, double f) {
    const Vector gu = gamma * u;
    const double tau = u.dot(gu);
    Matrix out = gamma + (f - 1.0) * gu * gu.transpose() / tau;
    return 0.5 * (out + out.transpose());
}

}  // namespace detail

inline DeepestScatterResult deepest_scatter_search(const Dataset& data, const Vector& center,
                                                   const SearchConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index n = data.n(), p = data.p();
    if (center.size() != p) throw DomainError("deepest_scatter: center dimension mismatch");
    if (n < p + 1) throw DataError("deepest_scatter: need n >= p + 1");
    const Matrix y = data.matrix().rowwise() - center.transpose();
    {
        const auto e = sym_eigen(y.transpose() * y / static_cast<double>(n));
        if (!(e.values(p - 1) > 1e-12 * e.values(0)))
            throw DataError("deepest_scatter: data lie in a lower-dimensional subspace");
    }

    // coordinatewise start: squared medians of |y_j|
    Vector diag(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<double> a(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) a[static_cast<std::size_t>(i)] = std::fabs(y(i, j));
        double m = lower_median(a);
        if (!(m > 0)) m = std::sqrt(beta_constant() * y.col(j).squaredNorm() / static_cast<double>(n));
        if (!(m > 0)) throw DataError("deepest_scatter: degenerate coordinate");
        diag(j) = m * m;
    }
    const Matrix start = diag.asDiagonal();
    const Vector root = diag.cwiseSqrt();

    // directions drawn in the metric of the start matrix, so coordinate scaling is equivariant
    RngStream rng = cfg.rng.substream(202);
    const int nd = cfg.directions_for(p);
    const auto raw = unit_directions(nd, static_cast<int>(p), rng.substream(1));
    std::vector<Vector> cols;
    for (const auto& d : raw) cols.push_back(d.coords().cwiseQuotient(root).normalized());
    const Eigen::Index cap = std::min<Eigen::Index>(n, std::max<Eigen::Index>(nd / 2, 1));
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / cap);
    for (Eigen::Index i = 0; i < n; i += stride) {
        const Vector w = y.row(i).transpose().cwiseQuotient(diag);
        if (w.norm() > 0) cols.push_back(w.normalized());
    }
    Matrix dirs(p, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) dirs.col(static_cast<Eigen::Index>(k)) = cols[k];
    const detail::ScatterDepthEvaluator eval(y, dirs);

    const auto start_score = eval.score(start);
    std::optional<DeepestScatterResult> best;
    std::optional<detail::ScatterDepthEvaluator::Score> best_score;

    RngStream prng = rng.substream(2);
    for (int rs = 0; rs < cfg.restarts; ++rs) {
        Matrix g = start;
        if (rs > 0) {
            Matrix a = Matrix::Identity(p, p);
            for (Eigen::Index i = 0; i < p; ++i)
                for (Eigen::Index j = 0; j < p; ++j) a(i, j) += 0.25 * prng.normal();
            g = root.asDiagonal() * (a * a.transpose()) * root.asDiagonal();
        }
        auto sc = eval.score(g);
        std::vector<double> trace{detail::fraction(sc.count, n)};
        int it = 0;
        for (; it < cfg.max_iterations; ++it) {
            bool moved = false;
            // minimizing directions in order; the first that admits an improving step wins
            const std::vector<std::size_t> order = sc.minimizers;
            for (std::size_t k : order) {
                const Vector u = eval.direction(k);
                const double tau = u.dot(g * u);
                const double target = eval.median_square(k);
                if (!(target > 0) || !(tau > 0)) continue;
                const double ratio = target / tau;
                for (double eta = 1.0; eta >= cfg.tolerance; eta *= cfg.step_shrink) {
                    const Matrix cand = detail::rescale_along(g, u, std::pow(ratio, eta));
                    const auto cs = eval.score(cand);
                    if (cs.better_than(sc)) {
                        g = cand;
                        sc = cs;
                        moved = true;
                        break;
                    }
                }
                if (moved) break;
            }
            if (!moved) break;
            trace.push_back(detail::fraction(sc.count, n));
        }
        if (!best_score || sc.better_than(*best_score)) {
            best_score = sc;
            best = DeepestScatterResult{SpdMatrix(g),
                                        detail::fraction(sc.count, n),
                                        detail::fraction(start_score.count, n),
                                        trace,
                                        it,
                                        beta_constant()};
        }
    }
    return *best;
}

inline SpdMatrix deepest_scatter(const Dataset& data, const Vector& center, const SearchConfig& cfg = {}) {
    return deepest_scatter_search(data, center, cfg).gamma;
}

// ---------------------------------------------------------------------------
// Location-scale

struct LocScale {
    double mu;
    double sigma;
};

inline LocScale deepest_locscale1(const Dataset& data) {
    if (data.p() != 1) throw DomainError("deepest_locscale1: data must be univariate");
    if (data.n() < 2) throw DomainError("deepest_locscale1: need n >= 2");
    const auto v = data.column(0);
    const double mu = lower_median(v);
    const double mad = detail::lower_mad(v);
    if (!(mad > 0)) throw DataError("deepest_locscale1: MAD is zero");
    return {mu, mad};
}

inline LocScale deepest_locscale2(const Dataset& data, const SearchConfig& /*cfg*/ = {}) {
    if (data.p() != 1) throw DomainError("deepest_locscale2: data must be univariate");
    if (data.n() < 4) throw DomainError("deepest_locscale2: need n >= 4");
    auto x = data.column(0);
    std::sort(x.begin(), x.end());
    std::vector<double> v = x;
    v.erase(std::unique(v.begin(), v.end()), v.end());
    const double med = lower_median(x);

    auto count_between = [&](double lo, double hi) {
        return static_cast<long>(std::upper_bound(x.begin(), x.end(), hi) - std::lower_bound(x.begin(), x.end(), lo));
    };
    auto count_le = [&](double t) { return static_cast<long>(std::upper_bound(x.begin(), x.end(), t) - x.begin()); };
    auto count_ge = [&](double t) { return static_cast<long>(x.end() - std::lower_bound(x.begin(), x.end(), t)); };
    auto depth_count = [&](double mu, double sigma) {
        const double lo = mu - sigma, hi = mu + sigma;
        return std::min({count_between(lo, mu), count_between(mu, hi), count_le(lo), count_ge(hi)});
    };

    long best = -1;
    LocScale out{med, 0};
    auto offer = [&](double mu, double sigma) {
        if (!(sigma > 0)) return;
        const long d = depth_count(mu, sigma);
        if (d < best) return;
        if (d > best || sigma < out.sigma ||
            (sigma == out.sigma && std::fabs(mu - med) < std::fabs(out.mu - med))) {
            best = d;
            out = {mu, sigma};
        }
    };

    // any maximizer can be slid until two of mu - sigma, mu, mu + sigma sit on data values
    const std::size_t m = v.size();
    std::vector<long> le(m), ge(m);
    for (std::size_t i = 0; i < m; ++i) {
        le[i] = count_le(v[i]);
        ge[i] = count_ge(v[i]);
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            const double a = v[i], b = v[j], w = b - a;
            const long inner = le[j] - (i > 0 ? le[i - 1] : 0);  // points in [a, b]
            if (inner < best) continue;
            if (le[i] >= best) {
                offer(b, w);              // lower end and centre on data
                offer(0.5 * (a + b), 0.5 * w);  // both ends on data
            }
            if (ge[j] >= best) offer(a, w);  // centre and upper end on data
        }
    }
    if (best < 0) throw DataError("deepest_locscale2: all values equal");
    return out;
}

// ---------------------------------------------------------------------------
// Deepest regression (single response)

inline Vector deepest_regression(const RegressionData& data, const SearchConfig& cfg = {}) {
    cfg.validate();
    if (data.m() != 1) throw DomainError("deepest_regression: single response only");
    const Eigen::Index n = data.n(), p = data.p();
    if (n < p) throw DataError("deepest_regression: need n >= p");
    {
        const auto e = sym_eigen(data.x.transpose() * data.x);
        if (!(e.values(p - 1) > 1e-12 * e.values(0)))
            throw DataError("deepest_regression: degenerate design");
    }
    RngStream rng = cfg.rng.substream(303);
    std::optional<std::vector<Direction>> dirs;
    if (p > 2) {
        auto d = unit_directions(cfg.directions_for(p), static_cast<int>(p), rng.substream(1));
        for (Eigen::Index i = 0; i < n; ++i)
            if (data.x.row(i).norm() > 0) d.emplace_back(data.x.row(i).transpose());
        dirs = std::move(d);
    }
    auto depth_of = [&](const Vector& b) {
        return dirs ? regression_depth(b, data, *dirs) : regression_depth_exact(b, data);
    };

    std::vector<Vector> fits;
    auto fit_subset = [&](const std::vector<std::size_t>& idx) {
        Matrix xs(p, p);
        Vector ys(p);
        for (Eigen::Index k = 0; k < p; ++k) {
            xs.row(k) = data.x.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]));
            ys(k) = data.y(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)]), 0);
        }
        Eigen::FullPivLU<Matrix> lu(xs);
        if (lu.rank() == p) fits.push_back(lu.solve(ys));
    };
    if (p == 1) {
        for (Eigen::Index i = 0; i < n; ++i) fit_subset({static_cast<std::size_t>(i)});
    } else if (p == 2 && n <= 60) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) fit_subset({static_cast<std::size_t>(i), static_cast<std::size_t>(j)});
    } else {
        RngStream srng = rng.substream(2);
        for (int k = 0; k < 2000; ++k) fit_subset(sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(p), srng));
    }
    fits.push_back(data.x.colPivHouseholderQr().solve(data.y.col(0)));

    Vector best = fits.back();
    double best_depth = depth_of(best);
    for (const auto& f : fits) {
        const double d = depth_of(f);
        if (d > best_depth) {
            best_depth = d;
            best = f;
        }
    }
    // perturbation refinement scaled by the spread of the elemental fits
    Matrix fm(static_cast<Eigen::Index>(fits.size()), p);
    for (std::size_t k = 0; k < fits.size(); ++k) fm.row(static_cast<Eigen::Index>(k)) = fits[k].transpose();
    const auto spread = detail::coordinate_spreads(fm);
    RngStream prng = rng.substream(3);
    for (double rad = 1.0; rad >= cfg.tolerance; rad *= cfg.step_shrink) {
        for (int trial = 0; trial < 20; ++trial) {
            Vector c = best;
            for (Eigen::Index j = 0; j < p; ++j) c(j) += rad * spread[static_cast<std::size_t>(j)] * prng.normal();
            const double d = depth_of(c);
            if (d > best_depth) {
                best_depth = d;
                best = c;
            }
        }
    }
    return best;
}

}  // namespace depthlab
