#pragma once

// Location-scatter estimators: sample covariance and seven robust competitors.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "depthlab/deepest.hpp"
#include "depthlab/numerics.hpp"

namespace depthlab {

enum class EstimatorId { SCOV, MVE, MCD, SE, ROCKE, MM, SD, MDEPTH };

inline const std::array<EstimatorId, 8>& all_estimators() {
    static const std::array<EstimatorId, 8> ids = {EstimatorId::SCOV, EstimatorId::MVE, EstimatorId::MCD,
                                                   EstimatorId::SE,   EstimatorId::ROCKE, EstimatorId::MM,
                                                   EstimatorId::SD,   EstimatorId::MDEPTH};
    return ids;
}

inline std::string to_string(EstimatorId id) {
    switch (id) {
        case EstimatorId::SCOV: return "SCOV";
        case EstimatorId::MVE: return "MVE";
        case EstimatorId::MCD: return "MCD";
        case EstimatorId::SE: return "SE";
        case EstimatorId::ROCKE: return "ROCKE";
        case EstimatorId::MM: return "MM";
        case EstimatorId::SD: return "SD";
        case EstimatorId::MDEPTH: return "MDEPTH";
    }
    return "?";
}

inline std::optional<EstimatorId> parse_estimator(const std::string& name) {
    for (auto id : all_estimators())
        if (to_string(id) == name) return id;
    return std::nullopt;
}

struct EstimatorResult {
    EstimatorResult(EstimatorId which, Vector loc, Matrix scat)
        : id(which), location(std::move(loc)), scatter(std::move(scat)) {}

    EstimatorId id;
    Vector location;
    Matrix scatter;
    bool singular = false;
    bool converged = true;
    int iterations = 0;
    std::vector<double> trace;   // objective per accepted iteration (scale, determinant, depth)
    double normalization = 1.0;  // constant the raw scatter was divided by

    SpdMatrix spd() const { return SpdMatrix(scatter); }
};

namespace detail {

struct Moments {
    Vector mean;
    Matrix cov;
};

inline Moments weighted_moments(const Matrix& x, const Vector& w) {
    const double sw = w.sum();
    Vector mean = (x.transpose() * w) / sw;
    const Matrix c = x.rowwise() - mean.transpose();
    Matrix cov = (c.transpose() * w.asDiagonal() * c) / sw;
    return {std::move(mean), 0.5 * (cov + cov.transpose())};
}

inline Moments subset_moments(const Matrix& x, const std::vector<std::size_t>& idx) {
    Matrix s(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) s.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(idx[k]));
    return weighted_moments(s, Vector::Ones(s.rows()));
}

/// Cholesky-based inverse and log-determinant; empty when numerically singular.
struct Factored {
    Matrix inverse;
    double log_det;
};

inline std::optional<Factored> factor(const Matrix& c) {
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Vector diag = Matrix(llt.matrixL()).diagonal();
    const double lo = diag.minCoeff(), hi = diag.maxCoeff();
    if (!(lo > 0) || lo * lo <= 1e-13 * hi * hi) return std::nullopt;
    return Factored{llt.solve(Matrix::Identity(c.rows(), c.cols())), 2.0 * diag.array().log().sum()};
}

inline Matrix unit_det(const Matrix& c, double log_det) {
    return c * std::exp(-log_det / static_cast<double>(c.rows()));
}

/// Indices of the h smallest values, ties broken by index.
inline std::vector<std::size_t> smallest_indices(const Vector& d, std::size_t h) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(d.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h), idx.end(), [&](std::size_t a, std::size_t b) {
        const double da = d(static_cast<Eigen::Index>(a)), db = d(static_cast<Eigen::Index>(b));
        return da < db || (da == db && a < b);
    });
    idx.resize(h);
    return idx;
}

inline double kth_smallest(const Vector& d, std::size_t k) {
    std::vector<double> v(d.data(), d.data() + d.size());
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

inline void require_shape(const Dataset& data, Eigen::Index min_n, const char* who) {
    if (data.n() < min_n)
        throw DataError(std::string(who) + ": need n >= " + std::to_string(min_n));
}

}  // namespace detail

/// Expectation of rho(D / c) for D chi-square with p degrees of freedom.
inline double expected_rho_chi2(const RhoFunction& rho, double c, int p) {
    auto knots = rho.knots();
    const double top = knots.back() * c;
    for (auto& k : knots) k *= c;
    auto f = [&](double x) { return rho.rho(x / c) * chi2_pdf(x, p); };
    return integrate(f, 0.0, top, knots, 1e-11) + (1.0 - chi2_cdf(top, p));
}

/// The c with E rho(D / c) = delta at the normal model; divides raw M-scales for consistency.
inline double consistency_scale(const RhoFunction& rho, int p, double delta) {
    double lo = 1e-3, hi = 1e3;
    while (hi / lo - 1.0 > 1e-12) {
        const double mid = std::sqrt(lo * hi);
        if (expected_rho_chi2(rho, mid, p) > delta)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

/// Normal-model efficiency of the shape part of a scatter M-estimator with weight W(d / c).
inline double shape_efficiency(const RhoFunction& rho, double c, int p) {
    auto knots = rho.knots();
    const double top = knots.back() * c;
    for (auto& k : knots) k *= c;
    auto psi = [&](double d) { return d * rho.weight(d / c); };
    auto dpsi = [&](double d) { return rho.weight(d / c) + d / c * rho.weight_deriv(d / c); };
    const double pp = static_cast<double>(p);
    const double num = integrate([&](double d) { return (pp * psi(d) + 2.0 * d * dpsi(d)) * chi2_pdf(d, p); }, 0.0, top,
                                 knots, 1e-12);
    const double den = integrate([&](double d) { return psi(d) * psi(d) * chi2_pdf(d, p); }, 0.0, top, knots, 1e-12);
    return num * num / (pp * (pp + 2.0) * den);
}

/// Tuning constant giving the SHR shape estimator 95% efficiency; cached per p.
inline double mm_efficiency_constant(int p) {
    static std::mutex mtx;
    static std::map<int, double> cache;
    {
        std::lock_guard<std::mutex> lock(mtx);
        if (auto it = cache.find(p); it != cache.end()) return it->second;
    }
    const auto rho = RhoFunction::shr();
    double lo = 0.01, hi = 100.0;
    while (hi / lo - 1.0 > 1e-10) {
        const double mid = std::sqrt(lo * hi);
        if (shape_efficiency(rho, mid, p) < 0.95)
            lo = mid;
        else
            hi = mid;
    }
    const double c = std::sqrt(lo * hi);
    std::lock_guard<std::mutex> lock(mtx);
    cache[p] = c;
    return c;
}

// ---------------------------------------------------------------------------

inline EstimatorResult scov(const Dataset& data) {
    detail::require_shape(data, 2, "scov");
    auto m = detail::weighted_moments(data.matrix(), Vector::Ones(data.n()));
    EstimatorResult r{EstimatorId::SCOV, m.mean, m.cov};
    r.singular = !detail::factor(m.cov).has_value();
    return r;
}

inline EstimatorResult mve(const Dataset& data, int subsets = 500, RngStream rng = RngStream(1, 0)) {
    const Eigen::Index n = data.n(), p = data.p();
    detail::require_shape(data, p + 2, "mve");
    const Matrix& x = data.matrix();
    const auto h = static_cast<std::size_t>((n + p + 1) / 2);
    double best = std::numeric_limits<double>::infinity();
    std::optional<EstimatorResult> out;
    double best_radius = 0;
    for (int s = 0; s < subsets; ++s) {
        const auto idx = sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(p + 1), rng);
        const auto mom = detail::subset_moments(x, idx);
        const auto f = detail::factor(mom.cov);
        if (!f) continue;
        const Vector d = mahalanobis_rows(x, mom.mean, f->inverse);
        const double m2 = detail::kth_smallest(d, h - 1);
        if (!(m2 > 0)) continue;
        const double crit = f->log_det + static_cast<double>(p) * std::log(m2);
        if (crit < best) {
            best = crit;
            best_radius = m2;
            out = EstimatorResult{EstimatorId::MVE, mom.mean, mom.cov};
        }
    }
    if (!out) throw NumericalError("mve: every elemental subset was degenerate");
    const double c2 = chi2_quantile(static_cast<double>(h) / static_cast<double>(n), static_cast<double>(p));
    out->scatter *= best_radius / c2;
    out->normalization = c2;
    out->iterations = subsets;
    return *out;
}

struct ConcentrationRun {
    Vector mean;
    Matrix cov;
    std::vector<double> log_dets;  // one per concentration step, starting with the initial subset
    bool ok;
};

/// Concentration steps from an initial subset: keep the h closest points, refit, repeat.
inline ConcentrationRun mcd_concentrate(const Matrix& x, std::vector<std::size_t> subset, std::size_t h, int csteps) {
    ConcentrationRun run{{}, {}, {}, false};
    auto mom = detail::subset_moments(x, subset);
    auto f = detail::factor(mom.cov);
    if (!f) return run;
    // the start may be smaller than h; only h-subsets enter the trace
    const bool start_is_h = subset.size() == h;
    if (start_is_h) run.log_dets.push_back(f->log_det);
    for (int step = 0; step < csteps; ++step) {
        const Vector d = mahalanobis_rows(x, mom.mean, f->inverse);
        const auto next = detail::smallest_indices(d, h);
        auto nmom = detail::subset_moments(x, next);
        auto nf = detail::factor(nmom.cov);
        if (!nf) return run;  // degenerate h-subset
        if (!run.log_dets.empty() && nf->log_det >= run.log_dets.back() - 1e-12) break;
        mom = std::move(nmom);
        f = std::move(nf);
        run.log_dets.push_back(f->log_det);
    }
    if (run.log_dets.empty()) return run;
    run.mean = mom.mean;
    run.cov = mom.cov;
    run.ok = true;
    return run;
}

inline EstimatorResult mcd(const Dataset& data, int subsets = 500, int csteps = 20, RngStream rng = RngStream(2, 0)) {
    const Eigen::Index n = data.n(), p = data.p();
    detail::require_shape(data, p + 2, "mcd");
    const Matrix& x = data.matrix();
    const auto h = static_cast<std::size_t>((n + p + 1) / 2);
    std::optional<ConcentrationRun> best;
    for (int s = 0; s < subsets; ++s) {
        auto idx = sample_indices(static_cast<std::size_t>(n), static_cast<std::size_t>(n), rng);
        std::vector<std::size_t> start(idx.begin(), idx.begin() + p + 1);
        // grow the elemental start until it is nonsingular
        while (!detail::factor(detail::subset_moments(x, start).cov) && start.size() < idx.size())
            start.push_back(idx[start.size()]);
        if (start.size() < static_cast<std::size_t>(p + 1) || start.size() > h) continue;
        auto run = mcd_concentrate(x, start, h, csteps);
        if (!run.ok) continue;
        if (!best || run.log_dets.back() < best->log_dets.back()) best = std::move(run);
    }
    if (!best) throw NumericalError("mcd: every start was degenerate");
    const double alpha = static_cast<double>(h) / static_cast<double>(n);
    const double q = chi2_quantile(alpha, static_cast<double>(p));
    const double factor = alpha / chi2_cdf(q, static_cast<double>(p + 2));
    EstimatorResult r{EstimatorId::MCD, best->mean, best->cov * factor};
    r.normalization = 1.0 / factor;
    // one reweighting step: refit on points inside the 97.5% tolerance ellipse
    const double cut = chi2_quantile(0.975, static_cast<double>(p));
    const Vector d = mahalanobis_rows(x, r.location, detail::factor(r.scatter)->inverse);
    const Vector w = (d.array() <= cut).cast<double>();
    if (w.sum() > static_cast<double>(p)) {
        const auto mom = detail::weighted_moments(x, w);
        const double rw = 0.975 / chi2_cdf(cut, static_cast<double>(p + 2));
        if (detail::factor(mom.cov)) {
            r.location = mom.mean;
            r.scatter = mom.cov * rw;
        }
    }
    r.trace = best->log_dets;
    r.iterations = static_cast<int>(best->log_dets.size());
    return r;
}

namespace detail {

struct SFit {
    Vector mu;
    Matrix shape;  // unit determinant
    double scale;
    int iterations;
    bool converged;
    std::vector<double> trace;
};

/// Iterative reweighting for S-estimates: the M-scale never increases on accepted steps.
inline SFit s_iterate(const Matrix& x, Vector mu, Matrix shape, const RhoFunction& rho, double delta,
                      int max_iter = 200, double tol = 1e-9) {
    auto f = factor(shape);
    if (!f) throw NumericalError("s_iterate: singular start");
    shape = unit_det(shape, f->log_det);
    f = factor(shape);
    Vector d = mahalanobis_rows(x, mu, f->inverse);
    double scale = m_scale(std::span<const double>(d.data(), static_cast<std::size_t>(d.size())), rho, delta);
    SFit fit{mu, shape, scale, 0, false, {scale}};
    for (int it = 0; it < max_iter; ++it) {
        Vector w(d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) w(i) = rho.weight(d(i) / fit.scale);
        if (!(w.sum() > 0)) break;
        const auto mom = weighted_moments(x, w);
        const auto nf = factor(mom.cov);
        if (!nf) break;
        const Matrix nshape = unit_det(mom.cov, nf->log_det);
        const auto sf = factor(nshape);
        if (!sf) break;
        const Vector nd = mahalanobis_rows(x, mom.mean, sf->inverse);
        double nscale;
        try {
            nscale = m_scale(std::span<const double>(nd.data(), static_cast<std::size_t>(nd.size())), rho, delta);
        } catch (const DomainError&) {
            break;
        }
        if (nscale > fit.scale) {
            fit.converged = true;  // no further descent from here
            break;
        }
        const double rel = (fit.scale - nscale) / fit.scale;
        fit.mu = mom.mean;
        fit.shape = nshape;
        fit.scale = nscale;
        fit.iterations = it + 1;
        fit.trace.push_back(nscale);
        d = nd;
        if (rel < tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

}  // namespace detail

inline EstimatorResult s_estimate(const Dataset& data, const RhoFunction& rho, double delta, EstimatorId id,
                                  RngStream rng) {
    const Eigen::Index p = data.p();
    detail::require_shape(data, 2 * p + 1, "s_estimate");
    const auto start = mve(data, 500, rng.substream(1));
    const auto fit = detail::s_iterate(data.matrix(), start.location, start.scatter, rho, delta);
    const double c = consistency_scale(rho, static_cast<int>(p), delta);
    EstimatorResult r{id, fit.mu, fit.shape * (fit.scale / c)};
    r.converged = fit.converged;
    r.iterations = fit.iterations;
    r.trace = fit.trace;
    r.normalization = c;
    return r;
}

inline EstimatorResult s_bisquare(const Dataset& data, double delta = 0.5, RngStream rng = RngStream(3, 0)) {
    return s_estimate(data, RhoFunction::bisquare(), delta, EstimatorId::SE, rng);
}

inline double rocke_gamma(int p, double alpha) {
    return std::min(1.0, chi2_quantile(1.0 - alpha, p) / static_cast<double>(p) - 1.0);
}

inline EstimatorResult rocke(const Dataset& data, double alpha = 0.1, RngStream rng = RngStream(4, 0)) {
    const auto rho = RhoFunction::rocke_biflat(rocke_gamma(static_cast<int>(data.p()), alpha));
    return s_estimate(data, rho, 0.5, EstimatorId::ROCKE, rng);
}

inline EstimatorResult mm(const Dataset& data, RngStream rng = RngStream(5, 0)) {
    const Eigen::Index p = data.p();
    const Matrix& x = data.matrix();
    const auto init = s_bisquare(data, 0.5, rng.substream(1));
    const auto f0 = detail::factor(init.scatter);
    if (!f0) throw NumericalError("mm: singular initial estimate");
    const double s0 = std::exp(f0->log_det / static_cast<double>(p));
    const double c = mm_efficiency_constant(static_cast<int>(p));
    const auto rho = RhoFunction::shr();

    Vector mu = init.location;
    Matrix shape = init.scatter / s0;
    auto objective = [&](const Vector& d) {
        double acc = 0;
        for (Eigen::Index i = 0; i < d.size(); ++i) acc += rho.rho(d(i) / c);
        return acc;
    };
    Vector d = mahalanobis_rows(x, mu, detail::factor(shape)->inverse) / s0;
    double obj = objective(d);
    EstimatorResult r{EstimatorId::MM, mu, shape * s0};
    r.trace.push_back(obj);
    r.converged = false;
    for (int it = 0; it < 200; ++it) {
        Vector w(d.size());
        for (Eigen::Index i = 0; i < d.size(); ++i) w(i) = rho.weight(d(i) / c);
        if (!(w.sum() > 0)) break;
        const auto mom = detail::weighted_moments(x, w);
        const auto nf = detail::factor(mom.cov);
        if (!nf) break;
        const Matrix nshape = detail::unit_det(mom.cov, nf->log_det);
        const Vector nd = mahalanobis_rows(x, mom.mean, detail::factor(nshape)->inverse) / s0;
        const double nobj = objective(nd);
        if (nobj > obj) {
            r.converged = true;
            break;
        }
        const double rel = (obj - nobj) / std::max(obj, 1e-300);
        mu = mom.mean;
        shape = nshape;
        d = nd;
        obj = nobj;
        r.iterations = it + 1;
        r.trace.push_back(obj);
        if (rel < 1e-9) {
            r.converged = true;
            break;
        }
    }
    r.location = mu;
    r.scatter = shape * s0;
    r.normalization = c;
    return r;
}

/// Projection outlyingness of every row over the given directions (columns).
inline Vector sd_outlyingness(const Matrix& x, const Matrix& dirs) {
    const Eigen::Index n = x.rows();
    Vector t = Vector::Zero(n);
    const Matrix proj = x * dirs;
    const double mad_scale = 1.0 / std_normal_quantile(0.75);
    bool any = false;
    std::vector<double> col(static_cast<std::size_t>(n)), dev(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < dirs.cols(); ++k) {
        for (Eigen::Index i = 0; i < n; ++i) col[static_cast<std::size_t>(i)] = proj(i, k);
        const double loc = median(col);
        for (Eigen::Index i = 0; i < n; ++i) dev[static_cast<std::size_t>(i)] = std::fabs(proj(i, k) - loc);
        const double s = median(dev) * mad_scale;
        if (!(s > 0)) continue;
        any = true;
        for (Eigen::Index i = 0; i < n; ++i) t(i) = std::max(t(i), std::fabs(proj(i, k) - loc) / s);
    }
    if (!any) throw DataError("stahel_donoho: zero MAD along every direction");
    return t;
}

inline Matrix sd_directions(const Dataset& data, int count, RngStream rng) {
    const Eigen::Index n = data.n(), p = data.p();
    std::vector<Vector> cols;
    for (const auto& d : unit_directions(count, static_cast<int>(p), rng)) cols.push_back(d.coords());
    if (n <= 100) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const Vector v = data.matrix().row(i) - data.matrix().row(j);
                if (v.norm() > 0) cols.push_back(v.normalized());
            }
    }
    Matrix u(p, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) u.col(static_cast<Eigen::Index>(k)) = cols[k];
    return u;
}

inline double sd_weight(double t, double c) { return t <= c ? 1.0 : (c / t) * (c / t); }

inline EstimatorResult stahel_donoho(const Dataset& data, int dirs = 0, RngStream rng = RngStream(6, 0)) {
    const Eigen::Index p = data.p();
    detail::require_shape(data, 2 * p + 1, "stahel_donoho");
    if (dirs <= 0) dirs = 1000 * static_cast<int>(p);
    const Vector t = sd_outlyingness(data.matrix(), sd_directions(data, dirs, rng));
    const double c = std::sqrt(chi2_quantile(0.95, static_cast<double>(p)));
    Vector w(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) w(i) = sd_weight(t(i), c);
    auto mom = detail::weighted_moments(data.matrix(), w);
    EstimatorResult r{EstimatorId::SD, mom.mean, mom.cov};
    const auto f = detail::factor(mom.cov);
    if (!f) {
        r.singular = true;
        return r;
    }
    // rescale so the median distance matches the chi-square median
    const Vector d = mahalanobis_rows(data.matrix(), mom.mean, f->inverse);
    const double k = median(std::vector<double>(d.data(), d.data() + d.size())) /
                     chi2_quantile(0.5, static_cast<double>(p));
    r.scatter *= k;
    r.normalization = 1.0 / k;
    r.trace.assign(w.data(), w.data() + w.size());
    return r;
}

inline EstimatorResult mdepth_estimator(const Dataset& data, const SearchConfig& cfg = {}) {
    detail::require_shape(data, data.p() + 1, "mdepth");
    const Vector loc = tukey_median(data, cfg);
    const auto res = deepest_scatter_search(data, loc, cfg);
    EstimatorResult r{EstimatorId::MDEPTH, loc, res.gamma.entries() / res.normalization};
    r.normalization = res.normalization;
    r.trace = res.trace;
    r.iterations = res.iterations;
    return r;
}

/// Run one estimator with its documented defaults.
inline EstimatorResult run_estimator(EstimatorId id, const Dataset& data, RngStream rng) {
    switch (id) {
        case EstimatorId::SCOV: return scov(data);
        case EstimatorId::MVE: return mve(data, 500, rng);
        case EstimatorId::MCD: return mcd(data, 500, 20, rng);
        case EstimatorId::SE: return s_bisquare(data, 0.5, rng);
        case EstimatorId::ROCKE: return rocke(data, 0.1, rng);
        case EstimatorId::MM: return mm(data, rng);
        case EstimatorId::SD: return stahel_donoho(data, 0, rng);
        case EstimatorId::MDEPTH: {
            SearchConfig cfg;
            cfg.rng = rng;
            return mdepth_estimator(data, cfg);
        }
    }
    throw DomainError("run_estimator: unknown estimator");
}

}  // namespace depthlab
