#pragma once

// Point-mass contamination benchmark: data generation, per-replicate bias
// records, a deterministic parallel grid runner and the aggregation step.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "depthlab/dataset.hpp"
#include "depthlab/estimators.hpp"

namespace depthlab {

struct ContaminationSpec {
    int p = 2;
    int n = 20;
    double epsilon = 0.0;
    double k = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (p < 1) throw DomainError("ContaminationSpec: p must be >= 1");
        if (n < p + 2) throw DomainError("ContaminationSpec: need n >= p+2");
        if (!(epsilon >= 0 && epsilon < 0.5)) throw DomainError("ContaminationSpec: epsilon must lie in [0, 1/2)");
        if (!(k >= 0) || !std::isfinite(k)) throw DomainError("ContaminationSpec: k must be finite and >= 0");
    }
};

/// Rows are N(0, I) with probability 1-epsilon and the point (k,...,k) otherwise.
/// Epsilon may be anywhere in [0,1] here; grid cells are restricted further by validate().
inline Dataset gen_contaminated(const ContaminationSpec& spec) {
    if (spec.p < 1 || spec.n < 1) throw DomainError("gen_contaminated: need n, p >= 1");
    if (!(spec.epsilon >= 0 && spec.epsilon <= 1)) throw DomainError("gen_contaminated: epsilon must lie in [0,1]");
    RngStream coin(spec.seed, 1);
    RngStream gauss(spec.seed, 2);
    Matrix x(spec.n, spec.p);
    for (int i = 0; i < spec.n; ++i) {
        const bool outlier = coin.uniform() < spec.epsilon;
        for (int j = 0; j < spec.p; ++j) {
            const double z = gauss.normal();  // drawn either way so rows stay aligned across epsilon
            x(i, j) = outlier ? spec.k : z;
        }
    }
    return Dataset(std::move(x));
}

/// Largest eigenvalue of the mixture covariance (1-eps) I + eps (1-eps) z z' with z = (k,...,k).
inline double mixture_lambda1(int p, double epsilon, double k) {
    return (1.0 - epsilon) + epsilon * (1.0 - epsilon) * static_cast<double>(p) * k * k;
}

enum class RecordFlag { ok, singular, nonconverged, error };

inline std::string to_string(RecordFlag f) {
    switch (f) {
        case RecordFlag::ok: return "ok";
        case RecordFlag::singular: return "singular";
        case RecordFlag::nonconverged: return "nonconverged";
        case RecordFlag::error: return "error";
    }
    return "?";
}

inline std::optional<RecordFlag> parse_flag(const std::string& s) {
    for (auto f : {RecordFlag::ok, RecordFlag::singular, RecordFlag::nonconverged, RecordFlag::error})
        if (to_string(f) == s) return f;
    return std::nullopt;
}

struct BiasRecord {
    EstimatorId estimator = EstimatorId::SCOV;
    int p = 0;
    int n = 0;
    double epsilon = 0;
    double k = 0;
    int replicate = 0;
    double lambda1 = 0;
    double lambdap = 0;
    double b = 0;
    double cn = 0;
    RecordFlag flag = RecordFlag::ok;
};

/// Eigenvalues of truth^{-1/2} S truth^{-1/2}; b = max(l1, 1/lp), cn = l1/lp.
inline BiasRecord bias_measures(const EstimatorResult& result, const SpdMatrix& truth) {
    if (result.scatter.rows() != truth.dim()) throw DomainError("bias_measures: dimension mismatch");
    const Matrix root = truth.inv_sqrt();
    Matrix m = root * result.scatter * root;
    m = 0.5 * (m + m.transpose());
    const auto e = sym_eigen(m);
    BiasRecord r;
    r.estimator = result.id;
    r.p = static_cast<int>(m.rows());
    r.lambda1 = e.values(0);
    r.lambdap = e.values(m.rows() - 1);
    if (!(r.lambdap > 1e-12 * std::max(1.0, r.lambda1)) || result.singular) {
        r.flag = RecordFlag::singular;
        r.b = std::numeric_limits<double>::infinity();
        r.cn = std::numeric_limits<double>::infinity();
        return r;
    }
    r.b = std::max(r.lambda1, 1.0 / r.lambdap);
    r.cn = r.lambda1 / r.lambdap;
    if (!result.converged) r.flag = RecordFlag::nonconverged;
    return r;
}

inline BiasRecord bias_measures(const EstimatorResult& result) {
    return bias_measures(result, SpdMatrix::identity(result.scatter.rows()));
}

// ---------------------------------------------------------------------------
// Records CSV

inline const char* records_header() { return "estimator,p,n,epsilon,k,replicate,lambda1,lambdap,b,cn,flag"; }

inline std::string format_number(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    return fmt::format("{:.17g}", v);
}

inline double parse_number(const std::string& s) {
    if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-Inf") return -std::numeric_limits<double>::infinity();
    double v;
    if (!detail::parse_double(s, v)) throw DataError("not a number: '" + s + "'");
    return v;
}

inline std::string format_record(const BiasRecord& r) {
    return fmt::format("{},{},{},{},{},{},{},{},{},{},{}", to_string(r.estimator), r.p, r.n, fmt::format("{}", r.epsilon),
                       fmt::format("{}", r.k), r.replicate, format_number(r.lambda1), format_number(r.lambdap),
                       format_number(r.b), format_number(r.cn), to_string(r.flag));
}

inline std::vector<BiasRecord> read_records(std::istream& in, const std::string& name = "records") {
    std::string line;
    if (!std::getline(in, line)) throw DataError(name + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != records_header()) throw DataError(name + ": unexpected header '" + line + "'");
    std::vector<BiasRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_fields(line);
        if (f.size() != 11) throw DataError(fmt::format("{}: line {} has {} fields", name, lineno, f.size()));
        BiasRecord r;
        const auto id = parse_estimator(f[0]);
        const auto flag = parse_flag(f[10]);
        if (!id || !flag) throw DataError(fmt::format("{}: bad estimator or flag on line {}", name, lineno));
        try {
            r.estimator = *id;
            r.p = std::stoi(f[1]);
            r.n = std::stoi(f[2]);
            r.epsilon = parse_number(f[3]);
            r.k = parse_number(f[4]);
            r.replicate = std::stoi(f[5]);
            r.lambda1 = parse_number(f[6]);
            r.lambdap = parse_number(f[7]);
            r.b = parse_number(f[8]);
            r.cn = parse_number(f[9]);
        } catch (const std::exception& e) {
            throw DataError(fmt::format("{}: line {}: {}", name, lineno, e.what()));
        }
        r.flag = *flag;
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Grid runner

struct GridCell {
    int p;
    int n;
    double epsilon;
    double k;
};

struct GridSpec {
    std::vector<GridCell> cells;
    int replicates = 50;
    std::vector<EstimatorId> estimators{all_estimators().begin(), all_estimators().end()};
    std::uint64_t seed = 20240101;

    /// Cartesian product p x n x epsilon x k; n_factor entries give n = factor * p.
    static GridSpec product(const std::vector<int>& ps, const std::vector<int>& ns, const std::vector<int>& n_factors,
                            const std::vector<double>& eps, const std::vector<double>& ks) {
        GridSpec g;
        for (int p : ps) {
            std::vector<int> sizes = ns;
            for (int f : n_factors) sizes.push_back(f * p);
            for (int n : sizes)
                for (double e : eps)
                    for (double k : ks) g.cells.push_back({p, n, e, k});
        }
        return g;
    }

    void validate() const {
        if (replicates < 1) throw DomainError("grid: replicates must be >= 1");
        if (estimators.empty()) throw DomainError("grid: no estimators selected");
        if (cells.empty()) throw DomainError("grid: no cells");
        for (const auto& c : cells) ContaminationSpec{c.p, c.n, c.epsilon, c.k, 0}.validate();
    }

    std::size_t task_count() const { return cells.size() * static_cast<std::size_t>(replicates); }
};

inline std::uint64_t dataset_seed(std::uint64_t base, const GridCell& c, int replicate) {
    return derive_seed({base, static_cast<std::uint64_t>(c.p), static_cast<std::uint64_t>(c.n), double_bits(c.epsilon),
                        double_bits(c.k), static_cast<std::uint64_t>(replicate)});
}

inline std::size_t estimator_index(EstimatorId id) {
    const auto& all = all_estimators();
    return static_cast<std::size_t>(std::find(all.begin(), all.end(), id) - all.begin());
}

/// All records for one replicate of one cell; estimator failures become flagged rows.
inline std::vector<BiasRecord> run_replicate(const GridSpec& grid, const GridCell& cell, int replicate) {
    const std::uint64_t seed = dataset_seed(grid.seed, cell, replicate);
    const Dataset data = gen_contaminated({cell.p, cell.n, cell.epsilon, cell.k, seed});
    std::vector<BiasRecord> out;
    for (EstimatorId id : grid.estimators) {
        BiasRecord r;
        try {
            r = bias_measures(run_estimator(id, data, RngStream(seed, 100 + estimator_index(id))));
        } catch (const Error&) {
            r.flag = RecordFlag::error;
            r.lambda1 = r.lambdap = r.b = r.cn = std::numeric_limits<double>::quiet_NaN();
        }
        r.estimator = id;
        r.p = cell.p;
        r.n = cell.n;
        r.epsilon = cell.epsilon;
        r.k = cell.k;
        r.replicate = replicate;
        out.push_back(r);
    }
    return out;
}

using TaskKey = std::tuple<int, int, std::string, std::string, int>;  // p, n, epsilon, k, replicate

inline TaskKey task_key(int p, int n, double eps, double k, int replicate) {
    return {p, n, fmt::format("{}", eps), fmt::format("{}", k), replicate};
}

struct GridProgress {
    std::function<void(const GridCell&)> cell_done;  // after the last replicate of a cell is written
};

/// Runs every (cell, replicate) task not in `completed`, writing records to `sink` in task order.
/// Output is identical for any thread count.
inline std::vector<BiasRecord> run_grid(const GridSpec& grid, std::ostream* sink = nullptr, int threads = 1,
                                        const std::set<TaskKey>& completed = {},
                                        const GridProgress& progress = {}) {
    grid.validate();
    struct Task {
        std::size_t cell;
        int replicate;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < grid.cells.size(); ++c)
        for (int r = 0; r < grid.replicates; ++r) {
            const auto& cell = grid.cells[c];
            if (!completed.count(task_key(cell.p, cell.n, cell.epsilon, cell.k, r))) tasks.push_back({c, r});
        }

    std::vector<std::optional<std::vector<BiasRecord>>> results(tasks.size());
    std::mutex mtx;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t t = next.fetch_add(1);
            if (t >= tasks.size()) return;
            auto recs = run_replicate(grid, grid.cells[tasks[t].cell], tasks[t].replicate);
            {
                std::lock_guard<std::mutex> lock(mtx);
                results[t] = std::move(recs);
            }
            ready.notify_all();
        }
    };
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (int i = 0; i < threads - 1; ++i) pool.emplace_back(worker);
    if (threads == 1) worker();

    std::vector<BiasRecord> all;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        std::vector<BiasRecord> recs;
        {
            std::unique_lock<std::mutex> lock(mtx);
            ready.wait(lock, [&] { return results[t].has_value(); });
            recs = std::move(*results[t]);
            results[t].reset();
        }
        if (sink) {
            for (const auto& r : recs) *sink << format_record(r) << '\n';
            sink->flush();
        }
        all.insert(all.end(), recs.begin(), recs.end());
        const bool last_of_cell = t + 1 == tasks.size() || tasks[t + 1].cell != tasks[t].cell;
        if (last_of_cell && progress.cell_done) progress.cell_done(grid.cells[tasks[t].cell]);
    }
    for (auto& th : pool) th.join();
    return all;
}

/// Tasks whose records are present for every estimator in the grid.
inline std::set<TaskKey> completed_tasks(const std::vector<BiasRecord>& recs,
                                                                                     const GridSpec& grid) {
    std::map<TaskKey, std::set<EstimatorId>> seen;
    for (const auto& r : recs) seen[task_key(r.p, r.n, r.epsilon, r.k, r.replicate)].insert(r.estimator);
    std::set<TaskKey> done;
    for (const auto& [key, ids] : seen) {
        bool all = true;
        for (auto id : grid.estimators) all = all && ids.count(id);
        if (all) done.insert(key);
    }
    return done;
}

// ---------------------------------------------------------------------------
// Aggregation

enum class Measure { median, mean };

inline std::string to_string(Measure m) { return m == Measure::median ? "median" : "mean"; }

inline Measure parse_measure(const std::string& s) {
    if (s == "median") return Measure::median;
    if (s == "mean") return Measure::mean;
    throw ConfigError("measure must be 'median' or 'mean', got '" + s + "'");
}

inline double location(const std::vector<double>& v, Measure m) {
    if (m == Measure::median) return median(v);
    double acc = 0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

struct CurvePoint {
    double k;
    double b;   // location measure of b over usable replicates
    double cn;  // same for the condition number
    int used;
    int failures;
};

struct AggregateRow {
    EstimatorId estimator;
    int p;
    int n;
    double epsilon;
    Measure measure;
    double b_hat_log;    // NaN when every replicate was flagged
    double bcn_hat_log;
    int failures;
    std::vector<CurvePoint> curve;  // per k, increasing
};

/// Per (estimator, p, n, epsilon): location over replicates at each k, max over k, then log.
inline std::vector<AggregateRow> aggregate(const std::vector<BiasRecord>& records, Measure measure = Measure::median) {
    using CellKey = std::tuple<std::size_t, int, int, double>;
    std::map<CellKey, std::map<double, std::vector<const BiasRecord*>>> cells;
    for (const auto& r : records) cells[{estimator_index(r.estimator), r.p, r.n, r.epsilon}][r.k].push_back(&r);
    std::vector<AggregateRow> out;
    for (const auto& [key, by_k] : cells) {
        AggregateRow row{all_estimators()[std::get<0>(key)], std::get<1>(key), std::get<2>(key), std::get<3>(key),
                         measure, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                         0, {}};
        double bmax = -std::numeric_limits<double>::infinity(), cmax = bmax;
        for (const auto& [k, recs] : by_k) {
            std::vector<double> bs, cs;
            int failures = 0;
            for (const auto* r : recs) {
                if (r->flag == RecordFlag::ok) {
                    bs.push_back(r->b);
                    cs.push_back(r->cn);
                } else {
                    ++failures;
                }
            }
            row.failures += failures;
            if (bs.empty()) {
                row.curve.push_back({k, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                                     0, failures});
                continue;
            }
            const double b = location(bs, measure), c = location(cs, measure);
            row.curve.push_back({k, b, c, static_cast<int>(bs.size()), failures});
            bmax = std::max(bmax, b);
            cmax = std::max(cmax, c);
        }
        if (std::isfinite(bmax)) {
            row.b_hat_log = std::log(bmax);
            row.bcn_hat_log = std::log(cmax);
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline const char* aggregate_header() { return "estimator,p,n,epsilon,measure,b_hat_log,bcn_hat_log,failures"; }

inline void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << aggregate_header() << '\n';
    for (const auto& r : rows)
        out << fmt::format("{},{},{},{},{},{},{},{}\n", to_string(r.estimator), r.p, r.n, r.epsilon,
                           to_string(r.measure), format_number(r.b_hat_log), format_number(r.bcn_hat_log), r.failures);
}

inline std::vector<AggregateRow> read_aggregate_csv(std::istream& in, const std::string& name = "aggregate") {
    std::string line;
    if (!std::getline(in, line) || line != aggregate_header()) throw DataError(name + ": unexpected header");
    std::vector<AggregateRow> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_fields(line);
        const auto id = f.size() == 8 ? parse_estimator(f[0]) : std::nullopt;
        if (!id) throw DataError(name + ": malformed row '" + line + "'");
        try {
            out.push_back({*id, std::stoi(f[1]), std::stoi(f[2]), parse_number(f[3]), parse_measure(f[4]),
                           parse_number(f[5]), parse_number(f[6]), std::stoi(f[7]), {}});
        } catch (const std::exception& e) {
            throw DataError(name + ": " + e.what());
        }
    }
    return out;
}

enum class BiasMetric { b, cn };

/// Mean absolute log-bias (maximized over k) of scov divided by that of `id`, over epsilon = 0 records
/// of a single (p, n).
inline double efficiency(const std::vector<BiasRecord>& records, EstimatorId id, BiasMetric metric = BiasMetric::cn) {
    std::vector<BiasRecord> clean;
    for (const auto& r : records)
        if (r.epsilon == 0.0) clean.push_back(r);
    if (clean.empty()) throw DomainError("efficiency: no clean-model records");
    for (const auto& r : clean)
        if (r.p != clean.front().p || r.n != clean.front().n)
            throw DomainError("efficiency: records must share one (p, n)");
    auto mae = [&](EstimatorId which) {
        std::map<double, std::vector<double>> by_k;
        for (const auto& r : clean)
            if (r.estimator == which && r.flag == RecordFlag::ok)
                by_k[r.k].push_back(std::fabs(std::log(metric == BiasMetric::cn ? r.cn : r.b)));
        if (by_k.empty()) throw DomainError("efficiency: no usable records for " + to_string(which));
        double best = 0;
        for (const auto& [k, v] : by_k) best = std::max(best, location(v, Measure::mean));
        return best;
    };
    return mae(EstimatorId::SCOV) / mae(id);
}

// ---------------------------------------------------------------------------
// Boxplot summary

struct BoxplotStats {
    double lower_whisker;
    double q1;
    double median;
    double q3;
    double upper_whisker;
    std::vector<double> outliers;
};

/// Five-number summary with type-7 quartiles and whiskers at the last points within 1.5 IQR.
inline BoxplotStats boxplot_stats(const std::vector<double>& values) {
    if (values.size() < 5) throw DomainError("boxplot_stats: need at least 5 values");
    std::vector<double> v = values;
    std::sort(v.begin(), v.end());
    BoxplotStats s{};
    s.q1 = quantile_type7(v, 0.25);
    s.median = quantile_type7(v, 0.5);
    s.q3 = quantile_type7(v, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo = s.q1 - 1.5 * iqr, hi = s.q3 + 1.5 * iqr;
    s.lower_whisker = s.q1;
    s.upper_whisker = s.q3;
    for (double x : v) {
        if (x < lo || x > hi) {
            s.outliers.push_back(x);
            continue;
        }
        s.lower_whisker = std::min(s.lower_whisker, x);
        s.upper_whisker = std::max(s.upper_whisker, x);
    }
    return s;
}

}  // namespace depthlab
