// depthlab: depths, maximum-bias curves and the contamination benchmark from the command line.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "depthlab/config.hpp"
#include "depthlab/deepest.hpp"
#include "depthlab/depth.hpp"
#include "depthlab/estimators.hpp"
#include "depthlab/maxbias.hpp"
#include "depthlab/simlab.hpp"
#include "depthlab/svg.hpp"

namespace fs = std::filesystem;
using namespace depthlab;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
    return out;
}

/// Square matrix from a row-major list of p*p entries.
Matrix to_square(const std::vector<double>& v, const char* what) {
    const auto p = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    if (p < 1 || p * p != static_cast<Eigen::Index>(v.size()))
        throw ConfigError(fmt::format("{} needs p*p entries, got {}", what, v.size()));
    Matrix m(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) m(i, j) = v[static_cast<std::size_t>(i * p + j)];
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

// ---------------------------------------------------------------------------

struct DepthArgs {
    std::string kind;
    std::string data;
    std::vector<double> theta, gamma, center, beta, direction;
    double mu = 0, sigma = 1, epsilon = 0.1, r = 10;
    int directions = 0;
    std::uint64_t seed = 1;
};

int cmd_depth(const DepthArgs& a) {
    auto need_data = [&] {
        if (a.data.empty()) throw ConfigError("--data is required for depth " + a.kind);
        return Dataset(read_csv_matrix(a.data));
    };
    auto dirs_for = [&](Eigen::Index p) {
        return unit_directions(a.directions > 0 ? a.directions : 1000 * static_cast<int>(p), static_cast<int>(p),
                               RngStream(a.seed, 0));
    };
    double value;
    if (a.kind == "tukey") {
        const Dataset d = need_data();
        const Vector theta = to_vector(a.theta);
        if (theta.size() != d.p()) throw ConfigError("--theta must have one entry per data column");
        value = d.p() <= 2 ? tukey_depth_exact(theta, d) : tukey_depth(theta, d, dirs_for(d.p()));
    } else if (a.kind == "scatter") {
        const Dataset d = need_data();
        const Vector center = a.center.empty() ? Vector::Zero(d.p()) : to_vector(a.center);
        value = scatter_depth(SpdMatrix(to_square(a.gamma, "--gamma")), d, center, dirs_for(d.p()));
    } else if (a.kind == "scatter-gaussian") {
        value = scatter_depth_gaussian(SpdMatrix(to_square(a.gamma, "--gamma")));
    } else if (a.kind == "regression") {
        const Matrix m = read_csv_matrix(a.data.empty() ? throw ConfigError("--data is required") : a.data);
        if (m.cols() < 2) throw DataError("regression data needs design columns and a response column");
        const RegressionData rd(m.leftCols(m.cols() - 1), m.rightCols(1));
        const Vector beta = to_vector(a.beta);
        if (beta.size() != rd.p()) throw ConfigError("--beta must have one entry per design column");
        value = rd.p() <= 2 ? regression_depth_exact(beta, rd) : regression_depth(beta, rd, dirs_for(rd.p()));
    } else if (a.kind == "ls1") {
        value = ls_depth1(a.mu, a.sigma, need_data());
    } else if (a.kind == "ls2") {
        value = ls_depth2(a.mu, a.sigma, need_data());
    } else if (a.kind == "pointmass") {
        const Matrix g = to_square(a.gamma, "--gamma");
        const Vector e = a.direction.empty() ? Vector::Unit(g.rows(), 0) : to_vector(a.direction);
        value = scatter_depth_pointmass(SpdMatrix(g), a.epsilon, a.r, Direction(e));
    } else {
        throw ConfigError("unknown depth kind " + a.kind);
    }
    std::cout << fmt::format("{:.6f}\n", value);
    return kOk;
}

// ---------------------------------------------------------------------------

struct MaxbiasArgs {
    std::string curve;
    std::string grid = "0:0.3:0.05";
    std::string svg;
    std::string output;
    bool log = false;
};

std::vector<double> parse_grid(const std::string& spec) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) {
        double v;
        if (!detail::parse_double(item, v)) throw ConfigError("--grid expects a:b:step, got " + spec);
        parts.push_back(v);
    }
    if (parts.size() != 3) throw ConfigError("--grid expects a:b:step, got " + spec);
    try {
        return epsilon_grid(parts[0], parts[1], parts[2]);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

int cmd_maxbias(const MaxbiasArgs& a) {
    if (a.curve == "ls2-breakdown") {
        std::cout << fmt::format("{:.10f}\n", ls2_breakdown());
        return kOk;
    }
    if (a.curve == "scatter-breakdown") {
        std::cout << fmt::format("{:.10f}\n", scatter_breakdown());
        return kOk;
    }
    const auto& ids = curve_ids();
    if (std::find(ids.begin(), ids.end(), a.curve) == ids.end()) throw ConfigError("unknown curve " + a.curve);
    const MaxBiasCurve c = curve_table(a.curve, parse_grid(a.grid));
    std::ostringstream csv;
    write_curve_csv(csv, c);
    if (a.output.empty())
        std::cout << csv.str();
    else
        write_text(a.output, csv.str());
    if (!a.svg.empty()) {
        svg::PlotOptions opt;
        opt.title = "maximum bias: " + c.id;
        opt.xlabel = "epsilon";
        opt.ylabel = a.log ? "bias (log scale)" : "bias";
        opt.log_y = a.log;
        opt.asymptote = c.breakdown;
        write_text(a.svg, svg::line_plot({{c.id, c.epsilon, c.values}}, opt));
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string output;
    bool resume = false;
    int threads = -1;
};

int cmd_simulate(const SimulateArgs& a) {
    SimulationConfig cfg = SimulationConfig::from(ConfigFile::load(a.config));
    if (const char* env = std::getenv("DEPTHLAB_SEED")) {
        try {
            cfg.seed = std::stoull(env, nullptr, 0);
        } catch (const std::logic_error&) {
            throw ConfigError(std::string("DEPTHLAB_SEED is not an integer: ") + env);
        }
    }
    if (!a.output.empty()) cfg.output = a.output;
    if (a.threads >= 0) cfg.threads = a.threads;
    const GridSpec grid = cfg.grid();
    const fs::path out_path = cfg.output;

    std::vector<BiasRecord> kept;
    if (a.resume && fs::exists(out_path)) {
        std::ifstream in(out_path);
        const auto previous = read_records(in, out_path.string());
        const auto done = completed_tasks(previous, grid);
        for (const auto& r : previous)
            if (done.count(task_key(r.p, r.n, r.epsilon, r.k, r.replicate))) kept.push_back(r);
    }
    const auto done = completed_tasks(kept, grid);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + out_path.string());
    out << records_header() << '\n';
    for (const auto& r : kept) out << format_record(r) << '\n';
    out.flush();

    GridProgress progress;
    progress.cell_done = [](const GridCell& c) {
        std::cout << fmt::format("cell p={} n={} eps={} k={} done\n", c.p, c.n, c.epsilon, c.k) << std::flush;
    };
    const auto fresh = run_grid(grid, &out, cfg.threads, done, progress);
    std::size_t flagged = 0, errors = 0;
    for (const auto& r : fresh) {
        if (r.flag != RecordFlag::ok) ++flagged;
        if (r.flag == RecordFlag::error) ++errors;
    }
    std::cout << fmt::format("records: {} new, {} kept, {} flagged -> {}\n", fresh.size(), kept.size(), flagged,
                             out_path.string());
    if (!fresh.empty() && errors == fresh.size()) {
        std::cerr << "every estimator run failed\n";
        return kNumerical;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string records;
    std::string out_dir = "report";
    std::string measure = "median";
    bool plots = true;
};

std::string cell_tag(int p, int n, double eps) { return fmt::format("p{}_n{}_eps{}", p, n, eps); }

int cmd_report(const ReportArgs& a) {
    const Measure measure = parse_measure(a.measure);
    std::ifstream in(a.records);
    if (!in) throw DataError("cannot open " + a.records);
    const auto records = read_records(in, a.records);
    if (records.empty()) throw DataError(a.records + ": no records");
    const auto rows = aggregate(records, measure);
    const fs::path dir = a.out_dir;
    fs::create_directories(dir);

    std::ostringstream agg;
    write_aggregate_csv(agg, rows);
    write_text(dir / "aggregate.csv", agg.str());
    std::cout << agg.str();

    // efficiency at the clean model, one row per (p, n) with epsilon = 0 records
    std::map<std::pair<int, int>, std::vector<BiasRecord>> clean;
    for (const auto& r : records)
        if (r.epsilon == 0.0) clean[{r.p, r.n}].push_back(r);
    if (!clean.empty()) {
        std::ostringstream eff;
        eff << "estimator,p,n,efficiency\n";
        for (const auto& [pn, recs] : clean) {
            std::set<EstimatorId> present;
            for (const auto& r : recs) present.insert(r.estimator);
            if (!present.count(EstimatorId::SCOV)) continue;
            for (auto id : all_estimators()) {
                if (!present.count(id)) continue;
                double e;
                try {
                    e = efficiency(recs, id);
                } catch (const DomainError&) {
                    e = std::numeric_limits<double>::quiet_NaN();
                }
                eff << fmt::format("{},{},{},{}\n", to_string(id), pn.first, pn.second, format_number(e));
            }
        }
        write_text(dir / "efficiency.csv", eff.str());
    }

    if (!a.plots) return kOk;
    // b_k versus k per (p, n, epsilon)
    std::map<std::tuple<int, int, double>, std::vector<svg::Series>> curves;
    for (const auto& row : rows) {
        svg::Series s{to_string(row.estimator), {}, {}};
        for (const auto& pt : row.curve) {
            s.x.push_back(pt.k);
            s.y.push_back(pt.b);
        }
        curves[{row.p, row.n, row.epsilon}].push_back(std::move(s));
    }
    for (const auto& [key, series] : curves) {
        const auto [p, n, eps] = key;
        svg::PlotOptions opt;
        opt.title = fmt::format("{} of b_k, p={} n={} eps={}", to_string(measure), p, n, eps);
        opt.xlabel = "k";
        opt.ylabel = "b_k (log scale)";
        opt.log_y = true;
        try {
            write_text(dir / ("curves_" + cell_tag(p, n, eps) + ".svg"), svg::line_plot(series, opt));
        } catch (const DomainError&) {
            // every replicate flagged; nothing to draw
        }
    }
    // boxplots of log b per (p, n, epsilon, k), one box per estimator
    std::map<std::tuple<int, int, double, double>, std::map<std::size_t, std::vector<double>>> cells;
    for (const auto& r : records)
        if (r.flag == RecordFlag::ok) cells[{r.p, r.n, r.epsilon, r.k}][estimator_index(r.estimator)].push_back(std::log(r.b));
    for (const auto& [key, by_est] : cells) {
        const auto [p, n, eps, k] = key;
        std::vector<std::pair<std::string, BoxplotStats>> boxes;
        for (const auto& [idx, values] : by_est)
            if (values.size() >= 5) boxes.emplace_back(to_string(all_estimators()[idx]), boxplot_stats(values));
        if (boxes.empty()) continue;
        svg::PlotOptions opt;
        opt.title = fmt::format("log b, p={} n={} eps={} k={}", p, n, eps, k);
        opt.ylabel = "log b";
        opt.width = std::max(640, 80 * static_cast<int>(boxes.size()));
        write_text(dir / fmt::format("box_{}_k{}.svg", cell_tag(p, n, eps), k), svg::boxplot(boxes, opt));
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string estimator;
    std::string data;
    std::uint64_t seed = 1;
};

int cmd_estimate(const EstimateArgs& a) {
    const auto id = parse_estimator(a.estimator);
    if (!id) throw ConfigError("unknown estimator " + a.estimator);
    const Dataset d(read_csv_matrix(a.data));
    const auto r = run_estimator(*id, d, RngStream(a.seed, 100 + estimator_index(*id)));
    std::cout << "location";
    for (Eigen::Index j = 0; j < r.location.size(); ++j) std::cout << fmt::format(" {:.6f}", r.location(j));
    std::cout << "\nscatter\n";
    for (Eigen::Index i = 0; i < r.scatter.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.scatter.cols(); ++j) std::cout << fmt::format("{}{:.6f}", j ? " " : "", r.scatter(i, j));
        std::cout << '\n';
    }
    std::cout << fmt::format("iterations {} converged {} singular {}\n", r.iterations, r.converged, r.singular);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"depthlab: statistical depth, maximum bias and robust scatter benchmarks"};
    app.require_subcommand(1);

    DepthArgs depth;
    auto* dc = app.add_subcommand("depth", "evaluate a depth function");
    dc->add_option("kind", depth.kind, "tukey | scatter | scatter-gaussian | regression | ls1 | ls2 | pointmass")
        ->required();
    dc->add_option("--data", depth.data, "CSV file, one observation per row (regression: response last)");
    dc->add_option("--theta", depth.theta, "location candidate")->delimiter(',');
    dc->add_option("--gamma", depth.gamma, "scatter candidate, row-major p*p entries")->delimiter(',');
    dc->add_option("--center", depth.center, "known center for scatter depth (default 0)")->delimiter(',');
    dc->add_option("--beta", depth.beta, "regression coefficients")->delimiter(',');
    dc->add_option("--direction", depth.direction, "point-mass direction (default e1)")->delimiter(',');
    dc->add_option("--mu", depth.mu, "location for ls1/ls2");
    dc->add_option("--sigma", depth.sigma, "scale for ls1/ls2");
    dc->add_option("--epsilon", depth.epsilon, "point-mass contamination fraction");
    dc->add_option("--r", depth.r, "point-mass radius");
    dc->add_option("--directions", depth.directions, "sampled directions when exact depth is unavailable");
    dc->add_option("--seed", depth.seed, "direction sampling seed");

    MaxbiasArgs mb;
    auto* mc = app.add_subcommand("maxbias", "tabulate a maximum-bias curve or breakdown point");
    mc->add_option("--curve", mb.curve,
                   "tukey | univ-median | scatter-envelope | scatter-excess | scatter-l1 | scatter-lp | regdepth | "
                   "ls2-breakdown | scatter-breakdown")
        ->required();
    mc->add_option("--grid", mb.grid, "epsilon grid a:b:step");
    mc->add_option("--svg", mb.svg, "write a line plot");
    mc->add_flag("--log", mb.log, "log scale for the plot");
    mc->add_option("--output", mb.output, "CSV path (default stdout)");

    SimulateArgs sim;
    auto* sc = app.add_subcommand("simulate", "run the contamination grid");
    sc->add_option("config", sim.config, "configuration file")->required();
    sc->add_flag("--resume", sim.resume, "keep completed replicates of an existing records file");
    sc->add_option("--threads", sim.threads, "worker threads (0 = all cores)");
    sc->add_option("--output", sim.output, "records CSV (overrides the config)");

    ReportArgs rep;
    auto* rc = app.add_subcommand("report", "aggregate records and draw figures");
    rc->add_option("records", rep.records, "records CSV")->required();
    rc->add_option("--out-dir", rep.out_dir, "output directory");
    rc->add_option("--measure", rep.measure, "median | mean");
    bool no_plots = false;
    rc->add_flag("--no-plots", no_plots, "skip SVG output");

    EstimateArgs est;
    auto* ec = app.add_subcommand("estimate", "fit one location-scatter estimator");
    ec->add_option("estimator", est.estimator, "SCOV | MVE | MCD | SE | ROCKE | MM | SD | MDEPTH")->required();
    ec->add_option("--data", est.data, "CSV file")->required();
    ec->add_option("--seed", est.seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*dc) return cmd_depth(depth);
        if (*mc) return cmd_maxbias(mb);
        if (*sc) return cmd_simulate(sim);
        if (*rc) {
            rep.plots = !no_plots;
            return cmd_report(rep);
        }
        if (*ec) return cmd_estimate(est);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << fmt::format(" (breakdown {:.10g})", e.breakdown) << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kData;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}
