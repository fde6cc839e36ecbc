#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "depthlab/simlab.hpp"
#include "depthlab/svg.hpp"
#include "xml_check.hpp"

using namespace depthlab;

namespace {

BiasRecord record(EstimatorId id, double eps, double k, int rep, double b, double cn = 1.0) {
    BiasRecord r;
    r.estimator = id;
    r.p = 2;
    r.n = 20;
    r.epsilon = eps;
    r.k = k;
    r.replicate = rep;
    r.lambda1 = b;
    r.lambdap = 1.0;
    r.b = b;
    r.cn = cn;
    return r;
}

EstimatorResult with_scatter(const Matrix& s) { return EstimatorResult(EstimatorId::MM, Vector::Zero(s.rows()), s); }

GridSpec small_grid() {
    GridSpec g = GridSpec::product({2}, {12}, {}, {0.1}, {0, 10});
    g.replicates = 3;
    g.estimators = {EstimatorId::SCOV, EstimatorId::MCD, EstimatorId::SD};
    g.seed = 99;
    return g;
}

std::string csv_of(const std::vector<BiasRecord>& recs) {
    std::ostringstream out;
    out << records_header() << '\n';
    for (const auto& r : recs) out << format_record(r) << '\n';
    return out.str();
}

}  // namespace

TEST(Contamination, CleanAndFullyContaminated) {
    const auto clean = gen_contaminated({3, 50, 0.0, 7.0, 1});
    EXPECT_EQ(clean.n(), 50);
    EXPECT_EQ((clean.matrix().array() == 7.0).count(), 0);
    const auto full = gen_contaminated({3, 50, 1.0, 7.0, 1});
    EXPECT_TRUE((full.matrix().array() == 7.0).all());
}

TEST(Contamination, BinomialCount) {
    const auto d = gen_contaminated({2, 10000, 0.1, 25.0, 2});
    long count = 0;
    for (Eigen::Index i = 0; i < d.n(); ++i) count += d.matrix()(i, 0) == 25.0 && d.matrix()(i, 1) == 25.0;
    EXPECT_NEAR(static_cast<double>(count), 1000.0, 4 * std::sqrt(10000 * 0.1 * 0.9));
}

TEST(Contamination, CleanRowsSharedAcrossEpsilon) {
    const auto a = gen_contaminated({2, 100, 0.0, 5.0, 3});
    const auto b = gen_contaminated({2, 100, 0.2, 5.0, 3});
    for (Eigen::Index i = 0; i < 100; ++i)
        if (b.matrix()(i, 0) != 5.0) {
            EXPECT_EQ(a.matrix().row(i), b.matrix().row(i));
        }
}

TEST(Contamination, SpecValidation) {
    EXPECT_THROW((ContaminationSpec{3, 4, 0.1, 1, 0}.validate()), DomainError);
    EXPECT_THROW((ContaminationSpec{2, 20, 0.5, 1, 0}.validate()), DomainError);
    EXPECT_NO_THROW((ContaminationSpec{2, 20, 0.0, 0, 0}.validate()));
}

TEST(BiasMeasures, Examples) {
    const auto id = bias_measures(with_scatter(Matrix::Identity(2, 2)));
    EXPECT_DOUBLE_EQ(id.b, 1.0);
    EXPECT_DOUBLE_EQ(id.cn, 1.0);
    const auto ex = bias_measures(with_scatter(Vector{{4.0, 1.0}}.asDiagonal()));
    EXPECT_DOUBLE_EQ(ex.b, 4.0);
    EXPECT_DOUBLE_EQ(ex.cn, 4.0);
    const auto im = bias_measures(with_scatter(Vector{{0.1, 0.1}}.asDiagonal()));
    EXPECT_NEAR(im.b, 10.0, 1e-12);
    EXPECT_NEAR(im.cn, 1.0, 1e-12);
}

TEST(BiasMeasures, RelativeToTruth) {
    Matrix truth(2, 2), s(2, 2);
    truth << 2, 0.5, 0.5, 1;
    s = 3.0 * truth;
    const auto r = bias_measures(with_scatter(s), SpdMatrix(truth));
    EXPECT_NEAR(r.lambda1, 3.0, 1e-12);
    EXPECT_NEAR(r.lambdap, 3.0, 1e-12);
}

TEST(BiasMeasures, SingularAndNonconverged) {
    const auto s = bias_measures(with_scatter(Vector{{1.0, 0.0}}.asDiagonal()));
    EXPECT_EQ(s.flag, RecordFlag::singular);
    EXPECT_TRUE(std::isinf(s.b));
    auto r = with_scatter(Matrix::Identity(2, 2));
    r.converged = false;
    EXPECT_EQ(bias_measures(r).flag, RecordFlag::nonconverged);
}

TEST(ScovOracle, PopulationTopEigenvalue) {
    EXPECT_NEAR(mixture_lambda1(2, 0.1, 25), 113.4, 1e-9);
    EXPECT_NEAR(std::log(mixture_lambda1(2, 0.1, 25)), 4.73, 0.01);
    std::vector<double> logs;
    for (int r = 0; r < 50; ++r) {
        const auto d = gen_contaminated({2, 1000, 0.1, 25.0, 500u + static_cast<unsigned>(r)});
        logs.push_back(std::log(bias_measures(scov(d)).b));
    }
    EXPECT_NEAR(median(logs), std::log(mixture_lambda1(2, 0.1, 25)), 0.15);
}

TEST(RecordsCsv, RoundTrip) {
    std::vector<BiasRecord> recs = {record(EstimatorId::MM, 0.1, 25, 3, 2.5, 3.25),
                                    record(EstimatorId::SCOV, 0.2, 0, 0, 1.0 / 3.0)};
    recs[1].flag = RecordFlag::singular;
    recs[1].b = recs[1].cn = std::numeric_limits<double>::infinity();
    std::istringstream in(csv_of(recs));
    const auto back = read_records(in);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].estimator, EstimatorId::MM);
    EXPECT_EQ(back[0].k, 25.0);
    EXPECT_EQ(back[0].cn, 3.25);
    EXPECT_EQ(back[1].lambda1, 1.0 / 3.0);
    EXPECT_EQ(back[1].flag, RecordFlag::singular);
    EXPECT_TRUE(std::isinf(back[1].b));
    EXPECT_EQ(csv_of(back), csv_of(recs));
}

TEST(RecordsCsv, Rejections) {
    std::istringstream bad_header("a,b\n");
    EXPECT_THROW(read_records(bad_header), DataError);
    std::istringstream empty("");
    EXPECT_THROW(read_records(empty), DataError);
    std::istringstream short_row(std::string(records_header()) + "\nMM,2,20\n");
    EXPECT_THROW(read_records(short_row), DataError);
    std::istringstream bad_flag(std::string(records_header()) + "\nMM,2,20,0.1,1,0,1,1,1,1,weird\n");
    EXPECT_THROW(read_records(bad_flag), DataError);
}

TEST(Grid, FullTableGridCount) {
    GridSpec g = GridSpec::product({2}, {20}, {}, {0.1, 0.2}, {0, 1, 5, 10, 15, 20, 25});
    EXPECT_EQ(g.task_count() * g.estimators.size(), 5600u);
}

TEST(Grid, OneCellThreeReplicates) {
    GridSpec g = GridSpec::product({2}, {12}, {}, {0.1}, {5});
    g.replicates = 3;
    EXPECT_EQ(run_grid(g).size(), 3u * 8u);
}

TEST(Grid, SameOutputForAnyThreadCount) {
    const auto g = small_grid();
    std::ostringstream one, three;
    run_grid(g, &one, 1);
    run_grid(g, &three, 3);
    EXPECT_EQ(one.str(), three.str());
    std::ostringstream again;
    run_grid(g, &again, 2);
    EXPECT_EQ(one.str(), again.str());
}

TEST(Grid, ResumeSkipsCompletedTasks) {
    const auto g = small_grid();
    const auto all = run_grid(g);
    std::vector<BiasRecord> partial(all.begin(), all.begin() + 7);  // two full tasks and a partial one
    const auto done = completed_tasks(partial, g);
    EXPECT_EQ(done.size(), 2u);
    const auto rest = run_grid(g, nullptr, 1, done);
    EXPECT_EQ(rest.size(), all.size() - 6);
    std::vector<BiasRecord> merged(all.begin(), all.begin() + 6);
    merged.insert(merged.end(), rest.begin(), rest.end());
    EXPECT_EQ(csv_of(merged), csv_of(all));
    EXPECT_TRUE(run_grid(g, nullptr, 1, completed_tasks(all, g)).empty());
}

TEST(Grid, ProgressPerCell) {
    const auto g = small_grid();
    int cells = 0;
    GridProgress progress;
    progress.cell_done = [&](const GridCell&) { ++cells; };
    run_grid(g, nullptr, 2, {}, progress);
    EXPECT_EQ(cells, 2);
}

TEST(Grid, FailuresBecomeFlaggedRows) {
    // n = p + 2 leaves MVE-type estimators with degenerate subsets often enough to be flagged, never thrown
    GridSpec g = GridSpec::product({3}, {5}, {}, {0.4}, {0});
    g.replicates = 4;
    std::vector<BiasRecord> recs;
    EXPECT_NO_THROW(recs = run_grid(g));
    EXPECT_EQ(recs.size(), 32u);
}

TEST(Aggregate, SingleRecordAndMeasures) {
    const auto one = aggregate({record(EstimatorId::MM, 0.1, 5, 0, 3.0, 4.0)});
    ASSERT_EQ(one.size(), 1u);
    EXPECT_DOUBLE_EQ(one[0].b_hat_log, std::log(3.0));
    EXPECT_DOUBLE_EQ(one[0].bcn_hat_log, std::log(4.0));

    std::vector<BiasRecord> recs = {record(EstimatorId::MM, 0.1, 5, 0, 1), record(EstimatorId::MM, 0.1, 5, 1, 100),
                                    record(EstimatorId::MM, 0.1, 5, 2, 1)};
    EXPECT_DOUBLE_EQ(aggregate(recs, Measure::median)[0].curve[0].b, 1.0);
    EXPECT_DOUBLE_EQ(aggregate(recs, Measure::mean)[0].curve[0].b, 34.0);
}

TEST(Aggregate, MaxOverKAndFlaggedExcluded) {
    std::vector<BiasRecord> recs;
    for (int r = 0; r < 5; ++r) {
        recs.push_back(record(EstimatorId::SD, 0.2, 0, r, 2.0));
        recs.push_back(record(EstimatorId::SD, 0.2, 10, r, 5.0 + r));
    }
    auto flagged = record(EstimatorId::SD, 0.2, 10, 5, std::numeric_limits<double>::infinity());
    flagged.flag = RecordFlag::singular;
    recs.push_back(flagged);
    const auto rows = aggregate(recs);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_DOUBLE_EQ(rows[0].b_hat_log, std::log(7.0));
    EXPECT_EQ(rows[0].failures, 1);
    ASSERT_EQ(rows[0].curve.size(), 2u);
    EXPECT_EQ(rows[0].curve[1].used, 5);
}

TEST(Aggregate, AllFlaggedIsMissing) {
    auto r = record(EstimatorId::MVE, 0.1, 0, 0, 1);
    r.flag = RecordFlag::error;
    const auto rows = aggregate({r});
    EXPECT_TRUE(std::isnan(rows[0].b_hat_log));
    std::ostringstream out;
    write_aggregate_csv(out, rows);
    EXPECT_NE(out.str().find("MVE,2,20,0.1,median,NA,NA,1"), std::string::npos);
}

TEST(Aggregate, MedianIgnoresOneWildRecord) {
    std::vector<BiasRecord> recs;
    for (int r = 0; r < 7; ++r) recs.push_back(record(EstimatorId::MM, 0.1, 0, r, 1.0 + 0.1 * r));
    const double base = aggregate(recs)[0].b_hat_log;
    recs[6].b = 1e9;
    EXPECT_DOUBLE_EQ(aggregate(recs)[0].b_hat_log, base);
}

TEST(AggregateCsv, RoundTrip) {
    std::vector<BiasRecord> recs = {record(EstimatorId::MM, 0.1, 5, 0, 3.0), record(EstimatorId::SCOV, 0.2, 5, 0, 40)};
    const auto rows = aggregate(recs);
    std::ostringstream out;
    write_aggregate_csv(out, rows);
    std::istringstream in(out.str());
    const auto back = read_aggregate_csv(in);
    ASSERT_EQ(back.size(), rows.size());
    std::ostringstream again;
    write_aggregate_csv(again, back);
    EXPECT_EQ(out.str(), again.str());
    std::istringstream bad("nope\n");
    EXPECT_THROW(read_aggregate_csv(bad), DataError);
}

TEST(Efficiency, ScovIsOne) {
    std::vector<BiasRecord> recs;
    for (int r = 0; r < 5; ++r) {
        recs.push_back(record(EstimatorId::SCOV, 0.0, 0, r, 1.2, 1.5 + 0.1 * r));
        recs.push_back(record(EstimatorId::MM, 0.0, 0, r, 1.3, 1.6 + 0.1 * r));
    }
    EXPECT_DOUBLE_EQ(efficiency(recs, EstimatorId::SCOV), 1.0);
    EXPECT_LT(efficiency(recs, EstimatorId::MM), 1.0);
    EXPECT_THROW(efficiency(recs, EstimatorId::SD), DomainError);
    EXPECT_THROW(efficiency({record(EstimatorId::SCOV, 0.1, 0, 0, 1)}, EstimatorId::SCOV), DomainError);
}

TEST(Boxplot, Examples) {
    const auto c = boxplot_stats({2, 2, 2, 2, 2});
    EXPECT_EQ(c.lower_whisker, 2);
    EXPECT_EQ(c.upper_whisker, 2);
    EXPECT_EQ(c.q1, c.q3);
    const auto s = boxplot_stats({1, 2, 3, 4, 5, 6, 7, 8, 9});
    EXPECT_EQ(s.median, 5);
    EXPECT_EQ(s.q1, 3);
    EXPECT_EQ(s.q3, 7);
    EXPECT_EQ(s.lower_whisker, 1);
    EXPECT_EQ(s.upper_whisker, 9);
    const auto o = boxplot_stats({1, 2, 3, 4, 5, 100});
    ASSERT_EQ(o.outliers.size(), 1u);
    EXPECT_EQ(o.outliers[0], 100);
    const auto sym = boxplot_stats({-3, -2, -1, 0, 1, 2, 3});
    EXPECT_DOUBLE_EQ(sym.median - sym.q1, sym.q3 - sym.median);
    EXPECT_THROW(boxplot_stats({1, 2, 3}), DomainError);
}

TEST(Svg, LinePlotWellFormed) {
    svg::PlotOptions opt;
    opt.title = "b <vs> k & more";
    opt.log_y = true;
    opt.asymptote = 1.0 / 3.0;
    const auto s = svg::line_plot({{"MM", {0, 1, 5}, {1, 2, 0}}, {"SCOV", {0, 1, 5}, {1, 10, 100}}}, opt);
    EXPECT_EQ(xmlcheck::problems(s), "");
    EXPECT_TRUE(xmlcheck::self_contained(s));
    EXPECT_NE(s.find("&lt;vs&gt;"), std::string::npos);
    EXPECT_NE(s.find("stroke-dasharray"), std::string::npos);
}

TEST(Svg, BoxplotWellFormed) {
    svg::PlotOptions opt;
    opt.log_y = true;
    const auto s = svg::boxplot({{"MM", boxplot_stats({1, 2, 3, 4, 50})}, {"SD", boxplot_stats({2, 2, 3, 3, 4})}}, opt);
    EXPECT_EQ(xmlcheck::problems(s), "");
    EXPECT_TRUE(xmlcheck::self_contained(s));
}

TEST(Svg, CheckerCatchesBrokenXml) {
    EXPECT_NE(xmlcheck::problems("<svg><g></svg>"), "");
    EXPECT_NE(xmlcheck::problems("<svg a=1></svg>"), "");
    EXPECT_NE(xmlcheck::problems("<svg>&bogus;</svg>"), "");
    EXPECT_EQ(xmlcheck::problems("<?xml version=\"1.0\"?>\n<svg><g/></svg>\n"), "");
}
