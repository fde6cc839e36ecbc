#include <gtest/gtest.h>

#include <cmath>

#include "depthlab/estimators.hpp"
#include "depthlab/simlab.hpp"

using namespace depthlab;

namespace {

Matrix gaussian(RngStream rng, Eigen::Index n, Eigen::Index p) {
    Matrix x(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
    return x;
}

double op_dist(const Matrix& a, const Matrix& b) {
    const Matrix d = a - b;
    return sym_eigen(0.5 * (d + d.transpose())).values.cwiseAbs().maxCoeff();
}

double log_b(const EstimatorResult& r) { return std::log(bias_measures(r).b); }

}  // namespace

TEST(EstimatorIds, RoundTrip) {
    for (auto id : all_estimators()) EXPECT_EQ(parse_estimator(to_string(id)), id);
    EXPECT_FALSE(parse_estimator("TYLER").has_value());
}

TEST(Constants, BisquareConsistency) {
    const auto rho = RhoFunction::bisquare();
    EXPECT_NEAR(consistency_scale(rho, 1, 0.5), 2.3952, 1e-3);
    EXPECT_NEAR(consistency_scale(rho, 2, 0.5), 7.0799, 1e-3);
    for (int p : {1, 2, 5}) {
        const double c = consistency_scale(rho, p, 0.5);
        EXPECT_NEAR(expected_rho_chi2(rho, c, p), 0.5, 1e-9);
    }
}

TEST(Constants, MmEfficiency) {
    for (int p : {1, 2, 3, 10}) {
        const double c = mm_efficiency_constant(p);
        EXPECT_NEAR(shape_efficiency(RhoFunction::shr(), c, p), 0.95, 1e-6) << p;
        EXPECT_EQ(mm_efficiency_constant(p), c);
    }
    EXPECT_LT(mm_efficiency_constant(1), mm_efficiency_constant(2));
}

TEST(Constants, RockeGamma) {
    EXPECT_NEAR(rocke_gamma(10, 0.1), chi2_quantile(0.9, 10) / 10 - 1, 1e-14);
    EXPECT_NEAR(rocke_gamma(10, 0.1), 0.599, 1e-3);
    EXPECT_EQ(rocke_gamma(1, 0.1), 1.0);
    const auto w = RhoFunction::rocke_biflat(0.4);
    EXPECT_EQ(w.weight(0.59), 0.0);
    EXPECT_EQ(w.weight(1.41), 0.0);
    EXPECT_GT(w.weight(1.0), 0.0);
}

TEST(Scov, TwoPoints) {
    Matrix x(2, 2);
    x << 0, 0, 2, 0;
    const auto r = scov(Dataset(x));
    EXPECT_TRUE(r.location.isApprox(Vector{{1.0, 0.0}}));
    EXPECT_TRUE(r.scatter.isApprox(Matrix(Vector{{1.0, 0.0}}.asDiagonal())));
    EXPECT_TRUE(r.singular);
    EXPECT_EQ(bias_measures(r).flag, RecordFlag::singular);
}

TEST(Scov, LargeGaussian) {
    const auto r = scov(Dataset(gaussian(RngStream(1, 0), 10000, 2)));
    EXPECT_LE(op_dist(r.scatter, Matrix::Identity(2, 2)), 0.1);
    EXPECT_FALSE(r.singular);
}

TEST(Mve, CoversHalfTheSample) {
    const Dataset d(gaussian(RngStream(2, 0), 60, 3));
    const auto r = mve(d, 200, RngStream(3, 0));
    const Vector dist = mahalanobis_rows(d.matrix(), r.location, r.scatter.inverse());
    const double c2 = chi2_quantile(static_cast<double>((60 + 3 + 1) / 2) / 60.0, 3);
    const long covered = (dist.array() <= c2 * (1 + 1e-10)).count();
    EXPECT_GE(covered, (60 + 3 + 1) / 2);
}

TEST(Mve, BoundaryDataPrefersArcEllipse) {
    // half of the points on an ellipse fit inside a thin ellipse hugging one arc
    RngStream rng(4, 0);
    Matrix x(200, 2);
    for (int i = 0; i < 200; ++i) {
        const double a = 2 * std::numbers::pi * rng.uniform();
        x.row(i) << 3 * std::cos(a) + 1e-3 * rng.normal(), std::sin(a) + 1e-3 * rng.normal();
    }
    auto criterion = [&](const Vector& mu, const Matrix& s) {
        const Vector d = mahalanobis_rows(x, mu, s.inverse());
        return std::log(s.determinant()) + 2 * std::log(detail::kth_smallest(d, 100));
    };
    const auto r = mve(Dataset(x), 500, RngStream(5, 0));
    EXPECT_LT(criterion(r.location, r.scatter), criterion(Vector::Zero(2), Vector{{9.0, 1.0}}.asDiagonal()));
}

TEST(Mve, EllipticalShape) {
    const Matrix truth = Vector{{3.0, 1.0 / 3.0}}.asDiagonal();
    double total = 0;
    for (int seed = 0; seed < 5; ++seed) {
        Matrix x = gaussian(RngStream(40 + static_cast<unsigned>(seed), 0), 1000, 2);
        x.col(0) *= 3.0;
        const auto r = mve(Dataset(x), 500, RngStream(5, 0));
        const Matrix shape = r.scatter / std::sqrt(r.scatter.determinant());
        total += (shape - truth).norm() / truth.norm();
    }
    EXPECT_LE(total / 5, 0.25);
}

TEST(Mve, AffineEquivariant) {
    const Matrix x = gaussian(RngStream(41, 0), 50, 2);
    Matrix a(2, 2);
    a << 2, 1, -0.5, 1.5;
    const Vector b{{1.0, -3.0}};
    const Matrix moved = (x * a.transpose()).rowwise() + b.transpose();
    const auto r0 = mve(Dataset(x), 200, RngStream(42, 0));
    const auto r1 = mve(Dataset(moved), 200, RngStream(42, 0));
    EXPECT_LE((r1.location - (a * r0.location + b)).norm(), 1e-8);
    EXPECT_LE((r1.scatter - a * r0.scatter * a.transpose()).norm(), 1e-8 * r1.scatter.norm());
}

TEST(Mcd, DeterminantNeverIncreases) {
    const Matrix x = gaussian(RngStream(6, 0), 100, 3);
    RngStream rng(7, 0);
    for (int s = 0; s < 20; ++s) {
        const auto run = mcd_concentrate(x, sample_indices(100, 4, rng), 52, 20);
        if (!run.ok) continue;
        for (std::size_t i = 1; i < run.log_dets.size(); ++i) EXPECT_LE(run.log_dets[i], run.log_dets[i - 1] + 1e-12);
    }
}

TEST(Mcd, CleanAndContaminated) {
    const auto clean = mcd(Dataset(gaussian(RngStream(8, 0), 1000, 2)), 500, 20, RngStream(9, 0));
    EXPECT_LE(op_dist(clean.scatter, Matrix::Identity(2, 2)), 0.25);
    Matrix x = gaussian(RngStream(10, 0), 500, 2);
    for (int i = 0; i < 100; ++i) x.row(i) << 25, 25;
    const auto cont = mcd(Dataset(x), 500, 20, RngStream(11, 0));
    EXPECT_LE(bias_measures(cont).lambda1, 2.0);
}

TEST(SBisquare, ScaleNeverIncreases) {
    const auto r = s_bisquare(Dataset(gaussian(RngStream(12, 0), 200, 5)), 0.5, RngStream(13, 0));
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1] * (1 + 1e-12));
    EXPECT_TRUE(r.converged);
}

TEST(SBisquare, ImprovesOnMveStart) {
    const Dataset d(gaussian(RngStream(14, 0), 200, 5));
    const RngStream rng(15, 0);
    const auto s = s_bisquare(d, 0.5, rng);
    const auto start = mve(d, 500, rng.substream(1));
    EXPECT_LT(op_dist(s.scatter, Matrix::Identity(5, 5)), op_dist(start.scatter, Matrix::Identity(5, 5)));
}

TEST(SBisquare, BoundedUnderHeavyReplacement) {
    Matrix x = gaussian(RngStream(16, 0), 100, 2);
    for (int i = 0; i < 45; ++i) x.row(i) << 1e4, 1e4;
    const auto r = s_bisquare(Dataset(x), 0.5, RngStream(17, 0));
    EXPECT_LT(bias_measures(r).lambda1, 10.0);
}

TEST(Rocke, BeatsBisquareInTenDimensions) {
    const Dataset d = gen_contaminated({10, 100, 0.2, 5.0, 18});
    const auto s = s_bisquare(d, 0.5, RngStream(19, 0));
    const auto r = rocke(d, 0.1, RngStream(19, 0));
    EXPECT_LT(log_b(r), log_b(s));
}

TEST(Mm, ObjectiveNeverIncreases) {
    const auto r = mm(Dataset(gaussian(RngStream(20, 0), 100, 3)), RngStream(21, 0));
    ASSERT_GE(r.trace.size(), 1u);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1] * (1 + 1e-12));
}

TEST(Mm, CleanModelEfficiency) {
    std::vector<BiasRecord> recs;
    for (int rep = 0; rep < 150; ++rep) {
        const Dataset d = gen_contaminated({2, 50, 0.0, 0.0, 1000u + static_cast<unsigned>(rep)});
        for (auto id : {EstimatorId::SCOV, EstimatorId::MM}) {
            auto b = bias_measures(run_estimator(id, d, RngStream(rep, 100)));
            b.n = 50;
            recs.push_back(b);
        }
    }
    EXPECT_GE(efficiency(recs, EstimatorId::MM), 0.85);
}

TEST(StahelDonoho, GrossOutlierDownweighted) {
    Matrix x = gaussian(RngStream(22, 0), 50, 2);
    x.row(0) << 1e6, -1e6;
    const auto r = stahel_donoho(Dataset(x), 0, RngStream(23, 0));
    EXPECT_LE(r.trace.at(0), 1e-6);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
        EXPECT_GT(r.trace[i], 0.0);
        EXPECT_LE(r.trace[i], 1.0);
    }
}

TEST(StahelDonoho, CleanCloseToScov) {
    const Dataset d(gaussian(RngStream(24, 0), 1000, 2));
    const auto r = stahel_donoho(d, 0, RngStream(25, 0));
    EXPECT_LE(op_dist(r.scatter, scov(d).scatter), 0.2);
}

TEST(StahelDonoho, OutlyingnessGrowsWithDirections) {
    const Matrix x = gaussian(RngStream(26, 0), 40, 3);
    const Matrix all = direction_matrix(unit_directions(400, 3, RngStream(27, 0)));
    const Vector few = sd_outlyingness(x, all.leftCols(20));
    const Vector many = sd_outlyingness(x, all);
    EXPECT_TRUE((many.array() >= few.array()).all());
    EXPECT_EQ(sd_weight(1.0, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(sd_weight(4.0, 2.0), 0.25);
}

TEST(Mdepth, CleanAndContaminated) {
    const auto clean = mdepth_estimator(Dataset(gaussian(RngStream(28, 0), 5000, 2)));
    EXPECT_LE(op_dist(clean.scatter, Matrix::Identity(2, 2)), 0.15);
    EXPECT_GE(clean.trace.back(), clean.trace.front());
    EXPECT_NEAR(clean.normalization, std::pow(std_normal_quantile(0.75), 2), 1e-15);

    Matrix x = gaussian(RngStream(29, 0), 1000, 2);
    for (int i = 0; i < 200; ++i) x.row(i) << 25, 25;
    const auto cont = mdepth_estimator(Dataset(x));
    const auto e = scatter_eigen_bounds(0.2);
    EXPECT_LE(bias_measures(cont).lambda1, e.l1 / e.beta + 0.5);
}

TEST(AllEstimators, TranslationEquivariant) {
    const Matrix x = gaussian(RngStream(30, 0), 40, 2);
    const Vector shift{{3.0, -7.0}};
    const Matrix moved = x.rowwise() + shift.transpose();
    for (auto id : all_estimators()) {
        const auto a = run_estimator(id, Dataset(x), RngStream(31, 0));
        const auto b = run_estimator(id, Dataset(moved), RngStream(31, 0));
        EXPECT_LE((b.location - a.location - shift).norm(), 1e-8) << to_string(id);
        EXPECT_LE((b.scatter - a.scatter).norm(), 1e-8 * std::max(1.0, a.scatter.norm())) << to_string(id);
    }
}

TEST(AllEstimators, Deterministic) {
    const Dataset d = gen_contaminated({2, 30, 0.1, 10.0, 32});
    for (auto id : all_estimators()) {
        const auto a = run_estimator(id, d, RngStream(33, 0));
        const auto b = run_estimator(id, d, RngStream(33, 0));
        EXPECT_EQ(a.scatter, b.scatter) << to_string(id);
        EXPECT_EQ(a.location, b.location) << to_string(id);
    }
}

TEST(AllEstimators, RobustSeparationFromScov) {
    const Dataset d = gen_contaminated({2, 80, 0.2, 25.0, 34});
    const double base = log_b(scov(d));
    for (auto id : all_estimators()) {
        if (id == EstimatorId::SCOV) continue;
        EXPECT_LE(log_b(run_estimator(id, d, RngStream(35, 0))), base - 3.0) << to_string(id);
    }
}
