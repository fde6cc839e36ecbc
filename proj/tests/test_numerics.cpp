#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "depthlab/dataset.hpp"
#include "depthlab/numerics.hpp"

using namespace depthlab;

TEST(NormalCdf, KnownValues) {
    EXPECT_DOUBLE_EQ(std_normal_cdf(0.0), 0.5);
    EXPECT_NEAR(std_normal_cdf(0.6745), 0.75, 1e-4);
    EXPECT_NEAR(std_normal_cdf(1.959963984540054), 0.975, 1e-14);
    EXPECT_NEAR(std_normal_cdf(-1.959963984540054), 0.025, 1e-15);
}

TEST(NormalCdf, SymmetryAndMonotone) {
    double prev = 0;
    for (double x = -8; x <= 8; x += 0.01) {
        const double c = std_normal_cdf(x);
        EXPECT_NEAR(c + std_normal_cdf(-x), 1.0, 1e-15);
        EXPECT_GE(c, prev);
        prev = c;
    }
    EXPECT_EQ(std_normal_cdf(-40), 0.0);
    EXPECT_EQ(std_normal_cdf(40), 1.0);
}

TEST(NormalQuantile, KnownValues) {
    EXPECT_EQ(std_normal_quantile(0.5), 0.0);
    EXPECT_NEAR(std_normal_quantile(0.75), 0.6745, 5e-5);
    EXPECT_NEAR(std_normal_quantile(0.975), 1.959964, 1e-6);
    EXPECT_NEAR(std_normal_quantile(0.975), 1.959963984540054, 1e-13);
}

TEST(NormalQuantile, OddAroundHalf) {
    for (double q : {std::ldexp(1.0, -30), 0.01, 0.2, 0.37, 0.49})
        EXPECT_NEAR(std_normal_quantile(q), -std_normal_quantile(1 - q), 1e-12);
}

TEST(NormalQuantile, InvertsCdf) {
    for (double lq = -10; lq <= -0.3; lq += 0.05) {
        const double q = std::pow(10.0, lq);
        EXPECT_NEAR(std_normal_cdf(std_normal_quantile(q)), q, 1e-9 * std::max(q, 1e-3));
        EXPECT_NEAR(std_normal_cdf(std_normal_quantile(1 - q)), 1 - q, 1e-9);
    }
}

TEST(NormalQuantile, RejectsOutsideUnitInterval) {
    EXPECT_THROW(std_normal_quantile(0.0), DomainError);
    EXPECT_THROW(std_normal_quantile(1.0), DomainError);
    EXPECT_THROW(std_normal_quantile(-0.2), DomainError);
}

TEST(ChiSquare, QuantilesAndCdf) {
    EXPECT_NEAR(chi2_quantile(0.5, 2), 2 * std::log(2.0), 1e-12);
    EXPECT_NEAR(chi2_quantile(0.95, 2), 5.991464547107979, 1e-10);
    EXPECT_NEAR(chi2_quantile(0.9, 10), 15.987179172105265, 1e-9);
    EXPECT_NEAR(chi2_cdf(chi2_quantile(0.3, 7), 7), 0.3, 1e-12);
}

TEST(Integrate, MatchesClosedForms) {
    EXPECT_NEAR(integrate([](double x) { return x * x; }, 0, 3), 9.0, 1e-12);
    EXPECT_NEAR(integrate([](double x) { return std::fabs(x - 1); }, 0, 2, {1.0}), 1.0, 1e-13);
    EXPECT_NEAR(integrate(std_normal_pdf, -12, 12), 1.0, 1e-13);
}

TEST(OrderStatistics, MedianConventions) {
    EXPECT_EQ(lower_median({4, 1, 3, 2}), 2);
    EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
    EXPECT_EQ(median({3, 1, 2}), 2);
    EXPECT_EQ(quantile_type7({1, 2, 3, 4, 5, 6, 7, 8, 9}, 0.25), 3);
    EXPECT_EQ(quantile_type7({1, 2, 3, 4, 5, 6, 7, 8, 9}, 0.75), 7);
    EXPECT_NEAR(quantile_type7({1, 2, 3, 4}, 0.5), 2.5, 1e-15);
}

TEST(SymEigen, Identity) {
    const auto e = sym_eigen(Matrix::Identity(2, 2));
    EXPECT_NEAR(e.values(0), 1, 1e-15);
    EXPECT_NEAR(e.values(1), 1, 1e-15);
}

TEST(SymEigen, Diagonal) {
    Matrix m(2, 2);
    m << 1, 0, 0, 4;
    const auto e = sym_eigen(m);
    EXPECT_NEAR(e.values(0), 4, 1e-15);
    EXPECT_NEAR(e.values(1), 1, 1e-15);
    EXPECT_NEAR(std::fabs(e.vectors(1, 0)), 1, 1e-15);
    EXPECT_NEAR(std::fabs(e.vectors(0, 1)), 1, 1e-15);
}

TEST(SymEigen, TwoByTwo) {
    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    const auto e = sym_eigen(m);
    EXPECT_NEAR(e.values(0), 3, 1e-14);
    EXPECT_NEAR(e.values(1), 1, 1e-14);
    EXPECT_NEAR(std::fabs(e.vectors(0, 0)), 1 / std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(e.vectors(0, 0) * e.vectors(1, 0), 0.5, 1e-14);
    EXPECT_NEAR(e.vectors(0, 1) * e.vectors(1, 1), -0.5, 1e-14);
}

TEST(SymEigen, RejectsAsymmetric) {
    Matrix m(2, 2);
    m << 1, 2, 0, 1;
    EXPECT_THROW(sym_eigen(m), DomainError);
}

TEST(SymEigen, RandomSpdUpToFifteen) {
    RngStream rng(11, 0);
    for (int p = 1; p <= 15; ++p) {
        Matrix a(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
        const Matrix m = a * a.transpose() + 0.1 * Matrix::Identity(p, p);
        const auto e = sym_eigen(m);
        EXPECT_NEAR(e.values.sum(), m.trace(), 1e-8 * m.trace());
        EXPECT_NEAR(e.values.array().log().sum(), std::log(m.determinant()), 1e-8 * std::max(1.0, std::fabs(std::log(m.determinant()))));
        for (int j = 0; j + 1 < p; ++j) EXPECT_GE(e.values(j), e.values(j + 1));
        const Matrix recon = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
        EXPECT_LE((recon - m).norm(), 1e-8 * m.norm());
        EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(p, p)).norm(), 1e-10);
        EXPECT_LE((m * e.vectors - e.vectors * e.values.asDiagonal()).norm(), 1e-8 * m.norm());
    }
}

TEST(SpdMatrixTest, InvariantsAndRejection) {
    Matrix m(2, 2);
    m << 4, 1, 1, 3;
    const SpdMatrix s(m);
    EXPECT_GE(s.l1(), s.lp());
    EXPECT_LE((s.sqrt() * s.sqrt() - m).norm(), 1e-12);
    EXPECT_LE((s.inverse() * m - Matrix::Identity(2, 2)).norm(), 1e-12);
    EXPECT_NEAR(s.log_det(), std::log(11.0), 1e-12);
    Matrix singular(2, 2);
    singular << 1, 1, 1, 1;
    EXPECT_THROW(SpdMatrix{singular}, DomainError);
    Matrix asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    EXPECT_THROW(SpdMatrix{asym}, DomainError);
}

TEST(Mahalanobis, Examples) {
    const Vector zero = Vector::Zero(2);
    EXPECT_EQ(mahalanobis_sq(zero, zero, SpdMatrix::identity(2)), 0.0);
    EXPECT_NEAR(mahalanobis_sq(Vector::Unit(2, 0), zero, SpdMatrix::identity(2)), 1.0, 1e-15);
    Matrix d(2, 2);
    d << 4, 0, 0, 1;
    EXPECT_NEAR(mahalanobis_sq(Vector::Constant(2, 2.0), zero, SpdMatrix(d)), 5.0, 1e-14);
}

TEST(Mahalanobis, AffineInvariant) {
    RngStream rng(3, 0);
    Matrix a(3, 3), c(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            a(i, j) = rng.normal();
            c(i, j) = rng.normal();
        }
    const Matrix sigma = c * c.transpose() + Matrix::Identity(3, 3);
    Vector x(3), mu(3), b(3);
    for (int i = 0; i < 3; ++i) {
        x(i) = rng.normal();
        mu(i) = rng.normal();
        b(i) = rng.normal();
    }
    const double d0 = mahalanobis_sq(x, mu, SpdMatrix(sigma));
    const Matrix s2 = a * sigma * a.transpose();
    const double d1 = mahalanobis_sq(a * x + b, a * mu + b, SpdMatrix(0.5 * (s2 + s2.transpose())));
    EXPECT_NEAR(d0, d1, 1e-8 * std::max(1.0, d0));
}

TEST(Rho, Shapes) {
    for (const auto& rho : {RhoFunction::bisquare(), RhoFunction::shr(), RhoFunction::rocke_biflat(0.5)}) {
        EXPECT_EQ(rho.rho(0), 0.0);
        double prev = 0;
        for (double t = 0; t < 12; t += 0.01) {
            const double v = rho.rho(t);
            EXPECT_GE(v, prev - 1e-15);
            EXPECT_LE(v, 1.0);
            prev = v;
        }
        EXPECT_NEAR(rho.rho(20), 1.0, 1e-15);
    }
}

TEST(Rho, WeightIsDerivative) {
    for (const auto& rho : {RhoFunction::bisquare(), RhoFunction::shr(), RhoFunction::rocke_biflat(0.6)}) {
        for (double t = 0.05; t < 10; t += 0.173) {
            const double h = 1e-6;
            const double num = (rho.rho(t + h) - rho.rho(t - h)) / (2 * h);
            EXPECT_NEAR(rho.weight(t), num, 1e-5) << t;
            const double num2 = (rho.weight(t + h) - rho.weight(t - h)) / (2 * h);
            EXPECT_NEAR(rho.weight_deriv(t), num2, 1e-4) << t;
        }
    }
}

TEST(Rho, ShrPolynomialContinuity) {
    EXPECT_NEAR(RhoFunction::shr_poly(4.0), 4.0, 1e-12);
    EXPECT_NEAR(RhoFunction::shr_poly(9.0), 6.494, 0.01);
    EXPECT_NEAR(RhoFunction::shr_poly_deriv(4.0), 1.0, 1e-12);
    EXPECT_NEAR(RhoFunction::shr_poly_deriv(9.0), 0.0, 1e-12);
    EXPECT_NEAR(RhoFunction::shr().rho(9.0), 1.0, 1e-14);
}

TEST(Rho, BiflatSupport) {
    const auto rho = RhoFunction::rocke_biflat(0.4);
    EXPECT_EQ(rho.weight(0.59), 0.0);
    EXPECT_EQ(rho.weight(1.41), 0.0);
    EXPECT_GT(rho.weight(1.0), 0.0);
}

TEST(MScale, ConstantDistances) {
    // bisquare rho(1/S) = 1/2 solves to 1/S = 1 - 2^{-1/3}
    const std::vector<double> d(9, 1.0);
    const auto rho = RhoFunction::bisquare();
    const double s = m_scale(d, rho, 0.5);
    EXPECT_NEAR(s, 1.0 / (1.0 - std::cbrt(0.5)), 1e-12);
    EXPECT_NEAR(mean_rho(d, rho, s), 0.5, 1e-10);
}

TEST(MScale, ScaleEquivariance) {
    RngStream rng(5, 0);
    const auto rho = RhoFunction::bisquare();
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> d(30), td(30);
        const double t = std::exp(3 * rng.normal());
        for (int i = 0; i < 30; ++i) {
            d[i] = std::fabs(rng.normal()) * 5;
            td[i] = t * d[i];
        }
        EXPECT_NEAR(m_scale(td, rho, 0.5), t * m_scale(d, rho, 0.5), 1e-9 * t * m_scale(d, rho, 0.5));
    }
}

TEST(MScale, TooManyZeros) {
    const std::vector<double> d = {0, 0, 0, 1};
    EXPECT_THROW(m_scale(d, RhoFunction::bisquare(), 0.5), DomainError);
}

TEST(Rng, DeterministicAndStreamsDiffer) {
    RngStream a(42, 1), b(42, 1), c(42, 2);
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        EXPECT_NE(x, c());
    }
    RngStream u(1, 0);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Rng, NormalMoments) {
    RngStream rng(9, 0);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, SampleIndicesDistinct) {
    RngStream rng(4, 0);
    const auto idx = sample_indices(10, 10, rng);
    std::vector<bool> seen(10, false);
    for (auto i : idx) {
        EXPECT_FALSE(seen[i]);
        seen[i] = true;
    }
}

TEST(Directions, OneDimensionalAreSigns) {
    for (const auto& d : unit_directions(50, 1, RngStream(1, 0))) EXPECT_EQ(std::fabs(d.coords()(0)), 1.0);
}

TEST(Directions, UnitNormAndDeterministic) {
    const auto a = unit_directions(1000, 3, RngStream(8, 0));
    const auto b = unit_directions(1000, 3, RngStream(8, 0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a[i].coords().norm(), 1.0, 1e-12);
        EXPECT_EQ(a[i].coords(), b[i].coords());
    }
}

TEST(Directions, MeanNearZero) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto dirs = unit_directions(1000, 3, RngStream(seed, 0));
        Vector m = Vector::Zero(3);
        for (const auto& d : dirs) m += d.coords();
        m /= 1000.0;
        EXPECT_LE(m.norm(), 5.0 / std::sqrt(1000.0));
    }
}

TEST(Directions, RejectsZero) { EXPECT_THROW(Direction(Vector::Zero(3)), DomainError); }

TEST(Csv, HeaderCommentsAndSeparators) {
    std::istringstream in("a,b\n# note\n1,2\n3;4\n\n5\t6\n");
    const Matrix m = parse_csv_matrix(in);
    ASSERT_EQ(m.rows(), 3);
    EXPECT_EQ(m(2, 1), 6);
}

TEST(Csv, RaggedAndNonNumericRejected) {
    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(parse_csv_matrix(ragged), DataError);
    std::istringstream bad("1,2\n3,x\n");
    EXPECT_THROW(parse_csv_matrix(bad), DataError);
    EXPECT_THROW(read_csv_matrix("/nonexistent/file.csv"), DataError);
}
