#include <random>

#include <gtest/gtest.h>

#include "rgd/linalg.hpp"

using namespace rgd;

namespace {

Matrix row(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Matrix random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Matrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) x(i, j) = g(rng);
  return x * x.transpose() + 0.5 * Matrix::Identity(n, n);
}

}  // namespace

TEST(SpdSqrt, IdentityIsFixed) {
  const auto r = spd_sqrt(SPDMatrixd::identity(2));
  EXPECT_LT((r.matrix() - Matrix::Identity(2, 2)).norm(), 1e-15);
}

TEST(SpdSqrt, DiagonalTakesEntrywiseRoots) {
  Vector d(2);
  d << 4.0, 9.0;
  const auto r = spd_sqrt(SPDMatrixd::diagonal(d));
  EXPECT_NEAR(r(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-14);
}

TEST(SpdSqrt, SquareReproducesInput) {
  const Matrix a = mat2(2, 1, 1, 2);
  const auto r = spd_sqrt(SPDMatrixd(a));
  EXPECT_LT((r.matrix() * r.matrix() - a).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((r.matrix() - r.matrix().transpose()).norm(), 1e-15);
}

TEST(SpdSqrt, RejectsNonSymmetricAndSingular) {
  try {
    SPDMatrixd bad(mat2(1, 0.5, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSPD);
  }
  EXPECT_THROW(SPDMatrixd(mat2(1, 1, 1, 1)), Error);
  EXPECT_THROW(SPDMatrixd(mat2(-1, 0, 0, 1)), Error);
}

TEST(SpdSqrt, MonotoneOnDiagonalPairs) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int k = 0; k < 100; ++k) {
    Vector lo(3), hi(3);
    for (int i = 0; i < 3; ++i) {
      lo(i) = u(rng);
      hi(i) = lo(i) + u(rng);
    }
    const auto rl = SPDMatrixd::diagonal(lo).sqrt();
    const auto rh = SPDMatrixd::diagonal(hi).sqrt();
    for (int i = 0; i < 3; ++i) EXPECT_LE(rl(i, i), rh(i, i));
  }
}

TEST(Projector, AxisAligned) {
  const auto p = make_projector(row(1, 0), SPDMatrixd::identity(2));
  Vector z(2);
  z << 1.5, -2.0;
  EXPECT_NEAR(p.im(z)(0), 1.5, 1e-15);
  EXPECT_NEAR(p.im(z)(1), 0.0, 1e-15);
  EXPECT_NEAR(p.ker(z)(0), 0.0, 1e-15);
  EXPECT_NEAR(p.ker(z)(1), -2.0, 1e-15);
}

TEST(Projector, MatchesComponentwiseFormulas) {
  const SPDMatrixd a(mat2(1, 0.5, 0.5, 1));
  const auto p = make_projector(row(1, 0), a);
  const Matrix& c = a.sqrt();
  const double c11 = c(0, 0), c12 = c(0, 1);
  const double a11 = a(0, 0);
  Matrix im(2, 2), ker(2, 2);
  im << c11 * c11, c11 * c12, c11 * c12, c12 * c12;
  ker << c12 * c12, -c11 * c12, -c11 * c12, c11 * c11;
  im /= a11;
  ker /= a11;
  EXPECT_LT((p.p_im() - im).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((p.p_ker() - ker).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projector, DegenerateVolatilityIsRejected) {
  try {
    make_projector(row(0, 0), SPDMatrixd::identity(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateVolatility);
  }
}

TEST(Projector, AlgebraicIdentitiesOnRandomInputs) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4;
    const int d = 1 + trial % n;
    Matrix sigma(d, n);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < n; ++j) sigma(i, j) = g(rng);
    const auto p = make_projector(sigma, SPDMatrixd(random_spd(rng, n)));
    const Matrix& P = p.p_im();
    const Matrix& Q = p.p_ker();
    const Matrix I = Matrix::Identity(n, n);
    EXPECT_LT((P * P - P).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((Q * Q - Q).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((P + Q - I).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((P * Q).cwiseAbs().maxCoeff(), 1e-10);

    Vector z(n), z2(n);
    for (int i = 0; i < n; ++i) {
      z(i) = g(rng);
      z2(i) = g(rng);
    }
    EXPECT_NEAR(p.im(z).dot(p.ker(z2)), 0.0, 1e-10);
    EXPECT_NEAR(z.squaredNorm(), p.im(z).squaredNorm() + p.ker(z).squaredNorm(), 1e-10 * (1 + z.squaredNorm()));
    EXPECT_LT((p.im(z) + p.ker(z) - z).norm(), 1e-12 * (1 + z.norm()));

    // Pi(z) must be a combination of the rows of sigma a^{1/2}.
    const Matrix lt = p.loading().transpose();
    const Vector coef = lt.colPivHouseholderQr().solve(p.im(z));
    EXPECT_LT((lt * coef - p.im(z)).norm(), 1e-9);
  }
}

TEST(Loewner, OrderOnDiagonals) {
  Vector lo(2), hi(2);
  lo << 0.8, 0.8;
  hi << 1.2, 1.2;
  const auto l = SPDMatrixd::diagonal(lo);
  const auto h = SPDMatrixd::diagonal(hi);
  EXPECT_TRUE(loewner_leq<double>(l.matrix(), h.matrix()));
  EXPECT_FALSE(loewner_leq<double>(h.matrix(), l.matrix()));
  EXPECT_TRUE(loewner_between(SPDMatrixd(mat2(1, 0.1, 0.1, 1)), l, h));
  EXPECT_FALSE(loewner_between(SPDMatrixd(mat2(1, 0.3, 0.3, 1)), l, h));
}

TEST(Templates, FloatInstantiation) {
  MatrixX<float> a(2, 2);
  a << 4.f, 0.f, 0.f, 1.f;
  const SPDMatrix<float> s(a);
  EXPECT_NEAR(s.sqrt()(0, 0), 2.f, 1e-6f);
}
