#include <doctest.h>

#include <Eigen/QR>
#include <cmath>
#include <set>

#include "snrprobe/cka.hpp"
#include "snrprobe/error.hpp"
#include "snrprobe/kernels.hpp"
#include "test_util.hpp"

using namespace snrprobe;
using testutil::random_matrix;

namespace {

// HSIC(K, L) = tr(K H L H) / (n-1)^2 with the centring matrix H.
double hsic_oracle(const Matrix& k, const Matrix& l) {
  const Eigen::Index n = k.rows();
  Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  return (k * h * l * h).trace() / std::pow(static_cast<double>(n - 1), 2);
}

double gram_cka_oracle(const Matrix& x, const Matrix& y) {
  Matrix k = x * x.transpose();
  Matrix l = y * y.transpose();
  return hsic_oracle(k, l) / std::sqrt(hsic_oracle(k, k) * hsic_oracle(l, l));
}

Matrix random_orthogonal(Eigen::Index d, std::uint64_t seed) {
  Matrix a = random_matrix(static_cast<std::size_t>(d), static_cast<std::size_t>(d), seed);
  Eigen::HouseholderQR<Matrix> qr(a);
  return qr.householderQ() * Matrix::Identity(d, d);
}

// Clean rows X and noise rows E that are orthogonal in sample and feature
// space, so that CKA(X, X + sE) = 1 / sqrt(1 + s^4 r).
struct OrthogonalPair {
  Matrix x, e;
  double r;
};

OrthogonalPair orthogonal_pair(std::uint64_t seed) {
  const Eigen::Index n = 6;
  Matrix basis_in = random_matrix(6, 6, seed);
  basis_in.col(0).setOnes();
  Eigen::HouseholderQR<Matrix> qr(basis_in);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix a = random_matrix(2, 2, seed + 1), b = random_matrix(3, 2, seed + 2);
  OrthogonalPair p{Matrix::Zero(n, 4), Matrix::Zero(n, 4), 0.0};
  p.x.leftCols(2) = q.middleCols(1, 2) * a;
  p.e.rightCols(2) = q.middleCols(3, 3) * b;
  p.r = (p.e.transpose() * p.e).squaredNorm() / (p.x.transpose() * p.x).squaredNorm();
  return p;
}

double sigma_for(double target, double r) { return std::pow((1.0 / (target * target) - 1.0) / r, 0.25); }

std::vector<double> row(const Matrix& m, Eigen::Index i) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) v[static_cast<std::size_t>(j)] = m(i, j);
  return v;
}

LayerInfo layer(const std::string& id) {
  LayerInfo l;
  l.id = id;
  l.block = "enc1";
  l.pooled_shape = {2, 2};
  return l;
}

}  // namespace

TEST_SUITE("cka") {
  TEST_CASE("center_columns examples") {
    Matrix m(2, 1);
    m << 1, 3;
    Matrix c = center_columns(m);
    CHECK(c(0, 0) == -1.0);
    CHECK(c(1, 0) == 1.0);

    Matrix r = random_matrix(5, 3, 1);
    Matrix rc = center_columns(r);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(rc.col(j).mean()) <= 1e-12);
    CHECK((center_columns(rc) - rc).cwiseAbs().maxCoeff() <= 1e-15);

    CHECK_THROWS_AS(center_columns(Matrix::Ones(1, 3)), Error);
  }

  TEST_CASE("self-similarity is one") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      Matrix x = random_matrix(3 + s % 10, 1 + s % 7, s);
      CHECK(std::abs(linear_cka(x, x) - 1.0) <= 1e-10);
    }
  }

  TEST_CASE("single columns give the squared Pearson correlation") {
    Matrix x(3, 1), y(3, 1);
    x << 1, 2, 3;
    y << 1, 2, 4;
    const double mx = 2.0, my = 7.0 / 3.0;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 3; ++i) {
      sxy += (x(i, 0) - mx) * (y(i, 0) - my);
      sxx += (x(i, 0) - mx) * (x(i, 0) - mx);
      syy += (y(i, 0) - my) * (y(i, 0) - my);
    }
    const double r2 = sxy * sxy / (sxx * syy);
    CHECK(linear_cka(x, y) == doctest::Approx(r2).epsilon(1e-14));
    CHECK(linear_cka(x, y) == doctest::Approx(0.9642).epsilon(1e-4));
  }

  TEST_CASE("agrees with the Gram/HSIC formulation") {
    for (std::uint64_t s = 0; s < 25; ++s) {
      Matrix x = random_matrix(8, 5, 100 + s), y = random_matrix(8, 5, 200 + s);
      CHECK(std::abs(linear_cka(x, y) - gram_cka_oracle(x, y)) <= 1e-12);
      // Wide inputs take the Gram branch, tall inputs the feature branch.
      Matrix wx = random_matrix(4, 30, 300 + s), wy = random_matrix(4, 20, 400 + s);
      CHECK(std::abs(linear_cka(wx, wy) - gram_cka_oracle(wx, wy)) <= 1e-12);
      Matrix tx = random_matrix(60, 3, 500 + s), ty = random_matrix(60, 2, 600 + s);
      CHECK(std::abs(linear_cka(tx, ty) - gram_cka_oracle(tx, ty)) <= 1e-12);
    }
  }

  TEST_CASE("invariance properties over random cases") {
    for (std::uint64_t s = 0; s < 120; ++s) {
      SeededStream rng(s);
      const std::size_t n = 4 + rng.index(20), d1 = 1 + rng.index(12), d2 = 1 + rng.index(12);
      Matrix x = random_matrix(n, d1, 1000 + s), y = random_matrix(n, d2, 2000 + s);
      const double base = linear_cka(x, y);
      CHECK(base >= 0.0);
      CHECK(base <= 1.0);
      CHECK(std::abs(linear_cka(y, x) - base) <= 1e-12);
      Matrix q = random_orthogonal(static_cast<Eigen::Index>(d2), 3000 + s);
      CHECK(std::abs(linear_cka(x, y * q) - base) <= 1e-10);
      for (double beta : {1e-3, 1.0, 1e3}) CHECK(std::abs(linear_cka(x, beta * y) - base) <= 1e-12);
      Matrix shifted = y;
      for (Eigen::Index j = 0; j < shifted.cols(); ++j) shifted.col(j).array() += rng.normal() * 5.0;
      CHECK(std::abs(linear_cka(x, shifted) - base) <= 1e-12);
    }
  }

  TEST_CASE("input errors") {
    auto code = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::StageFailure;
    };
    CHECK(code([] { linear_cka(Matrix::Ones(3, 2), Matrix::Ones(4, 2)); }) == ErrorCode::RowMismatch);
    CHECK(code([] { linear_cka(Matrix::Ones(1, 2), Matrix::Ones(1, 2)); }) == ErrorCode::TooFewRows);
    CHECK(code([] { linear_cka(Matrix::Ones(3, 2), random_matrix(3, 2, 1)); }) == ErrorCode::DegenerateInput);
  }

  TEST_CASE("closed-form orthogonal construction") {
    OrthogonalPair p = orthogonal_pair(7);
    for (double target : {0.3, 0.5, 0.9, 0.99}) {
      Matrix y = p.x + sigma_for(target, p.r) * p.e;
      CHECK(linear_cka(p.x, y) == doctest::Approx(target).epsilon(1e-12));
    }
  }

  TEST_CASE("bootstrap over two values enumerates to {0.4, 0.5, 0.6}") {
    std::vector<double> v{0.4, 0.6};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Interval ci = bootstrap_mean_ci(v, 200, 0.95, seed);
      auto member = [](double x) {
        return std::abs(x - 0.4) < 1e-15 || std::abs(x - 0.5) < 1e-15 || std::abs(x - 0.6) < 1e-15;
      };
      CHECK(member(ci.low));
      CHECK(member(ci.high));
      CHECK(ci.low <= ci.high);
      Interval again = bootstrap_mean_ci(v, 200, 0.95, seed);
      CHECK(again.low == ci.low);
      CHECK(again.high == ci.high);
    }
    // With many resamples the 2.5% and 97.5% quantiles of {0.4 (1/4), 0.5 (1/2), 0.6 (1/4)}.
    Interval wide = bootstrap_mean_ci(v, 4000, 0.95, 1);
    CHECK(wide.low == doctest::Approx(0.4));
    CHECK(wide.high == doctest::Approx(0.6));
  }

  TEST_CASE("cka_profile: identical noisy embeddings") {
    Matrix x = random_matrix(6, 4, 3);
    std::vector<Embedding> e;
    for (Eigen::Index i = 0; i < 6; ++i) {
      const std::string u = "u" + std::to_string(i);
      e.push_back({CellKey::clean_ref("L"), u, row(x, i)});
      e.push_back({CellKey::noisy("L", "hum", 30), u, row(x, i)});
      e.push_back({CellKey::noisy("L", "babble", 30), u, row(x, i)});
    }
    EmbeddingSet set({layer("L")}, e);
    CKAPoint p = cka_profile(set, "L", 30, CKAConfig{});
    CHECK(p.cka == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.ci_low == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.ci_high == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.n_rows == 6);
  }

  TEST_CASE("cka_profile: per-noise values 0.4 and 0.6") {
    OrthogonalPair p = orthogonal_pair(11);
    Matrix ya = p.x + sigma_for(0.4, p.r) * p.e;
    Matrix yb = p.x + sigma_for(0.6, p.r) * p.e;
    std::vector<Embedding> e;
    for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
      const std::string u = "u" + std::to_string(i);
      e.push_back({CellKey::clean_ref("L"), u, row(p.x, i)});
      e.push_back({CellKey::noisy("L", "a", 0), u, row(ya, i)});
      e.push_back({CellKey::noisy("L", "b", 0), u, row(yb, i)});
    }
    EmbeddingSet set({layer("L")}, e);
    CKAConfig cfg;
    cfg.rng_seed = 5;
    CKAPoint pt = cka_profile(set, "L", 0, cfg);
    CHECK(pt.cka == doctest::Approx(0.5).epsilon(1e-12));
    REQUIRE(pt.per_noise.size() == 2);
    CHECK(pt.per_noise[0].second == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(pt.per_noise[1].second == doctest::Approx(0.6).epsilon(1e-12));
    for (double end : {pt.ci_low, pt.ci_high}) {
      CHECK((std::abs(end - 0.4) < 1e-9 || std::abs(end - 0.5) < 1e-9 || std::abs(end - 0.6) < 1e-9));
    }
    CKAPoint again = cka_profile(set, "L", 0, cfg);
    CHECK(again.ci_low == pt.ci_low);
    CHECK(again.ci_high == pt.ci_high);

    cfg.rows = RowUnit::Centroids;
    CKAPoint cp = cka_profile(set, "L", 0, cfg);
    CHECK(cp.n_rows == 2);
    CHECK(cp.cka >= 0.0);
    CHECK(cp.cka <= 1.0);
  }

  TEST_CASE("noise that shrinks with SNR gives nondecreasing CKA") {
    SeededStream rng(9);
    Matrix x = random_matrix(10, 6, 40);
    std::vector<Embedding> e;
    std::vector<Matrix> noise;
    for (int k = 0; k < 2; ++k) noise.push_back(random_matrix(10, 6, 50 + static_cast<std::uint64_t>(k)));
    for (Eigen::Index i = 0; i < x.rows(); ++i) e.push_back({CellKey::clean_ref("L"), "u" + std::to_string(i), row(x, i)});
    for (int snr = -10; snr <= 30; ++snr) {
      const double sigma = std::pow(10.0, -snr / 20.0);
      for (int k = 0; k < 2; ++k) {
        Matrix y = x + sigma * noise[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < x.rows(); ++i)
          e.push_back({CellKey::noisy("L", k ? "b" : "a", snr), "u" + std::to_string(i), row(y, i)});
      }
    }
    LayerInfo l = layer("L");
    l.pooled_shape = {2, 3};
    EmbeddingSet set({l}, e);
    kernels::set_num_threads(3);
    auto grid = cka_grid(set, CKAConfig{});
    kernels::set_num_threads(1);
    auto serial = cka_grid(set, CKAConfig{});
    REQUIRE(grid.size() == 41);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      CHECK(grid[i].snr_db == -10 + static_cast<int>(i));
      CHECK(grid[i].cka == serial[i].cka);
      CHECK(grid[i].ci_low == serial[i].ci_low);
      if (i > 0) CHECK(grid[i].cka >= grid[i - 1].cka);
    }
  }

  TEST_CASE("missing noisy cell") {
    Matrix x = random_matrix(4, 4, 3);
    std::vector<Embedding> e;
    for (Eigen::Index i = 0; i < 4; ++i) {
      e.push_back({CellKey::clean_ref("L"), "u" + std::to_string(i), row(x, i)});
      e.push_back({CellKey::noisy("L", "a", 0), "u" + std::to_string(i), row(x, i)});
    }
    EmbeddingSet set({layer("L")}, e);
    try {
      cka_profile(set, "L", 5, CKAConfig{});
      FAIL("expected MissingCell");
    } catch (const Error& err) {
      CHECK(err.code() == ErrorCode::MissingCell);
    }
  }
}
