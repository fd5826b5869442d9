#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <prunekit/matrix.hpp>
#include <prunekit/prox.hpp>
#include <prunekit/rng.hpp>

using namespace prunekit;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("row prox hand value") {
  // ||(3,4)|| = 5, factor 1 - 1/5 = 0.8 -> (2.4, 3.2).
  const Matrix c(1, 2, std::vector<double>{3, 4});
  const Matrix out = row_group_prox(c, 1.0);
  REQUIRE(out(0, 0) == Catch::Approx(2.4));
  REQUIRE(out(0, 1) == Catch::Approx(3.2));
}

TEST_CASE("norm at the threshold boundary maps to exactly zero") {
  const Matrix c(1, 2, std::vector<double>{3, 4});
  const Matrix out = row_group_prox(c, 5.0);
  REQUIRE(out(0, 0) == 0.0);
  REQUIRE(out(0, 1) == 0.0);

  const Matrix below = row_group_prox(c, 5.0000001);
  REQUIRE(below(0, 0) == 0.0);
}

TEST_CASE("zero threshold is the exact identity") {
  Rng rng(3);
  const Matrix c = random_matrix(rng, 5, 7);
  REQUIRE(row_group_prox(c, 0.0) == c);
  REQUIRE(col_group_prox(c, 0.0) == c);
}

TEST_CASE("zero-norm groups stay zero without NaN") {
  Matrix c(2, 2);
  c(0, 0) = 1.0;  // row 1 and col 1 are all-zero groups
  const Matrix r = row_group_prox(c, 0.5);
  REQUIRE(r(1, 0) == 0.0);
  REQUIRE(r.all_finite());
  const Matrix k = col_group_prox(c, 0.5);
  REQUIRE(k(0, 1) == 0.0);
  REQUIRE(k.all_finite());
}

TEST_CASE("negative threshold is rejected") {
  const Matrix c(1, 1, std::vector<double>{1.0});
  REQUIRE_THROWS_AS(row_group_prox(c, -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(col_group_prox(c, -0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(prox_oracle(c, -0.1, Axis::Row), std::invalid_argument);
}

TEST_CASE("column prox is row prox conjugated by transpose") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix c = random_matrix(rng, 1 + rng.bounded(6), 1 + rng.bounded(6));
    const double t = rng.uniform(0.0, 2.0);
    const Matrix direct = col_group_prox(c, t);
    const Matrix via_transpose = row_group_prox(c.transposed(), t).transposed();
    REQUIRE(max_abs_diff(direct, via_transpose) == 0.0);
  }
}

TEST_CASE("prox matches the brute-force oracle") {
  Rng rng(99);
  const std::vector<double> thresholds{0.0, 0.1, 0.5, 2.0};
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix c = random_matrix(rng, 1 + rng.bounded(8), 1 + rng.bounded(8));
    for (const double t : thresholds) {
      REQUIRE(max_abs_diff(row_group_prox(c, t), prox_oracle(c, t, Axis::Row)) <
              1e-6);
      REQUIRE(max_abs_diff(col_group_prox(c, t), prox_oracle(c, t, Axis::Col)) <
              1e-6);
    }
  }
}

TEST_CASE("group norm law: ||out|| = max(0, ||in|| - t)") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix c = random_matrix(rng, 1 + rng.bounded(8), 1 + rng.bounded(8));
    const double t = rng.uniform(0.0, 3.0);
    const Matrix out = row_group_prox(c, t);
    const auto in_norms = row_l2_norms(c);
    const auto out_norms = row_l2_norms(out);
    for (std::size_t p = 0; p < in_norms.size(); ++p) {
      const double expected = std::max(0.0, in_norms[p] - t);
      REQUIRE(std::fabs(out_norms[p] - expected) < 1e-12);
    }
  }
}

TEST_CASE("prox is nonexpansive") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t rows = 1 + rng.bounded(6);
    const std::size_t cols = 1 + rng.bounded(6);
    const Matrix a = random_matrix(rng, rows, cols);
    const Matrix b = random_matrix(rng, rows, cols);
    const double t = rng.uniform(0.0, 2.0);
    REQUIRE(frobenius_distance(row_group_prox(a, t), row_group_prox(b, t)) <=
            frobenius_distance(a, b) + 1e-12);
    REQUIRE(frobenius_distance(col_group_prox(a, t), col_group_prox(b, t)) <=
            frobenius_distance(a, b) + 1e-12);
  }
}

TEST_CASE("larger thresholds zero a superset of groups") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix c = random_matrix(rng, 6, 6);
    double t1 = rng.uniform(0.0, 2.0);
    double t2 = rng.uniform(0.0, 2.0);
    if (t1 > t2) std::swap(t1, t2);
    const auto n1 = row_l2_norms(row_group_prox(c, t1));
    const auto n2 = row_l2_norms(row_group_prox(c, t2));
    for (std::size_t p = 0; p < n1.size(); ++p) {
      if (n1[p] == 0.0) REQUIRE(n2[p] == 0.0);
    }
  }
}

TEST_CASE("prox output minimizes the proximal objective") {
  // Compare the closed form against random perturbations of itself.
  Rng rng(41);
  const double lambda = 0.3, rho = 0.6;  // threshold lambda/rho = 0.5
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix c = random_matrix(rng, 4, 5);
    const Matrix star = row_group_prox(c, lambda / rho);
    const double best = prox_objective(star, c, lambda, rho, Axis::Row);
    for (int k = 0; k < 40; ++k) {
      Matrix candidate = star;
      for (std::size_t i = 0; i < candidate.size(); ++i) {
        candidate.data()[i] += rng.uniform(-0.3, 0.3);
      }
      REQUIRE(prox_objective(candidate, c, lambda, rho, Axis::Row) >=
              best - 1e-9);
    }
  }
}

TEST_CASE("prox objective validates its arguments") {
  const Matrix x(1, 1, std::vector<double>{1.0});
  REQUIRE_THROWS_AS(prox_objective(x, x, 0.0, 1.0, Axis::Row),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(prox_objective(x, x, 1.0, -1.0, Axis::Col),
                    std::invalid_argument);
  const Matrix wrong(2, 1);
  REQUIRE_THROWS_AS(prox_objective(x, wrong, 1.0, 1.0, Axis::Row),
                    std::invalid_argument);
}

TEST_CASE("ProxInput overloads behave like the raw calls") {
  Rng rng(55);
  const Matrix c = random_matrix(rng, 3, 3);
  REQUIRE(row_group_prox(ProxInput{c, 0.4}) == row_group_prox(c, 0.4));
  REQUIRE(col_group_prox(ProxInput{c, 0.4}) == col_group_prox(c, 0.4));
}

TEST_CASE("oracle golden-section path agrees on degenerate scales") {
  // Tiny norms near the threshold: the branch boundary region.
  Matrix c(1, 1, std::vector<double>{0.1});
  REQUIRE(std::fabs(prox_oracle(c, 0.1, Axis::Row)(0, 0)) < 1e-6);
  c(0, 0) = 0.10001;
  REQUIRE(prox_oracle(c, 0.1, Axis::Row)(0, 0) ==
          Catch::Approx(0.00001).margin(1e-6));
}
