#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "hte/errors.hpp"
#include "hte/rng.hpp"
#include "hte/rotation.hpp"

using namespace hte;

TEST_CASE("rng stream is deterministic and splittable") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream s1 = RngStream(42).substream(1);
  RngStream s2 = RngStream(42).substream(2);
  CHECK(s1.next_u64() != s2.next_u64());
  // substream of equal streams is equal
  RngStream c1 = RngStream(9).substream(3);
  RngStream c2 = RngStream(9).substream(3);
  CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("uniform and gaussian draws have the right moments") {
  RngStream rng(1);
  const int n = 100000;
  double usum = 0.0, gsum = 0.0, gsq = 0.0;
  for (int i = 0; i < n; ++i) {
    usum += rng.next_uniform();
    const double g = rng.next_gaussian();
    gsum += g;
    gsq += g * g;
  }
  CHECK(std::abs(usum / n - 0.5) < 0.01);
  CHECK(std::abs(gsum / n) < 0.02);
  CHECK(std::abs(gsq / n - 1.0) < 0.05);
}

TEST_CASE("next_below is in range and covers all values") {
  RngStream rng(5);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::uint64_t v = rng.next_below(7);
    REQUIRE(v < 7);
    ++seen[static_cast<std::size_t>(v)];
  }
  for (int c : seen) CHECK(c > 0);
}

TEST_CASE("gaussian_matrix moments and determinism") {
  {
    RngStream rng(3);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += gaussian_matrix(1, rng)(0, 0);
    CHECK(std::abs(sum / 100000.0) < 0.02);
  }
  {
    RngStream rng(4);
    double sq = 0.0;
    int count = 0;
    for (int i = 0; i < 10000; ++i) {
      const Eigen::MatrixXd m = gaussian_matrix(2, rng);
      sq += m.squaredNorm();
      count += 4;
    }
    CHECK(std::abs(sq / count - 1.0) < 0.05);
  }
  RngStream a(11, 2);
  RngStream b(11, 2);
  CHECK(gaussian_matrix(3, a) == gaussian_matrix(3, b));
  RngStream r(1);
  CHECK_THROWS_AS(gaussian_matrix(0, r), InvalidInputError);
}

TEST_CASE("householder_qr basic cases") {
  {
    const Eigen::MatrixXd i3 = Eigen::MatrixXd::Identity(3, 3);
    const QrResult qr = householder_qr(i3);
    CHECK((qr.q - i3).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((qr.w - i3).cwiseAbs().maxCoeff() < 1e-12);
  }
  {
    Eigen::MatrixXd m(2, 2);
    m << 0, -1, 1, 0;
    const QrResult qr = householder_qr(m);
    CHECK((qr.q * qr.w - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((qr.q.transpose() * qr.q - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-12);
  }
  {
    RngStream rng(8);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::MatrixXd m = gaussian_matrix(5, rng);
      const QrResult qr = householder_qr(m);
      CHECK((qr.q.transpose() * qr.q - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <
            1e-10);
      CHECK((qr.q * qr.w - m).cwiseAbs().maxCoeff() < 1e-10);
      for (int j = 0; j < 5; ++j) {
        CHECK(qr.w(j, j) > 0.0);
        for (int i = j + 1; i < 5; ++i) CHECK(std::abs(qr.w(i, j)) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(householder_qr(Eigen::MatrixXd::Zero(3, 3)), DegenerateMatrixError);
}

TEST_CASE("sample_rotation gives orthogonal det-one matrices") {
  {
    RngStream rng(2);
    const Eigen::MatrixXd r = sample_rotation(1, rng);
    CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int d = 1; d <= 8; ++d) {
    RngStream rng(100 + static_cast<std::uint64_t>(d));
    for (int rep = 0; rep < 1000; ++rep) {
      const Eigen::MatrixXd r = sample_rotation(d, rng);
      CHECK((r.transpose() * r - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(r.determinant() - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("2-D rotation angle is uniform (KS test at alpha = 0.01)") {
  RngStream rng(12345);
  const int n = 10000;
  std::vector<double> angles(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd r = sample_rotation(2, rng);
    double theta = std::atan2(r(1, 0), r(0, 0));
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    angles[static_cast<std::size_t>(i)] = theta / (2.0 * std::numbers::pi);
  }
  std::sort(angles.begin(), angles.end());
  double dstat = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    dstat = std::max({dstat, angles[static_cast<std::size_t>(i)] - lo,
                      hi - angles[static_cast<std::size_t>(i)]});
  }
  // critical value of the one-sample KS statistic at alpha = 0.01
  CHECK(dstat < 1.628 / std::sqrt(static_cast<double>(n)));
}
