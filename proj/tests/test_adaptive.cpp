#include <cmath>

#include <doctest.h>

#include "hte/adaptive.hpp"
#include "hte/errors.hpp"

using namespace hte;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

std::pair<LabeledDataset, LabeledDataset> make_case_a(std::uint64_t seed, int n) {
  RngStream s_train = RngStream(seed).substream(0);
  RngStream s_val = RngStream(seed).substream(1);
  return {gen_case_a(n, 0.01, s_train), gen_case_a(n, 0.01, s_val)};
}

}  // namespace

TEST_CASE("single stage with singleton grids degenerates to plain boosting") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [train, val] = make_case_a(seed, 200);
    AbhtGrids grids{{0.05}, {0.1}, {20}};
    AbhtConfig cfg;
    cfg.max_stages = 1;
    cfg.clip_bound = 2.0;
    const ABHTModel m = fit_abht(train, val, grids, cfg, RngStream(seed, 99));

    BoostConfig bc;
    bc.learning_rate = 0.1;
    bc.max_iters = 20;
    bc.clip_bound = 2.0;
    const auto [direct, resid] =
        fit_bht(train.xs, train.ys, 0.05, bc,
                abht_candidate_stream(RngStream(seed, 99), 1, 0));
    RngStream probe(seed + 1000);
    for (int i = 0; i < 50; ++i) {
      const Eigen::VectorXd x = vec1(probe.next_uniform());
      CHECK(std::abs(predict_abht(m, x) - predict_boosted(direct, x)) < 1e-12);
    }
  }
}

TEST_CASE("stage bandwidths never increase and assignments cover") {
  const auto [train, val] = make_case_a(7, 600);
  AbhtGrids grids{{0.1, 0.05, 0.02, 0.01}, {0.1, 0.2}, {20, 50}};
  AbhtConfig cfg;
  cfg.max_stages = 5;
  const ABHTModel m = fit_abht(train, val, grids, cfg, RngStream(3));
  REQUIRE(!m.stages.empty());
  for (std::size_t l = 1; l < m.stages.size(); ++l) {
    CHECK(m.stages[l].chosen_bin_width <= m.stages[l - 1].chosen_bin_width);
  }
  RngStream probe(17);
  for (int i = 0; i < 500; ++i) {
    const Eigen::VectorXd x = vec1(probe.next_uniform());
    const int stage = m.stage_assignment(x);
    CHECK(stage >= 1);
    CHECK(stage <= m.stages.back().stage);
  }
  CHECK_THROWS_AS(predict_abht(m, vec1(1.5)), OutOfDomainError);
}

TEST_CASE("fits are reproducible under a fixed seed") {
  const auto [train, val] = make_case_a(11, 400);
  AbhtGrids grids{{0.1, 0.05, 0.02}, {0.1, 0.2}, {20, 50}};
  AbhtConfig cfg;
  cfg.max_stages = 4;
  const ABHTModel a = fit_abht(train, val, grids, cfg, RngStream(5, 5));
  const ABHTModel b = fit_abht(train, val, grids, cfg, RngStream(5, 5));
  REQUIRE(a.stages.size() == b.stages.size());
  for (std::size_t l = 0; l < a.stages.size(); ++l) {
    CHECK(a.stages[l].chosen_bin_width == b.stages[l].chosen_bin_width);
    CHECK(a.stages[l].chosen_rate == b.stages[l].chosen_rate);
    CHECK(a.stages[l].chosen_iters == b.stages[l].chosen_iters);
  }
  RngStream probe(19);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = vec1(probe.next_uniform());
    CHECK(predict_abht(a, x) == predict_abht(b, x));
  }
}

TEST_CASE("a constant noiseless target stops everywhere at stage one") {
  LabeledDataset train;
  LabeledDataset val;
  RngStream rng(23);
  train.xs.resize(400, 1);
  train.ys = Eigen::VectorXd::Constant(400, 0.5);
  val.xs.resize(400, 1);
  val.ys = Eigen::VectorXd::Constant(400, 0.5);
  for (int i = 0; i < 400; ++i) {
    train.xs(i, 0) = rng.next_uniform();
    val.xs(i, 0) = rng.next_uniform();
  }
  AbhtGrids grids{{0.1, 0.05}, {0.1, 0.2}, {20, 50}};
  AbhtConfig cfg;
  cfg.max_stages = 5;
  const ABHTModel m = fit_abht(train, val, grids, cfg, RngStream(29));
  CHECK(m.stages.size() == 1);
  CHECK(m.stages[0].chosen_bin_width == 0.1);
  RngStream probe(31);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = vec1(probe.next_uniform());
    CHECK(m.stage_assignment(x) == 1);
  }
}

TEST_CASE("partial predictions chain stage by stage") {
  const auto [train, val] = make_case_a(13, 500);
  AbhtGrids grids{{0.1, 0.05, 0.02}, {0.1, 0.2}, {20, 50}};
  AbhtConfig cfg;
  cfg.max_stages = 3;
  const ABHTModel m = fit_abht(train, val, grids, cfg, RngStream(37));
  RngStream probe(41);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = vec1(probe.next_uniform());
    CHECK(predict_abht_partial(m, x, m.stages.back().stage) ==
          doctest::Approx(predict_abht(m, x)).epsilon(1e-15));
    CHECK(predict_abht_partial(m, x, 1) ==
          doctest::Approx(predict_boosted(m.stages[0].boosted, x)).epsilon(1e-15));
  }
}

TEST_CASE("empty grids are rejected") {
  const auto [train, val] = make_case_a(17, 100);
  AbhtConfig cfg;
  CHECK_THROWS_AS(fit_abht(train, val, AbhtGrids{{}, {0.1}, {10}}, cfg, RngStream(1)),
                  InvalidInputError);
  CHECK_THROWS_AS(fit_abht(train, val, AbhtGrids{{0.1}, {}, {10}}, cfg, RngStream(1)),
                  InvalidInputError);
  CHECK_THROWS_AS(fit_abht(train, val, AbhtGrids{{0.1}, {0.1}, {}}, cfg, RngStream(1)),
                  InvalidInputError);
}

TEST_CASE("binary flavor: single stage degenerates to plain boosting") {
  RngStream gen(47);
  const int n = 300;
  LabeledDataset train, val;
  train.xs.resize(n, 3);
  train.ys.resize(n);
  val.xs.resize(n, 3);
  val.ys.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) {
      train.xs(i, j) = gen.next_uniform();
      val.xs(i, j) = gen.next_uniform();
    }
    train.ys(i) = train.xs(i, 0) + 0.05 * gen.next_gaussian();
    val.ys(i) = val.xs(i, 0) + 0.05 * gen.next_gaussian();
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AbhtConfig cfg;
    cfg.max_stages = 1;
    cfg.clip_bound = 2.0;
    const ABHTBinaryModel m = fit_abht_binary(train, val, {4}, {0.1}, {15}, cfg,
                                              RngStream(seed, 7));
    BoostConfig bc;
    bc.learning_rate = 0.1;
    bc.max_iters = 15;
    bc.clip_bound = 2.0;
    const auto [direct, resid] =
        fit_bht_binary(train.xs, train.ys, 4, bc,
                       abht_candidate_stream(RngStream(seed, 7), 1, 0));
    RngStream probe(seed + 100);
    for (int i = 0; i < 30; ++i) {
      Eigen::VectorXd x(3);
      x << probe.next_uniform(), probe.next_uniform(), probe.next_uniform();
      CHECK(std::abs(predict_abht_binary(m, x) - predict_boosted(direct, x)) < 1e-12);
    }
  }
}

TEST_CASE("binary flavor: depths never decrease and fits are deterministic") {
  RngStream gen(53);
  const int n = 500;
  LabeledDataset train, val;
  train.xs.resize(n, 2);
  train.ys.resize(n);
  val.xs.resize(n, 2);
  val.ys.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) {
      train.xs(i, j) = gen.next_uniform();
      val.xs(i, j) = gen.next_uniform();
    }
    train.ys(i) = std::sin(8.0 * train.xs(i, 0)) + 0.05 * gen.next_gaussian();
    val.ys(i) = std::sin(8.0 * val.xs(i, 0)) + 0.05 * gen.next_gaussian();
  }
  AbhtConfig cfg;
  cfg.max_stages = 3;
  const ABHTBinaryModel a =
      fit_abht_binary(train, val, {3, 5, 7}, {0.1, 0.2}, {20, 50}, cfg, RngStream(59));
  const ABHTBinaryModel b =
      fit_abht_binary(train, val, {3, 5, 7}, {0.1, 0.2}, {20, 50}, cfg, RngStream(59));
  REQUIRE(!a.stages.empty());
  for (std::size_t l = 1; l < a.stages.size(); ++l) {
    CHECK(a.stages[l].chosen_depth >= a.stages[l - 1].chosen_depth);
  }
  REQUIRE(a.stages.size() == b.stages.size());
  RngStream probe(61);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(2);
    x << probe.next_uniform(), probe.next_uniform();
    CHECK(predict_abht_binary(a, x) == predict_abht_binary(b, x));
    const int stage = a.stage_assignment(x);
    CHECK(stage >= 1);
    CHECK(stage <= a.stages.back().stage);
  }
}
