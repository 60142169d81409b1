#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "hte/data.hpp"
#include "hte/errors.hpp"
#include "hte/eval.hpp"
#include "hte/serialize.hpp"

using namespace hte;

namespace {

std::pair<LabeledDataset, LabeledDataset> small_case_a(std::uint64_t seed) {
  RngStream s_train = RngStream(seed).substream(0);
  RngStream s_val = RngStream(seed).substream(1);
  return {gen_case_a(200, 0.01, s_train), gen_case_a(200, 0.01, s_val)};
}

void check_roundtrip(const AnyModel& model, int d, int queries = 200) {
  const std::string path = "model_roundtrip_test.json";
  save_model(model, path);
  const AnyModel back = load_model(path);
  RngStream probe(4242);
  for (int i = 0; i < queries; ++i) {
    Eigen::VectorXd x(d);
    for (int j = 0; j < d; ++j) x(j) = probe.next_uniform();
    const double a = predict_any(model, x);
    const double b = predict_any(back, x);
    CHECK(std::abs(a - b) <= 1e-15 * std::max(1.0, std::abs(a)));
  }
  CHECK(model_dim(back) == d);
  std::remove(path.c_str());
}

}  // namespace

TEST_CASE("all model kinds round-trip through their files") {
  const auto [train, val] = small_case_a(3);
  const double clip = train.ys.cwiseAbs().maxCoeff();

  BoostConfig bc;
  bc.learning_rate = 0.1;
  bc.max_iters = 10;
  bc.clip_bound = clip;
  check_roundtrip(fit_bht(train.xs, train.ys, 0.05, bc, RngStream(1)).first, 1);
  check_roundtrip(fit_peht(train, 0.05, 5, clip, RngStream(2)), 1);

  AbhtGrids grids{{0.1, 0.05}, {0.1, 0.2}, {10, 20}};
  AbhtConfig acfg;
  acfg.max_stages = 3;
  check_roundtrip(fit_abht(train, val, grids, acfg, RngStream(3)), 1);

  // multivariate binary flavors
  RngStream gen(5);
  LabeledDataset mtrain, mval;
  mtrain.xs.resize(200, 3);
  mtrain.ys.resize(200);
  mval.xs.resize(200, 3);
  mval.ys.resize(200);
  for (int i = 0; i < 200; ++i) {
    for (int j = 0; j < 3; ++j) {
      mtrain.xs(i, j) = gen.next_uniform();
      mval.xs(i, j) = gen.next_uniform();
    }
    mtrain.ys(i) = mtrain.xs(i, 0) * mtrain.xs(i, 1) + 0.05 * gen.next_gaussian();
    mval.ys(i) = mval.xs(i, 0) * mval.xs(i, 1) + 0.05 * gen.next_gaussian();
  }
  const double mclip = mtrain.ys.cwiseAbs().maxCoeff();
  BoostConfig mb;
  mb.learning_rate = 0.1;
  mb.max_iters = 8;
  mb.clip_bound = mclip;
  check_roundtrip(fit_bht_binary(mtrain.xs, mtrain.ys, 4, mb, RngStream(6)).first, 3);
  check_roundtrip(fit_peht_binary(mtrain, 4, 5, mclip, RngStream(7)), 3);
  AbhtConfig bcfg;
  bcfg.max_stages = 2;
  check_roundtrip(fit_abht_binary(mtrain, mval, {3, 5}, {0.1, 0.2}, {10, 20}, bcfg, RngStream(8)),
                  3);
}

TEST_CASE("corrupted files and version mismatches are rejected") {
  const auto [train, val] = small_case_a(9);
  const PEHTModel model = fit_peht(train, 0.1, 2, 1.0, RngStream(10));
  const std::string path = "model_corrupt_test.json";
  save_model(model, path);

  std::string body;
  {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  {
    // tamper with a payload digit, keeping the JSON well-formed
    std::string tampered = body;
    const std::size_t pos = tampered.find("\"bin_width\": 0.1");
    REQUIRE(pos != std::string::npos);
    tampered.replace(pos, 16, "\"bin_width\": 0.2");
    std::ofstream out(path);
    out << tampered;
  }
  CHECK_THROWS_AS(load_model(path), SerializationError);
  {
    std::string versioned = body;
    const std::size_t pos = versioned.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    versioned.replace(pos, 19, "\"format_version\": 2");
    std::ofstream out(path);
    out << versioned;
  }
  CHECK_THROWS_AS(load_model(path), SerializationError);
  {
    std::ofstream out(path);
    out << "not json at all";
  }
  CHECK_THROWS_AS(load_model(path), SerializationError);
  CHECK_THROWS_AS(load_model("missing_model_file.json"), SerializationError);
  std::remove(path.c_str());
}
