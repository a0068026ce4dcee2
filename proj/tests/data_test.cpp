#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "clot/checkpoint.hpp"
#include "clot/config_file.hpp"
#include "clot/dataset_io.hpp"
#include "clot/hash.hpp"
#include "clot/semicircle.hpp"
#include "clot/training.hpp"
#include "test_support.hpp"

using namespace clot;

TEST_SUITE_BEGIN("data");

// ==== observation set ========================================================

TEST_CASE("observation set groups by anchor and condition") {
  Rng rng(81);
  const auto data = test::paired_gaussians(5, {1, 2}, Eigen::Vector2d(1.0, 0.0),
                                           0.1, rng);
  CHECK(data.size() == 20);
  CHECK(data.dim() == 2);
  CHECK(data.anchor_count() == 2);
  CHECK(data.interval_count() == 1);
  CHECK(data.anchor_times() == std::vector<double>{0.0, 1.0});
  CHECK(data.conditions().size() == 2);
  CHECK(data.discrete_conditions());

  CHECK(data.groups().size() == 4);
  for (const auto& g : data.groups()) {
    CHECK(g.ys.cols() == 5);
    CHECK(g.ys.rows() == 2);
  }
  CHECK(data.groups_at(0).size() == 2);
  CHECK(data.find_group(1, Condition::discrete(2)) != nullptr);
  CHECK(data.find_group(1, Condition::discrete(3)) == nullptr);
}

TEST_CASE("matched pairs join anchors on condition and key") {
  Rng rng(82);
  const auto data = test::paired_gaussians(4, {1}, Eigen::Vector2d(0.5, 0.5),
                                           0.1, rng);
  const auto pairs = data.matched_pairs(0);
  REQUIRE(pairs.size() == 4);
  for (const auto& [i, j] : pairs) {
    const auto& a = data.record(i);
    const auto& b = data.record(j);
    CHECK(a.t == 0.0);
    CHECK(b.t == 1.0);
    CHECK(a.x == b.x);
    CHECK(a.pair_key == b.pair_key);
    CHECK((b.y - a.y - Eigen::Vector2d(0.5, 0.5)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("inconsistent records are rejected on entry") {
  ObservationSet bad_dims;
  bad_dims.add(VectorXd::Zero(2), Condition::discrete(1), 0.0);
  CHECK_THROWS_AS(bad_dims.add(VectorXd::Zero(3), Condition::discrete(1), 1.0),
                  validation_error);

  ObservationSet mixed;
  mixed.add(VectorXd::Zero(2), Condition::discrete(1), 0.0);
  CHECK_THROWS_AS(
      mixed.add(VectorXd::Zero(2), Condition::continuous(VectorXd::Zero(1)), 1.0),
      validation_error);

  ObservationSet empty;
  CHECK_THROWS_AS(empty.finalize(), validation_error);

  ObservationSet fine;
  fine.add(VectorXd::Zero(2), Condition::discrete(1), 0.0);
  CHECK_THROWS_AS((void)fine.groups(), contract_error);  // pre-finalize query
}

TEST_CASE("discrete encoder one-hots the sorted id registry") {
  const auto enc = ConditionEncoder::for_discrete({4, 1, 3});
  CHECK(enc.encoded_dim() == 3);
  CHECK(enc.ids() == std::vector<int>{1, 3, 4});
  CHECK(enc.index_of(3) == 1);
  CHECK_THROWS_AS((void)enc.index_of(2), validation_error);

  const VectorXd v = enc.encode(Condition::discrete(4));
  CHECK(v.size() == 3);
  CHECK(v[2] == 1.0);
  CHECK(v.sum() == 1.0);

  const MatrixXd batch = enc.encode_batch(
      {Condition::discrete(1), Condition::discrete(4), Condition::discrete(1)});
  CHECK(batch.cols() == 3);
  CHECK(batch.col(0)[0] == 1.0);
  CHECK(batch.col(1)[2] == 1.0);
}

TEST_CASE("continuous encoder passes vectors through") {
  const auto enc = ConditionEncoder::for_continuous(2);
  VectorXd v(2);
  v << 0.25, -1.0;
  CHECK(enc.encode(Condition::continuous(v)) == v);
  CHECK_THROWS_AS((void)enc.encode(Condition::continuous(VectorXd::Zero(3))),
                  contract_error);
}

TEST_CASE("time map converts raw progression both ways") {
  TimeMap tm;
  tm.identity = false;
  tm.lambda_min = 2.0;
  tm.lambda_max = 6.0;
  CHECK(tm.to_unit(2.0) == 0.0);
  CHECK(tm.to_unit(6.0) == 1.0);
  CHECK(tm.to_unit(3.0) == doctest::Approx(0.25));
  CHECK(tm.to_raw(0.25) == doctest::Approx(3.0));
}

// ==== semicircle process =====================================================

TEST_CASE("semicircle generation is seed-deterministic") {
  SemicircleOptions opts;
  opts.per_group = 10;
  Rng r1(7), r2(7);
  const auto a = generate_semicircle(opts, r1);
  const auto b = generate_semicircle(opts, r2);
  REQUIRE(a.size() == b.size());
  for (Index i = 0; i < a.size(); ++i) {
    CHECK(a.record(i).y == b.record(i).y);  // bitwise
    CHECK(a.record(i).x == b.record(i).x);
    CHECK(a.record(i).t == b.record(i).t);
    CHECK(a.record(i).pair_key == b.record(i).pair_key);
  }

  Rng r3(8);
  const auto c = generate_semicircle(opts, r3);
  int different = 0;
  for (Index i = 0; i < a.size(); ++i) different += a.record(i).y != c.record(i).y;
  CHECK(different > 100);
}

TEST_CASE("semicircle geometry: centers, radii, angular drift") {
  CHECK(semicircle_center(1) == -1.0);
  CHECK(semicircle_center(2) == -1.0);
  CHECK(semicircle_center(3) == 1.0);
  CHECK(semicircle_center(4) == 1.0);

  SemicircleOptions opts;
  opts.per_group = 400;
  Rng rng(9);
  const auto data = generate_semicircle(opts, rng);
  CHECK(data.anchor_count() == 3);
  CHECK(data.size() == 3 * 4 * 400);

  for (int cond : {1, 2, 3, 4}) {
    for (double t : {0.0, 0.5, 1.0}) {
      int anchor = t == 0.0 ? 0 : (t == 0.5 ? 1 : 2);
      const auto* g = data.find_group(anchor, Condition::discrete(cond));
      REQUIRE(g != nullptr);
      const double cx = semicircle_center(cond);

      // Mean radius around the arc's center is the log-normal mean of ~1.
      double rad = 0.0, ang_s = 0.0, ang_c = 0.0;
      for (Index i = 0; i < g->ys.cols(); ++i) {
        const double dx = g->ys(0, i) - cx;
        const double dy = g->ys(1, i);
        rad += std::hypot(dx, dy);
        const double a = std::atan2(dy, dx);
        ang_s += std::sin(a);
        ang_c += std::cos(a);
      }
      rad /= static_cast<double>(g->ys.cols());
      CHECK(rad == doctest::Approx(1.0).epsilon(0.02));

      // Circular mean tracks the published arc position for this condition.
      const double mean_angle = std::atan2(ang_s, ang_c);
      double expect = semicircle_mean_angle(cond, t);
      double diff = std::remainder(mean_angle - expect, 2.0 * 3.14159265358979323846);
      CHECK(std::abs(diff) <= 0.08);
    }
  }

  // Anchors advance the angle: conditions 1 and 2 rotate opposite ways.
  const double d1 = semicircle_mean_angle(1, 1.0) - semicircle_mean_angle(1, 0.0);
  const double d2 = semicircle_mean_angle(2, 1.0) - semicircle_mean_angle(2, 0.0);
  CHECK(d1 * d2 < 0.0);
}

TEST_CASE("pair keys number draws within each cell") {
  SemicircleOptions opts;
  opts.per_group = 6;
  Rng rng(10);
  const auto data = generate_semicircle(opts, rng);
  const auto pairs = data.matched_pairs(0);
  CHECK(pairs.size() == 6 * 4);
  for (const auto& g : data.groups()) {
    std::vector<int> keys = g.pair_keys;
    std::sort(keys.begin(), keys.end());
    for (int i = 0; i < 6; ++i) CHECK(keys[static_cast<std::size_t>(i)] == i);
  }
}

// ==== dataset io =============================================================

TEST_CASE("dataset files round-trip bit for bit") {
  Rng rng(83);
  SemicircleOptions opts;
  opts.per_group = 8;
  const auto data = generate_semicircle(opts, rng);

  const auto path = test::temp_path("dataset.jsonl");
  write_dataset(path, data);
  const auto back = read_dataset(path);

  REQUIRE(back.size() == data.size());
  CHECK(back.dim() == data.dim());
  CHECK(back.anchor_times() == data.anchor_times());
  for (Index i = 0; i < data.size(); ++i) {
    CHECK(back.record(i).y == data.record(i).y);  // full double precision
    CHECK(back.record(i).x == data.record(i).x);
    CHECK(back.record(i).t == data.record(i).t);
    CHECK(back.record(i).pair_key == data.record(i).pair_key);
  }

  // Writing the reloaded set reproduces the file exactly.
  const auto path2 = test::temp_path("dataset2.jsonl");
  write_dataset(path2, back);
  CHECK(test::read_file(path) == test::read_file(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("lambda-valued datasets map onto unit time") {
  const auto path = test::temp_path("lambda.jsonl");
  {
    std::ofstream os(path);
    os << R"({"format":"clot.dataset","version":1,"dim":1,"condition_mode":"discrete","time_field":"lambda","count":4})"
       << "\n";
    os << R"({"y":[0.0],"x":1,"lambda":2.0})" << "\n";
    os << R"({"y":[1.0],"x":1,"lambda":4.0})" << "\n";
    os << R"({"y":[2.0],"x":1,"lambda":6.0})" << "\n";
    os << R"({"y":[3.0],"x":1,"lambda":6.0})" << "\n";
  }
  const auto data = read_dataset(path);
  CHECK(!data.time_map().identity);
  CHECK(data.time_map().lambda_min == 2.0);
  CHECK(data.time_map().lambda_max == 6.0);
  CHECK(data.anchor_times() == std::vector<double>{0.0, 0.5, 1.0});
  std::filesystem::remove(path);
}

TEST_CASE("malformed datasets are rejected with validation errors") {
  const auto path = test::temp_path("bad.jsonl");
  auto write_and_try = [&](const std::string& text) {
    std::ofstream(path) << text;
    CHECK_THROWS_AS((void)read_dataset(path), validation_error);
  };
  write_and_try("");  // no header
  write_and_try(R"({"format":"other","version":1})" "\n");
  write_and_try(
      R"({"format":"clot.dataset","version":1,"dim":2,"condition_mode":"discrete","time_field":"t","count":1})"
      "\n"
      R"({"y":[0.0],"x":1,"t":0.0})" "\n");  // dim mismatch
  CHECK_THROWS_AS((void)read_dataset(test::temp_path("missing.jsonl")),
                  validation_error);
  std::filesystem::remove(path);
}

TEST_CASE("sample dumps round-trip") {
  std::vector<SampleRecord> recs;
  Rng rng(84);
  for (int i = 0; i < 5; ++i) {
    SampleRecord r;
    r.y = VectorXd::NullaryExpr(2, [&] { return rng.normal(); });
    r.x = Condition::discrete(1 + i % 3);
    r.t = 0.25;
    r.lambda = 0.25;
    r.seed = 42;
    r.draw = i;
    recs.push_back(r);
  }
  const auto path = test::temp_path("samples.jsonl");
  write_samples(path, recs, true);
  const auto back = read_samples(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].y == recs[i].y);
    CHECK(back[i].x == recs[i].x);
    CHECK(back[i].t == recs[i].t);
    CHECK(back[i].seed == recs[i].seed);
    CHECK(back[i].draw == recs[i].draw);
  }
  std::filesystem::remove(path);
}

// ==== config ================================================================

TEST_CASE("config documents parse comments, blanks, and typed values") {
  const auto doc_text =
      "# training setup\n"
      "alpha = 0.05\n"
      "\n"
      "outer_iters = 12\n"
      "use_potential = true\n"
      "hidden_g = 8,8,4\n"
      "times = 0.0, 0.5, 1.0\n"
      "name = semicircle run\n";
  ConfigDoc doc = ConfigDoc::parse_string(doc_text);
  CHECK(doc.get_double("alpha", 0.0) == 0.05);
  CHECK(doc.get_int("outer_iters", 0) == 12);
  CHECK(doc.get_bool("use_potential", false));
  CHECK(doc.get_int_list("hidden_g", {}) == std::vector<int>{8, 8, 4});
  CHECK(doc.get_double_list("times", {}) == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(doc.get_string("name", "") == "semicircle run");
  CHECK(doc.get_double("absent", 1.5) == 1.5);
  CHECK_NOTHROW(doc.reject_unknown());
}

TEST_CASE("unconsumed and malformed keys are flagged") {
  ConfigDoc doc = ConfigDoc::parse_string("alpha = 0.05\nmystery = 3\n");
  (void)doc.get_double("alpha", 0.0);
  CHECK_THROWS_WITH_AS(doc.reject_unknown(),
                       doctest::Contains("mystery"), validation_error);

  ConfigDoc bad = ConfigDoc::parse_string("alpha = not-a-number\n");
  CHECK_THROWS_AS((void)bad.get_double("alpha", 0.0), validation_error);
  CHECK_THROWS_AS((void)ConfigDoc::parse_string("just some words\n"),
                  validation_error);

  ConfigDoc missing = ConfigDoc::parse_string("");
  CHECK_THROWS_AS((void)missing.require_string("data"), validation_error);
}

TEST_CASE("programmatic overrides replace file values") {
  ConfigDoc doc = ConfigDoc::parse_string("outer_iters = 10\n");
  doc.set("outer_iters", "3");
  doc.set("extra", "1.5");
  CHECK(doc.get_int("outer_iters", 0) == 3);
  CHECK(doc.get_double("extra", 0.0) == 1.5);
}

TEST_CASE("training config document round-trips through json") {
  ConfigDoc doc = ConfigDoc::parse_string(
      "outer_iters = 3\ninner_iters = 2\nlearn_metric = false\nalpha = 0.02\n"
      "hidden_spline = 32,32\nseed = 11\n");
  const TrainingConfig cfg = training_config_from_doc(doc);
  CHECK(cfg.outer_iters == 3);
  CHECK(cfg.inner_iters == 2);
  CHECK(!cfg.learn_metric);
  CHECK(cfg.alpha == 0.02);
  CHECK(cfg.hidden_spline == std::vector<int>{32, 32});
  CHECK(cfg.seed == 11);

  const TrainingConfig back = training_config_from_json(training_config_to_json(cfg));
  CHECK(back.outer_iters == cfg.outer_iters);
  CHECK(back.inner_iters == cfg.inner_iters);
  CHECK(back.learn_metric == cfg.learn_metric);
  CHECK(back.alpha == cfg.alpha);
  CHECK(back.hidden_spline == cfg.hidden_spline);
  CHECK(back.seed == cfg.seed);
}

TEST_CASE("config validation rejects out-of-range settings") {
  auto make = [](const std::string& text) {
    ConfigDoc doc = ConfigDoc::parse_string(text);
    return training_config_from_doc(doc);
  };
  CHECK_THROWS_AS((void)make("outer_iters = -1\n"), validation_error);
  CHECK_THROWS_AS((void)make("inner_iters = -1\n"), validation_error);
  CHECK_THROWS_AS((void)make("h_y = 0\n"), validation_error);
  CHECK_THROWS_AS((void)make("refine_iters = -2\n"), validation_error);
  CHECK_THROWS_AS((void)make("activation = sigmoidish\n"), validation_error);
  CHECK_NOTHROW((void)make("inner_iters = 0\n"));  // explicitly legal
  CHECK_NOTHROW((void)make("outer_iters = 0\n"));
}

// ==== variants ===============================================================

TEST_CASE("variant names map onto metric and potential switches") {
  CHECK(variant_from_name("K_I") == Variant::kIdentity);
  CHECK(variant_from_name("K_theta") == Variant::kMetric);
  CHECK(variant_from_name("K_I-U") == Variant::kIdentityPotential);
  CHECK(variant_from_name("K_theta-U") == Variant::kMetricPotential);
  CHECK_THROWS_AS((void)variant_from_name("K_other"), validation_error);

  for (auto v : {Variant::kIdentity, Variant::kMetric, Variant::kIdentityPotential,
                 Variant::kMetricPotential}) {
    CHECK(variant_from_name(variant_name(v)) == v);
    TrainingConfig cfg;
    apply_variant(cfg, v);
    const bool metric = v == Variant::kMetric || v == Variant::kMetricPotential;
    const bool pot =
        v == Variant::kIdentityPotential || v == Variant::kMetricPotential;
    CHECK(cfg.learn_metric == metric);
    CHECK(cfg.use_potential == pot);
  }
}

// ==== checkpoint =============================================================

TEST_CASE("checkpoints restore parameters bit for bit") {
  Rng rng(85);
  SemicircleOptions gen;
  gen.per_group = 6;
  auto data = std::make_shared<ObservationSet>(generate_semicircle(gen, rng));

  TrainingConfig cfg;
  cfg.outer_iters = 1;
  cfg.inner_iters = 1;
  cfg.refine_iters = 2;
  cfg.hidden_g = {8};
  cfg.hidden_map = {8};
  cfg.hidden_spline = {8};
  cfg.hidden_metric = {8};
  cfg.knots = 5;
  cfg.quad_points = 4;
  cfg.seed = 3;

  Trainer trainer(data, cfg);
  trainer.run(nullptr, nullptr);
  auto model = trainer.finish();

  const auto path = test::temp_path("model.bin");
  save_model(*model, cfg, path);

  TrainingConfig cfg_back;
  auto loaded = load_model(path, &cfg_back);
  CHECK(cfg_back.seed == cfg.seed);
  CHECK(cfg_back.hidden_g == cfg.hidden_g);

  const auto& a = model->bundle();
  const auto& b = loaded->bundle();
  CHECK(a.g(0).params().values() == b.g(0).params().values());
  CHECK(a.g(1).params().values() == b.g(1).params().values());
  CHECK(a.map(0).params().values() == b.map(0).params().values());
  CHECK(a.spline_gen().params().values() == b.spline_gen().params().values());
  REQUIRE(b.metric() != nullptr);
  CHECK(a.metric()->net().params().values() == b.metric()->net().params().values());

  // Anchor payload survives too: the reloaded model samples identically.
  Rng s1(77), s2(77);
  const MatrixXd m1 = model->sample_many(0.4, Condition::discrete(1), 6, s1);
  const MatrixXd m2 = loaded->sample_many(0.4, Condition::discrete(1), 6, s2);
  CHECK(m1 == m2);

  // Corrupting the magic is caught.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS((void)load_model(path), validation_error);
  std::filesystem::remove(path);
}

// ==== hashing ===============================================================

TEST_CASE("sha256 matches published test vectors") {
  CHECK(Sha256::of_string("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(Sha256::of_string("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Sha256::of_string(
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");

  // Incremental updates agree with one-shot hashing.
  Sha256 inc;
  inc.update("ab");
  inc.update("c");
  CHECK(inc.hex_digest() == Sha256::of_string("abc"));

  const auto path = test::temp_path("hashme.bin");
  std::ofstream(path, std::ios::binary) << "abc";
  CHECK(Sha256::of_file(path) == Sha256::of_string("abc"));
  std::filesystem::remove(path);
}

TEST_SUITE_END();
