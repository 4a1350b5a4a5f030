#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "aspectkg/air.hpp"
#include "aspectkg/errors.hpp"

using namespace aspectkg;
namespace fs = std::filesystem;

namespace {

embed::Vector vec2(double x, double y) {
  embed::Vector v(2);
  v << x, y;
  return v;
}

// Entity e1 with aspects A and B; image embeddings chosen so that the
// overall image and the per-label top-3 ranking are known in closed form.
struct PlantedWorld {
  kg::AspectKG g;
  embed::InMemoryEncoder enc{2, 2};

  PlantedWorld() {
    g.entities = {{"e1", "E1", "t", {}, 0}, {"e2", "E2", "t", {}, 0}};
    g.aspects = {{"e1", {"A"}}, {"e1", {"B"}}, {"e2", {"A"}}};
    for (const char* id : {"a", "b", "c", "d"})
      g.images.push_back({id, std::string("loc/") + id,
                          kg::ImageSource::kWikipedia, std::nullopt,
                          std::nullopt});
    g.links = {
        {"e1", {"A"}, "a", std::nullopt},
        {"e1", {"A"}, "b", std::nullopt},
        {"e1", {"A"}, "c", std::nullopt},
        {"e1", {"A"}, "d", std::nullopt},
        {"e1", {"B"}, "a", std::nullopt},
    };
    kg::sort_kg(g);
    enc.put_text("E1", vec2(1, 0));
    enc.put_text("E2", vec2(1, 0));
    enc.put_text("A", vec2(0, 1));
    enc.put_text("B", vec2(1, 0));
    enc.put_image("a", vec2(1, 0));
    enc.put_image("b", vec2(0, 1));
    enc.put_image("c", vec2(std::sqrt(0.5), std::sqrt(0.5)));
    enc.put_image("d", vec2(-1, 0));
  }
};

}  // namespace

TEST_CASE("make_model shapes, determinism and validation") {
  auto m = air::make_model(3, 2, 0.07, 42);
  CHECK(m.image_dim() == 3);
  CHECK(m.text_dim() == 2);
  CHECK(m.W.rows() == 3);
  CHECK(m.W.cols() == 5);
  CHECK(m.tau == doctest::Approx(0.07));
  auto again = air::make_model(3, 2, 0.07, 42);
  CHECK(m.W.isApprox(again.W));
  CHECK_FALSE(air::make_model(3, 2, 0.07, 43).W.isApprox(m.W));
  CHECK_THROWS_AS(air::make_model(0, 2, 0.07, 1), UsageError);
  CHECK_THROWS_AS(air::make_model(3, 2, 0.0, 1), UsageError);
}

TEST_CASE("forward multiplies the stacked input") {
  SUBCASE("identity model returns the overall image vector") {
    auto m = air::identity_model(2, 2, 0.07);
    auto out = air::forward(m, vec2(0.3, -0.7), vec2(5, 9));
    CHECK(out.isApprox(vec2(0.3, -0.7)));
  }
  SUBCASE("random matrix oracle") {
    auto m = air::make_model(2, 2, 0.07, 9);
    embed::Vector x(4);
    x << 1, 2, 3, 4;
    auto out = air::forward(m, vec2(1, 2), vec2(3, 4));
    CHECK(out.isApprox(m.W * x, 1e-14));
  }
  SUBCASE("dimension mismatch is a usage error") {
    auto m = air::identity_model(2, 2, 0.07);
    embed::Vector bad(3);
    bad << 1, 2, 3;
    CHECK_THROWS_AS(air::forward(m, bad, vec2(0, 0)), UsageError);
  }
}

TEST_CASE("info_nce matches frozen values") {
  SUBCASE("2x2 similarity fixture") {
    Eigen::MatrixXd s(2, 2);
    s << 0.9, 0.1, 0.2, 0.8;
    CHECK(air::info_nce_from_sims(s, 1.0) ==
          doctest::Approx(0.40429430821683177).epsilon(1e-12));
  }
  SUBCASE("uniform similarities give ln N") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(4, 4, 0.5);
    CHECK(air::info_nce_from_sims(s, 0.07) ==
          doctest::Approx(1.3862943611198906).epsilon(1e-12));
    // Same through the vector interface with identical pairs.
    std::vector<embed::Vector> h = {vec2(1, 0), vec2(1, 0)};
    CHECK(air::info_nce_loss(h, h, 1.0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("lower loss when positives align") {
    Eigen::MatrixXd good(2, 2), bad(2, 2);
    good << 1.0, -1.0, -1.0, 1.0;
    bad << -1.0, 1.0, 1.0, -1.0;
    CHECK(air::info_nce_from_sims(good, 0.1) <
          air::info_nce_from_sims(bad, 0.1));
  }
  SUBCASE("validation") {
    Eigen::MatrixXd s(2, 2);
    s << 1, 0, 0, 1;
    CHECK_THROWS_AS(air::info_nce_from_sims(s, 0.0), UsageError);
    CHECK_THROWS_AS(air::info_nce_from_sims(Eigen::MatrixXd::Zero(1, 1), 1.0),
                    UsageError);
    s(0, 1) = std::nan("");
    CHECK_THROWS_AS(air::info_nce_from_sims(s, 1.0), NumericError);
  }
}

TEST_CASE("batch_gradient agrees with central finite differences") {
  const int image_dim = 3, text_dim = 2, n = 4;
  auto model = air::make_model(image_dim, text_dim, 0.5, 17);
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 1.0);
  air::Batch batch;
  batch.inputs = Eigen::MatrixXd(image_dim + text_dim, n);
  batch.positives = Eigen::MatrixXd(image_dim, n);
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < image_dim + text_dim; ++r)
      batch.inputs(r, c) = normal(rng);
    for (int r = 0; r < image_dim; ++r) batch.positives(r, c) = normal(rng);
  }
  auto grad = air::batch_gradient(model, batch);
  const double eps = 1e-6;
  for (int r = 0; r < model.W.rows(); ++r)
    for (int c = 0; c < model.W.cols(); ++c) {
      auto plus = model, minus = model;
      plus.W(r, c) += eps;
      minus.W(r, c) -= eps;
      double fd =
          (air::batch_loss(plus, batch) - air::batch_loss(minus, batch)) /
          (2 * eps);
      CHECK(grad(r, c) == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("split sizes follow the 8:1:1 rule") {
  CHECK(air::split_sizes(46779) == std::pair<std::size_t, std::size_t>{4663, 4663});
  CHECK(air::split_sizes(10) == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(air::split_sizes(0) == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("split_triples partitions deterministically") {
  std::vector<air::AirTriple> triples;
  for (int i = 0; i < 100; ++i)
    triples.push_back({"e" + std::to_string(i), "o", "A", "p"});
  auto split = air::split_triples(triples, 5);
  CHECK(split.validation.size() == 10);
  CHECK(split.test.size() == 10);
  CHECK(split.train.size() == 80);
  auto again = air::split_triples(triples, 5);
  CHECK(split.train == again.train);
  CHECK(split.validation == again.validation);
  CHECK(split.test == again.test);
  auto other = air::split_triples(triples, 6);
  CHECK(split.train != other.train);
  // The three parts form a permutation of the input.
  std::vector<std::string> all;
  for (const auto& part : {split.train, split.validation, split.test})
    for (const auto& t : part) all.push_back(t.entity_id);
  std::sort(all.begin(), all.end());
  std::vector<std::string> expected;
  for (const auto& t : triples) expected.push_back(t.entity_id);
  std::sort(expected.begin(), expected.end());
  CHECK(all == expected);
}

TEST_CASE("build_triples selects overall image and top-3 positives") {
  PlantedWorld w;
  auto result = air::build_triples(w.g, w.enc);
  CHECK(result.skipped_entities == std::vector<std::string>{"e2"});
  REQUIRE(result.triples.size() == 4);
  // Label A: images {a,b,c,d}, label vec (0,1): b=1, c=.707, a=d=0, tie by id.
  CHECK(result.triples[0] == air::AirTriple{"e1", "a", "A", "b"});
  CHECK(result.triples[1] == air::AirTriple{"e1", "a", "A", "c"});
  CHECK(result.triples[2] == air::AirTriple{"e1", "a", "A", "a"});
  CHECK(result.triples[3] == air::AirTriple{"e1", "a", "B", "a"});

  SUBCASE("overall image ties break to the lowest image id") {
    auto g2 = w.g;
    g2.images.push_back({"Aa", "loc/Aa", kg::ImageSource::kWikipedia,
                         std::nullopt, std::nullopt});
    g2.links.push_back({"e1", {"B"}, "Aa", std::nullopt});
    kg::sort_kg(g2);
    w.enc.put_image("Aa", vec2(1, 0));  // ties image a at cosine 1
    auto id = air::overall_image(g2, "e1", w.enc);
    REQUIRE(id.has_value());
    CHECK(*id == "Aa");
  }
  SUBCASE("unknown entity is a data error") {
    CHECK_THROWS_AS(air::overall_image(w.g, "zzz", w.enc), DataError);
  }
}

TEST_CASE("training reduces the contrastive loss on a planted task") {
  // Inputs and positives related by a fixed linear map; SGD must fit it
  // better than the random initialization.
  const int dim = 4;
  embed::InMemoryEncoder enc(dim, dim);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<air::AirTriple> triples;
  for (int i = 0; i < 40; ++i) {
    embed::Vector o(dim), a(dim);
    for (int d = 0; d < dim; ++d) {
      o[d] = normal(rng);
      a[d] = normal(rng);
    }
    std::string oi = "o" + std::to_string(i);
    std::string lab = "l" + std::to_string(i);
    std::string pi = "p" + std::to_string(i);
    enc.put_image(oi, o);
    enc.put_text(lab, a);
    enc.put_image(pi, (o + a).eval());  // target = sum of the two halves
    triples.push_back({"e", oi, lab, pi});
  }
  auto model = air::make_model(dim, dim, 0.2, 11);
  air::AirTrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.5;
  cfg.epochs = 30;
  cfg.seed = 1;
  cfg.tau = 0.2;
  auto curve = air::train(model, triples, enc, cfg);
  REQUIRE(curve.epoch_loss.size() == 30);
  CHECK(curve.epoch_loss.back() < 0.5 * curve.epoch_loss.front());

  SUBCASE("zero learning rate leaves the model unchanged") {
    auto frozen = air::make_model(dim, dim, 0.2, 11);
    auto before = frozen.W;
    cfg.learning_rate = 0.0;
    cfg.epochs = 2;
    air::train(frozen, triples, enc, cfg);
    CHECK(frozen.W.isApprox(before));
  }
  SUBCASE("config validation") {
    cfg.batch_size = 1;
    CHECK_THROWS_AS(air::train(model, triples, enc, cfg), UsageError);
    cfg.batch_size = 8;
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(air::train(model, triples, enc, cfg), UsageError);
  }
}

TEST_CASE("retrieve orders candidates by projected similarity") {
  PlantedWorld w;
  auto identity = air::identity_model(2, 2, 0.07);
  // Query reduces to image a = (1,0): scores a=1, c=.707, b=0, d=-1.
  auto scored = air::retrieve(identity, w.enc, "a", "A", {"a", "b", "c", "d"});
  REQUIRE(scored.size() == 4);
  CHECK(scored[0].id == "a");
  CHECK(scored[1].id == "c");
  CHECK(scored[2].id == "b");
  CHECK(scored[3].id == "d");
  CHECK(scored[0].score == doctest::Approx(1.0));

  SUBCASE("baseline scores by raw aspect-text similarity") {
    auto base = air::retrieve_clip_baseline(w.enc, "A", {"a", "b", "c", "d"});
    CHECK(base[0].id == "b");  // A = (0,1) aligns with image b
    CHECK(base[0].score == doctest::Approx(1.0));
  }
}

TEST_CASE("correct_kg drops low-scoring links") {
  PlantedWorld w;
  auto identity = air::identity_model(2, 2, 0.07);
  SUBCASE("threshold") {
    air::CorrectionPolicy policy;
    policy.threshold = 0.5;
    auto result = air::correct_kg(w.g, identity, w.enc, policy);
    // Scores vs overall a=(1,0): a=1, c=.707 kept; b=0, d=-1 dropped.
    std::set<std::string> kept;
    for (const auto& l : result.kg.links)
      if (l.aspect_path == kg::AspectPath{"A"}) kept.insert(l.image_id);
    CHECK(kept == std::set<std::string>{"a", "c"});
    CHECK(result.removed.size() == 2);
    for (const auto& r : result.removed) CHECK(r.score < 0.5);
    CHECK_NOTHROW(kg::validate_kg(result.kg));
  }
  SUBCASE("keep_top_m") {
    air::CorrectionPolicy policy;
    policy.keep_top_m = 1;
    auto result = air::correct_kg(w.g, identity, w.enc, policy);
    std::set<std::string> kept;
    for (const auto& l : result.kg.links)
      if (l.aspect_path == kg::AspectPath{"A"}) kept.insert(l.image_id);
    CHECK(kept == std::set<std::string>{"a"});
  }
  SUBCASE("no policy keeps everything") {
    auto result = air::correct_kg(w.g, identity, w.enc, {});
    CHECK(result.kg == w.g);
    CHECK(result.removed.empty());
  }
}

TEST_CASE("expand_assign picks the best-scoring first-level label") {
  PlantedWorld w;
  // Text-only projection: query = aspect text embedding.
  air::ProjectionModel text_model;
  text_model.tau = 0.07;
  text_model.W = Eigen::MatrixXd::Zero(2, 4);
  text_model.W.rightCols(2) = Eigen::MatrixXd::Identity(2, 2);
  auto assign = air::expand_assign("b", "e1", w.g, text_model, w.enc);
  CHECK(assign.aspect_label == "A");  // b = (0,1) matches A's text
  CHECK(assign.score == doctest::Approx(1.0));

  SUBCASE("ties keep the lexicographically first label") {
    auto identity = air::identity_model(2, 2, 0.07);
    // Identity projection scores every label identically.
    auto tied = air::expand_assign("c", "e1", w.g, identity, w.enc);
    CHECK(tied.aspect_label == "A");
  }
  SUBCASE("entity without aspects or images fails") {
    CHECK_THROWS_AS(air::expand_assign("a", "zz", w.g, text_model, w.enc),
                    DataError);
    // e2 has an aspect but no linked images.
    CHECK_THROWS_AS(air::expand_assign("a", "e2", w.g, text_model, w.enc),
                    DataError);
  }
}

TEST_CASE("eal_image_feature_air with the identity model matches the plain "
          "image feature on small candidate sets") {
  PlantedWorld w;
  w.enc.put_text("ctx sentence", vec2(0, 1));
  auto ctx = features::make_context("ctx sentence", "e1");
  kg::AspectNode aspect{"e1", {"A"}};
  auto identity = air::identity_model(2, 2, 0.07);
  double air_score =
      air::eal_image_feature_air(ctx, aspect, w.g, identity, w.enc);
  // With <= 5 candidates both variants average over all linked images.
  double plain = features::image_feature(ctx, aspect, w.g, w.enc);
  CHECK(air_score == doctest::Approx(plain).epsilon(1e-12));
  kg::AspectNode missing{"e1", {"Z"}};
  CHECK(air::eal_image_feature_air(ctx, missing, w.g, identity, w.enc) == 0.0);
}

TEST_CASE("air model and triples round-trip through files") {
  auto model = air::make_model(3, 2, 0.09, 77);
  auto file = fs::temp_directory_path() / "aspectkg_test_air_model.json";
  air::save_air_model(model, "cfg123", file);
  auto loaded = air::load_air_model(file);
  CHECK(loaded.W.isApprox(model.W));
  CHECK(loaded.tau == doctest::Approx(model.tau));
  CHECK(loaded.image_dim() == 3);
  CHECK(loaded.text_dim() == 2);

  std::vector<air::AirTriple> triples = {
      {"e1", "o1", "Geography", "p1"},
      {"e2", "o2", "History", "p2"},
  };
  auto tfile = fs::temp_directory_path() / "aspectkg_test_triples.jsonl";
  air::save_triples(triples, tfile);
  CHECK(air::load_triples(tfile) == triples);
}
