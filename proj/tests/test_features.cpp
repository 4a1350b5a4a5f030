#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "aspectkg/errors.hpp"
#include "aspectkg/features.hpp"

using namespace aspectkg;
namespace fs = std::filesystem;

namespace {

embed::Vector unit2(double x, double y) {
  embed::Vector v(2);
  v << x, y;
  return v / v.norm();
}

// KG with one entity whose "Geography" aspect links to three images and
// whose "History" aspect links to one.
kg::AspectKG image_kg() {
  kg::AspectKG g;
  g.entities = {{"e1", "California", "state", {}, 0}};
  g.aspects = {{"e1", {"Geography"}}, {"e1", {"History"}}};
  for (const char* id : {"geo1", "geo2", "geo3", "his1"})
    g.images.push_back({id, std::string("loc/") + id,
                        kg::ImageSource::kWikipedia, std::nullopt, std::nullopt});
  g.links = {
      {"e1", {"Geography"}, "geo1", std::nullopt},
      {"e1", {"Geography"}, "geo2", std::nullopt},
      {"e1", {"Geography"}, "geo3", std::nullopt},
      {"e1", {"History"}, "his1", std::nullopt},
  };
  kg::sort_kg(g);
  return g;
}

embed::InMemoryEncoder image_encoder() {
  embed::InMemoryEncoder enc(2, 2);
  enc.put_text("Geography", unit2(1, 0));
  enc.put_text("History", unit2(0, 1));
  // Context aligned with the Geography images, orthogonal to History's.
  enc.put_text("rivers and mountains", unit2(1, 0));
  enc.put_image("geo1", unit2(1, 0));
  enc.put_image("geo2", unit2(0.9, 0.1));
  enc.put_image("geo3", unit2(0.8, 0.2));
  enc.put_image("his1", unit2(0, 1));
  return enc;
}

}  // namespace

TEST_CASE("feature names and configs") {
  CHECK(features::feature_names().size() == 8);
  CHECK(features::feature_names()[features::kImage] == "image");
  auto all = features::FeatureConfig::all_text();
  CHECK(all.indices.size() == 7);
  CHECK_FALSE(all.uses_image());
  auto with_img = features::FeatureConfig::all_text_with_image();
  CHECK(with_img.indices.size() == 8);
  CHECK(with_img.uses_image());
  auto subset = features::FeatureConfig::text_subset_with_image({4, 0});
  CHECK(subset.indices == std::vector<int>{0, 4, 7});
  CHECK(subset.names() ==
        std::vector<std::string>{"name-bm25", "content-tfidf", "image"});
}

TEST_CASE("sample_text_subset is seeded and in range") {
  auto a = features::FeatureConfig::sample_text_subset(3, 11);
  auto b = features::FeatureConfig::sample_text_subset(3, 11);
  CHECK(a == b);
  CHECK(a.size() == 3);
  CHECK(std::is_sorted(a.begin(), a.end()));
  for (int i : a) CHECK((i >= 0 && i < features::kNumTextFeatures));
  auto c = features::FeatureConfig::sample_text_subset(3, 12);
  // Different seeds usually differ; only require validity, not inequality.
  CHECK(c.size() == 3);
  CHECK(features::FeatureConfig::sample_text_subset(7, 1).size() == 7);
  CHECK_THROWS_AS(features::FeatureConfig::sample_text_subset(8, 1),
                  UsageError);
}

TEST_CASE("image_feature averages context similarity over top-5 images") {
  auto g = image_kg();
  auto enc = image_encoder();
  auto ctx = features::make_context("rivers and mountains", "e1");
  kg::AspectNode geo{"e1", {"Geography"}};
  kg::AspectNode his{"e1", {"History"}};
  double geo_score = features::image_feature(ctx, geo, g, enc);
  double his_score = features::image_feature(ctx, his, g, enc);
  // ctx is aligned with the geography images, orthogonal to his1.
  double expected = (1.0 + embed::cosine(unit2(1, 0), unit2(0.9, 0.1)) +
                     embed::cosine(unit2(1, 0), unit2(0.8, 0.2))) /
                    3.0;
  CHECK(geo_score == doctest::Approx(expected).epsilon(1e-12));
  CHECK(his_score == doctest::Approx(0.0));
  CHECK(geo_score > his_score);

  SUBCASE("aspect with no linked images scores zero") {
    kg::AspectNode empty{"e1", {"Climate"}};
    CHECK(features::image_feature(ctx, empty, g, enc) == 0.0);
  }

  SUBCASE("only the top-5 by label similarity are averaged") {
    // Add 3 images far from the Geography label; with 6 candidates the
    // bottom one must drop out of the average.
    auto g2 = g;
    auto enc2 = image_encoder();
    for (int i = 0; i < 3; ++i) {
      std::string id = "far" + std::to_string(i);
      g2.images.push_back({id, "loc/" + id, kg::ImageSource::kWikipedia,
                           std::nullopt, std::nullopt});
      g2.links.push_back({"e1", {"Geography"}, id, std::nullopt});
      enc2.put_image(id, unit2(-1, 0));
    }
    kg::sort_kg(g2);
    double score = features::image_feature(ctx, geo, g2, enc2);
    // Top 5 by label sim: geo1, geo2, geo3, and two of the far images.
    double exp = (1.0 + embed::cosine(unit2(1, 0), unit2(0.9, 0.1)) +
                  embed::cosine(unit2(1, 0), unit2(0.8, 0.2)) - 1.0 - 1.0) /
                 5.0;
    CHECK(score == doctest::Approx(exp).epsilon(1e-12));
  }
}

TEST_CASE("assemble_feature_rows produces one row per candidate") {
  std::vector<features::AspectDoc> candidates = {
      {"a1", "Geography", "rivers mountains deserts", {}},
      {"a2", "History", "gold rush statehood", {}},
      {"a3", "Economy", "agriculture technology trade", {}},
  };
  auto ctx = features::make_context("The rivers of the state", "e1");
  embed::WordEmbeddingTable w2v;  // empty: w2v features evaluate to 0
  auto list = features::assemble_feature_rows(
      ctx, "q1", candidates, "a1", features::FeatureConfig::all_text(), nullptr,
      nullptr, &w2v);
  CHECK(list.query_id == "q1");
  REQUIRE(list.rows.size() == 3);
  int positives = 0;
  for (const auto& row : list.rows) {
    CHECK(row.features.size() == 7);
    positives += row.label;
  }
  CHECK(positives == 1);
  CHECK(list.rows[0].label == 1);
  CHECK(list.rows[0].aspect_id == "a1");
  // "rivers" appears in a1's content only.
  CHECK(list.rows[0].features[features::kContentBm25] >
        list.rows[1].features[features::kContentBm25]);

  SUBCASE("missing gold is a data error") {
    CHECK_THROWS_AS(
        features::assemble_feature_rows(ctx, "q1", candidates, "zz",
                                        features::FeatureConfig::all_text(),
                                        nullptr, nullptr, &w2v),
        DataError);
  }
  SUBCASE("single feature subset") {
    features::FeatureConfig cfg{{features::kContentOverlap}};
    auto one = features::assemble_feature_rows(ctx, "q1", candidates, "a1", cfg,
                                               nullptr, nullptr, nullptr);
    for (const auto& row : one.rows) CHECK(row.features.size() == 1);
  }
  SUBCASE("image feature via KG pipeline") {
    auto g = image_kg();
    auto enc = image_encoder();
    enc.put_text("The rivers of the state", unit2(1, 0));
    std::vector<features::AspectDoc> cands = {
        {"a1", "Geography", "", {}},
        {"a2", "History", "", {}},
    };
    features::FeatureConfig cfg{{features::kImage}};
    auto rows = features::assemble_feature_rows(ctx, "q1", cands, "a1", cfg, &g,
                                                &enc, nullptr);
    REQUIRE(rows.rows.size() == 2);
    CHECK(rows.rows[0].features[0] > rows.rows[1].features[0]);
  }
  SUBCASE("custom image scorer overrides the KG path") {
    features::ImageScorer scorer =
        [](const features::ContextSentence&, const features::AspectDoc& cand) {
          return cand.aspect_id == "a2" ? 0.9 : 0.1;
        };
    features::FeatureConfig cfg{{features::kImage}};
    auto rows = features::assemble_feature_rows(ctx, "q1", candidates, "a1",
                                                cfg, nullptr, nullptr, nullptr,
                                                &scorer);
    CHECK(rows.rows[1].features[0] == doctest::Approx(0.9));
    CHECK(rows.rows[0].features[0] == doctest::Approx(0.1));
  }
}

TEST_CASE("run file round-trip preserves rows and grouping") {
  std::vector<features::QueryList> lists = {
      {"q1",
       {{"q1", "a1", {0.5, -1.25, 3e-17}, 1},
        {"q1", "a2", {0.0, 2.0, 1.0 / 3.0}, 0}}},
      {"q2", {{"q2", "a1", {1e300, -0.0, 42.0}, 0},
              {"q2", "a9", {0.1, 0.2, 0.3}, 1}}},
  };
  auto file = fs::temp_directory_path() / "aspectkg_test_run.txt";
  features::write_run_file(lists, file);
  auto loaded = features::read_run_file(file);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded == lists);

  SUBCASE("inconsistent feature counts are rejected") {
    std::ofstream out(file, std::ios::app);
    out << "q3 a1 0 1.0\n";
    out.close();
    CHECK_THROWS_AS(features::read_run_file(file), DataError);
  }
}
