#include <doctest.h>

#include "aspectkg/text.hpp"

using namespace aspectkg;

namespace {

// Three-document corpus used for all frozen statistics below:
//   d1 = [river, river, delta]
//   d2 = [mountain, peak]
//   d3 = [river, mouth, sea, salt]
// N = 3, avgdl = 3.
std::vector<text::Tokens> corpus() {
  return {{"river", "river", "delta"},
          {"mountain", "peak"},
          {"river", "mouth", "sea", "salt"}};
}

embed::WordEmbeddingTable w2v_table() {
  embed::WordEmbeddingTable t;
  t.dim = 2;
  auto put = [&](const char* w, double x, double y) {
    embed::Vector v(2);
    v << x, y;
    t.vectors[w] = v;
  };
  put("river", 1, 0);
  put("delta", 0, 1);
  put("mountain", 0.6, 0.8);
  return t;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumerics") {
  CHECK(text::tokenize("The Rivers, of California!") ==
        text::Tokens{"the", "rivers", "of", "california"});
  CHECK(text::tokenize("route-66 (US)") == text::Tokens{"route", "66", "us"});
  CHECK(text::tokenize("") == text::Tokens{});
  CHECK(text::tokenize("  \t ") == text::Tokens{});
  SUBCASE("idempotent on its own output") {
    auto once = text::tokenize("A b-C d's");
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    CHECK(text::tokenize(joined) == once);
  }
}

TEST_CASE("build_corpus_stats counts documents and frequencies") {
  auto stats = text::build_corpus_stats(corpus());
  CHECK(stats.n_docs == 3);
  CHECK(stats.avgdl == doctest::Approx(3.0));
  CHECK(stats.doc_freq("river") == 2);
  CHECK(stats.doc_freq("delta") == 1);
  CHECK(stats.doc_freq("nope") == 0);
}

TEST_CASE("bm25 matches frozen values") {
  auto stats = text::build_corpus_stats(corpus());
  auto c = corpus();
  CHECK(text::bm25({"river"}, c[0], stats) ==
        doctest::Approx(0.6462549902128865).epsilon(1e-9));
  CHECK(text::bm25({"river", "delta"}, c[0], stats) ==
        doctest::Approx(1.6270842432246129).epsilon(1e-9));
  CHECK(text::bm25({"river"}, c[2], stats) ==
        doctest::Approx(0.4136031937362474).epsilon(1e-9));
  SUBCASE("no shared terms scores zero") {
    CHECK(text::bm25({"volcano"}, c[0], stats) == 0.0);
  }
  SUBCASE("shorter documents score higher for the same tf") {
    // river appears once in both d3 (len 4) and a hypothetical short doc.
    CHECK(text::bm25({"river"}, {"river"}, stats) >
          text::bm25({"river"}, c[2], stats));
  }
}

TEST_CASE("tfidf cosine matches frozen values") {
  auto stats = text::build_corpus_stats(corpus());
  auto c = corpus();
  CHECK(text::tfidf_cosine({"river", "delta"}, c[0], stats) ==
        doctest::Approx(0.9663152516263988).epsilon(1e-9));
  CHECK(text::tfidf_cosine({"river", "delta"}, c[2], stats) ==
        doctest::Approx(0.2433744620017139).epsilon(1e-9));
  CHECK(text::tfidf_cosine({"volcano"}, c[0], stats) == 0.0);
  CHECK(text::tfidf_cosine({}, c[0], stats) == 0.0);
  SUBCASE("identical bags give cosine 1") {
    CHECK(text::tfidf_cosine(c[1], c[1], stats) == doctest::Approx(1.0));
  }
}

TEST_CASE("overlap counts unique shared tokens plus annotations") {
  CHECK(text::overlap({"a", "b", "b", "c"}, {"b", "c", "d"}) == 2);
  CHECK(text::overlap({"a"}, {"b"}) == 0);
  SUBCASE("entity annotations count only when both sides are annotated") {
    CHECK(text::overlap({"a"}, {"a"}, {"e1", "e2"}, {"e2"}) == 2);
    CHECK(text::overlap({"a"}, {"a"}, {"e1"}, {}) == 1);
    CHECK(text::overlap({"a"}, {"a"}, {}, {"e1"}) == 1);
    CHECK(text::overlap({}, {}, {"e1"}, {"e1"}) == 1);
  }
  SUBCASE("symmetric in its token arguments") {
    CHECK(text::overlap({"x", "y"}, {"y", "z"}) ==
          text::overlap({"y", "z"}, {"x", "y"}));
  }
}

TEST_CASE("w2v similarity matches frozen values") {
  auto stats = text::build_corpus_stats(corpus());
  auto table = w2v_table();
  CHECK(text::w2v_sim({"river", "delta"}, {"mountain", "peak"}, table, stats) ==
        doctest::Approx(0.9999775381183071).epsilon(1e-9));
  CHECK(text::w2v_sim({"river"}, {"mountain", "peak"}, table, stats) ==
        doctest::Approx(0.5999999999999999).epsilon(1e-9));
  SUBCASE("fully out-of-vocabulary side scores zero") {
    CHECK(text::w2v_sim({"peak"}, {"river"}, table, stats) == 0.0);
    CHECK(text::w2v_sim({"river"}, {"peak"}, table, stats) == 0.0);
    CHECK(text::w2v_sim({}, {"river"}, table, stats) == 0.0);
  }
  SUBCASE("token order does not matter") {
    CHECK(text::w2v_sim({"delta", "river"}, {"peak", "mountain"}, table,
                        stats) ==
          doctest::Approx(text::w2v_sim({"river", "delta"},
                                        {"mountain", "peak"}, table, stats)));
  }
}
