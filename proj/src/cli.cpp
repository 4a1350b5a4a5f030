#include "aspectkg/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "aspectkg/air.hpp"
#include "aspectkg/errors.hpp"
#include "aspectkg/features.hpp"
#include "aspectkg/ingest.hpp"
#include "aspectkg/kg.hpp"
#include "aspectkg/ltr.hpp"
#include "aspectkg/manifest.hpp"
#include "aspectkg/metrics.hpp"

namespace aspectkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config file " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const std::exception& e) {
    throw DataError("malformed config file " + path + ": " + e.what());
  }
}

std::vector<int> parse_index_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

ltr::TrainConfig ltr_config_from_json(const json& j, std::uint64_t seed) {
  ltr::TrainConfig cfg;
  cfg.seed = seed;
  if (!j.contains("ltr")) return cfg;
  const json& c = j.at("ltr");
  if (c.contains("minibatch_size")) cfg.minibatch_size = c.at("minibatch_size");
  if (c.contains("rel_tol")) cfg.rel_tol = c.at("rel_tol");
  if (c.contains("restarts")) cfg.restarts = c.at("restarts");
  if (c.contains("max_epochs")) cfg.max_epochs = c.at("max_epochs");
  if (c.contains("step_grid"))
    cfg.step_grid = c.at("step_grid").get<std::vector<double>>();
  return cfg;
}

air::AirTrainConfig air_config_from_json(const json& j, std::uint64_t seed) {
  air::AirTrainConfig cfg;
  cfg.seed = seed;
  if (!j.contains("air")) return cfg;
  const json& c = j.at("air");
  if (c.contains("batch_size")) cfg.batch_size = c.at("batch_size");
  if (c.contains("learning_rate")) cfg.learning_rate = c.at("learning_rate");
  if (c.contains("epochs")) cfg.epochs = c.at("epochs");
  if (c.contains("tau")) cfg.tau = c.at("tau");
  return cfg;
}

fs::path manifest_path(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return out.string() + ".manifest.json";
}

struct RunContext {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;
  json metrics = json::object();

  void add_input(const std::string& path) {
    if (!path.empty()) input_digests[path] = manifest::digest_file(path);
  }

  void write(const fs::path& out) const {
    manifest::RunManifest m;
    m.command = command;
    m.config_digest = manifest::digest_string(config.dump());
    m.seeds = seeds;
    m.input_digests = input_digests;
    m.metrics = metrics;
    manifest::write_manifest(m, manifest_path(out));
  }
};

std::vector<kg::EntityRecord> load_entity_candidates(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read entities file " + file.string());
  std::vector<kg::EntityRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      kg::EntityRecord e;
      e.id = j.at("id").get<std::string>();
      e.name = j.at("name").get<std::string>();
      e.entity_type = j.at("entity_type").get<std::string>();
      if (j.contains("aliases"))
        e.aliases = j.at("aliases").get<std::vector<std::string>>();
      if (j.contains("pageviews")) e.pageviews = j.at("pageviews");
      out.push_back(std::move(e));
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed entity record: " + e.what());
    }
  }
  return out;
}

int run_build(const std::string& pages_dir, const std::string& entities_file,
              const std::string& out_dir, const std::string& blacklist_file,
              const std::string& fixtures_dir, int search_k, double rate_limit,
              std::size_t top_per_type, RunContext& ctx) {
  auto candidates = load_entity_candidates(entities_file);
  ctx.add_input(entities_file);
  auto entities = ingest::select_top_entities(candidates, top_per_type);
  std::map<std::string, const kg::EntityRecord*> by_id;
  for (const auto& e : entities) by_id[e.id] = &e;

  std::set<std::string> blacklist = ingest::default_blacklist();
  if (!blacklist_file.empty()) {
    std::ifstream in(blacklist_file);
    if (!in) throw DataError("cannot read blacklist " + blacklist_file);
    blacklist.clear();
    std::string label;
    while (std::getline(in, label))
      if (!label.empty()) blacklist.insert(label);
    ctx.add_input(blacklist_file);
  }

  std::shared_ptr<ingest::SearchClient> client;
  if (!fixtures_dir.empty()) {
    client = std::make_shared<ingest::FixtureSearchClient>(fixtures_dir);
    if (rate_limit > 0)
      client = std::make_shared<ingest::RateLimitedSearchClient>(client,
                                                                 rate_limit);
    ctx.add_input((fs::path(fixtures_dir) / "index.json").string());
  }

  kg::AspectKG graph;
  graph.entities = entities;
  ingest::RunReport report;

  std::vector<fs::path> page_files;
  for (const auto& entry : fs::directory_iterator(pages_dir))
    if (entry.path().extension() == ".json") page_files.push_back(entry.path());
  std::sort(page_files.begin(), page_files.end());

  std::map<std::string, kg::ImageRef> image_pool;
  std::set<std::tuple<std::string, kg::AspectPath, std::string>> link_keys;
  auto add_link = [&](const kg::AspectImageLink& link) {
    if (link_keys.insert({link.entity_id, link.aspect_path, link.image_id})
            .second)
      graph.links.push_back(link);
  };

  for (const auto& file : page_files) {
    auto page = ingest::load_page(file);
    ctx.add_input(file.string());
    auto ent_it = by_id.find(page.entity_id);
    if (ent_it == by_id.end()) continue;  // page for an unselected entity

    auto aspects = ingest::extract_aspects(page, blacklist);
    std::set<kg::AspectPath> aspect_paths;
    for (const auto& a : aspects) {
      aspect_paths.insert(a.path);
      graph.aspects.push_back(a);
    }
    for (const auto& img : ingest::collect_page_images(page))
      image_pool.emplace(img.image_id, img);
    for (const auto& link : ingest::harvest_wikipedia_images(page))
      if (aspect_paths.count(link.aspect_path)) add_link(link);

    if (client) {
      auto queries = ingest::extract_query_sentences(page, *ent_it->second);
      std::erase_if(queries, [&](const ingest::QuerySentence& q) {
        return !aspect_paths.count(q.aspect_path);
      });
      auto harvest = ingest::harvest_search_images(queries, *client, search_k);
      report.n_queries += harvest.report.n_queries;
      report.n_links += harvest.report.n_links;
      report.skipped.insert(report.skipped.end(),
                            harvest.report.skipped.begin(),
                            harvest.report.skipped.end());
      for (const auto& img : harvest.images)
        image_pool.emplace(img.image_id, img);
      for (const auto& link : harvest.links)
        if (aspect_paths.count(link.aspect_path)) add_link(link);
    }
  }
  for (const auto& [id, img] : image_pool) graph.images.push_back(img);

  kg::save_kg(graph, out_dir);

  json skipped = json::array();
  for (const auto& s : report.skipped)
    skipped.push_back({{"query", s.query}, {"reason", s.reason}});
  json report_json{{"n_queries", report.n_queries},
                   {"n_links", report.n_links},
                   {"skipped", skipped}};
  std::ofstream rep(fs::path(out_dir) / "run_report.json", std::ios::binary);
  rep << report_json.dump(2) << '\n';

  auto stats = kg::compute_stats(graph);
  ctx.metrics = {{"n_entities", stats.n_entities},
                 {"n_aspects", stats.n_aspects},
                 {"n_images", stats.n_images},
                 {"n_links", stats.n_links}};
  ctx.write(out_dir);
  return 0;
}

json stats_to_json(const kg::KgStats& s) {
  return json{{"n_entities", s.n_entities},
              {"n_aspects", s.n_aspects},
              {"n_aspect_labels", s.n_aspect_labels},
              {"n_images", s.n_images},
              {"n_links", s.n_links},
              {"images_per_entity", s.images_per_entity},
              {"aspects_per_entity", s.aspects_per_entity}};
}

struct QueryRecord {
  std::string query_id;
  std::string entity_id;
  std::string text;
  std::string gold;
  std::vector<features::AspectDoc> candidates;
};

std::vector<QueryRecord> load_queries(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read queries file " + file.string());
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      QueryRecord q;
      q.query_id = j.at("query_id").get<std::string>();
      q.entity_id = j.at("entity_id").get<std::string>();
      q.text = j.at("text").get<std::string>();
      q.gold = j.at("gold").get<std::string>();
      for (const auto& jc : j.at("candidates")) {
        features::AspectDoc doc;
        doc.aspect_id = jc.at("aspect_id").get<std::string>();
        doc.name = jc.at("name").get<std::string>();
        if (jc.contains("content")) doc.content = jc.at("content");
        q.candidates.push_back(std::move(doc));
      }
      out.push_back(std::move(q));
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed query record: " + e.what());
    }
  }
  return out;
}

int run_features(const std::string& queries_file, const std::string& kg_dir,
                 const std::string& embeddings_file, const std::string& w2v_file,
                 const std::string& feature_indices,
                 const std::string& air_model_file, const std::string& out_file,
                 RunContext& ctx) {
  auto queries = load_queries(queries_file);
  ctx.add_input(queries_file);

  features::FeatureConfig config = features::FeatureConfig::all_text();
  if (!feature_indices.empty()) {
    config.indices = parse_index_list(feature_indices);
    std::sort(config.indices.begin(), config.indices.end());
  }

  std::optional<kg::AspectKG> graph;
  if (!kg_dir.empty()) {
    graph = kg::load_kg(kg_dir);
    for (const char* name :
         {"entities.jsonl", "aspects.jsonl", "images.jsonl", "links.jsonl"})
      ctx.add_input((fs::path(kg_dir) / name).string());
  }
  std::optional<embed::InMemoryEncoder> provider;
  if (!embeddings_file.empty()) {
    provider = embed::load_embeddings(embeddings_file);
    ctx.add_input(embeddings_file);
  }
  std::optional<embed::WordEmbeddingTable> w2v;
  if (!w2v_file.empty()) {
    w2v = embed::load_word_embeddings(w2v_file);
    ctx.add_input(w2v_file);
  }
  std::optional<air::ProjectionModel> air_model;
  if (!air_model_file.empty()) {
    air_model = air::load_air_model(air_model_file);
    ctx.add_input(air_model_file);
  }

  features::ImageScorer air_scorer;
  const features::ImageScorer* scorer = nullptr;
  if (air_model) {
    if (!graph || !provider)
      throw UsageError("--air-model requires --kg and --embeddings");
    air_scorer = [&](const features::ContextSentence& c,
                     const features::AspectDoc& doc) {
      kg::AspectNode aspect{c.entity_id, {doc.name}};
      return air::eal_image_feature_air(c, aspect, *graph, *air_model,
                                        *provider);
    };
    scorer = &air_scorer;
  }

  std::vector<features::QueryList> lists;
  for (const auto& q : queries) {
    auto ctx_sentence = features::make_context(q.text, q.entity_id);
    lists.push_back(features::assemble_feature_rows(
        ctx_sentence, q.query_id, q.candidates, q.gold, config,
        graph ? &*graph : nullptr, provider ? &*provider : nullptr,
        w2v ? &*w2v : nullptr, scorer));
  }
  features::write_run_file(lists, out_file);
  ctx.metrics = {{"n_queries", lists.size()},
                 {"feature_names", config.names()}};
  ctx.write(out_file);
  return 0;
}

int run_ltr_train(const std::string& train_file, const json& config_json,
                  std::uint64_t seed, const std::string& out_file,
                  RunContext& ctx) {
  auto lists = features::read_run_file(train_file);
  ctx.add_input(train_file);
  auto config = ltr_config_from_json(config_json, seed);
  auto result = ltr::coordinate_ascent_train(lists, config);
  ltr::Model model{result.weights, result.norm, {},
                   manifest::digest_string(config_json.dump())};
  ltr::save_model(model, out_file);
  ctx.metrics = {{"train_map", result.train_map},
                 {"best_restart", result.best_restart},
                 {"restarts", result.restarts.size()}};
  ctx.write(out_file);
  return 0;
}

int run_ltr_eval(const std::string& model_file, const std::string& eval_file,
                 const std::string& out_file, bool aggregate_only,
                 RunContext& ctx) {
  auto model = ltr::load_model(model_file);
  auto lists = features::read_run_file(eval_file);
  ctx.add_input(model_file);
  ctx.add_input(eval_file);
  auto eval = metrics::eval_eal(model.weights, model.norm, lists);
  json report = metrics::report_to_json(eval.report);
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw DataError("cannot write report " + out_file);
  out << report.dump(2) << '\n';
  if (!aggregate_only)
    metrics::write_per_query_tsv(eval.per_query, out_file + ".per_query.tsv");
  std::cout << report.dump(2) << '\n';
  ctx.metrics = report;
  ctx.write(out_file);
  return 0;
}

int run_air_eval(const std::string& model_file, const std::string& triples_file,
                 const std::string& embeddings_file, const std::string& k_list,
                 bool baseline, std::uint64_t seed, const std::string& out_file,
                 RunContext& ctx) {
  auto triples = air::load_triples(triples_file);
  auto provider = embed::load_embeddings(embeddings_file);
  ctx.add_input(triples_file);
  ctx.add_input(embeddings_file);
  air::ProjectionModel model;
  if (!model_file.empty()) {
    model = air::load_air_model(model_file);
    ctx.add_input(model_file);
  } else if (!baseline) {
    throw UsageError("air-eval requires --model unless --baseline is given");
  }
  std::vector<int> ks = {3, 5, 10};
  if (!k_list.empty()) ks = parse_index_list(k_list);
  auto split = air::split_triples(triples, seed);
  auto pool = metrics::candidate_pool_from_triples(triples);
  auto eval = metrics::eval_air(model, split.test, provider, pool, ks, baseline);
  json report = metrics::report_to_json(eval.report);
  std::ofstream out(out_file, std::ios::binary);
  if (!out) throw DataError("cannot write report " + out_file);
  out << report.dump(2) << '\n';
  metrics::write_per_query_tsv(eval.per_query, out_file + ".per_query.tsv");
  std::cout << report.dump(2) << '\n';
  ctx.metrics = report;
  ctx.write(out_file);
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Aspect-aware multi-modal knowledge graph toolkit"};
  app.require_subcommand(1);

  std::string config_file, out, kg_dir, embeddings;
  std::uint64_t seed = 0;
  app.add_option("--config", config_file, "JSON config file")->capture_default_str();
  app.add_option("--seed", seed, "random seed")->capture_default_str();

  // build
  auto* build = app.add_subcommand("build", "construct a KG from page documents");
  std::string pages_dir, entities_file, blacklist_file, fixtures_dir;
  int search_k = 5;
  double rate_limit = 0.0;
  std::size_t top_per_type = 200;
  build->add_option("--pages", pages_dir, "directory of PageDoc JSON files")
      ->required();
  build->add_option("--entities", entities_file, "entity candidates jsonl")
      ->required();
  build->add_option("--out", out, "output KG directory")->required();
  build->add_option("--blacklist", blacklist_file, "blacklist label file");
  build->add_option("--search-fixtures", fixtures_dir,
                    "offline search fixture directory (default $ASPECTKG_FIXTURES)");
  build->add_option("--k", search_k, "search results per query");
  build->add_option("--rate-limit", rate_limit, "max search calls per second");
  build->add_option("--top-per-type", top_per_type, "entities kept per type");

  // flatten
  auto* flatten = app.add_subcommand("flatten", "move links to first-level aspects");
  flatten->add_option("--kg", kg_dir, "input KG directory")->required();
  flatten->add_option("--out", out, "output KG directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "print KG statistics");
  stats->add_option("--kg", kg_dir, "KG directory")->required();
  stats->add_option("--out", out, "optional JSON output file");

  // features
  auto* feat = app.add_subcommand("features", "compute EAL feature rows");
  std::string queries_file, w2v_file, feature_indices, air_model_file;
  feat->add_option("--queries", queries_file, "query jsonl file")->required();
  feat->add_option("--kg", kg_dir, "KG directory (for the image feature)");
  feat->add_option("--embeddings", embeddings, "embeddings jsonl");
  feat->add_option("--w2v", w2v_file, "word embeddings jsonl");
  feat->add_option("--features", feature_indices, "comma-separated feature indices");
  feat->add_option("--air-model", air_model_file, "AIR model for the image feature");
  feat->add_option("--out", out, "output run file")->required();

  // ltr-train / ltr-eval
  auto* ltr_train = app.add_subcommand("ltr-train", "train the EAL ranker");
  std::string train_file;
  ltr_train->add_option("--train", train_file, "training run file")->required();
  ltr_train->add_option("--out", out, "output model file")->required();

  auto* ltr_eval = app.add_subcommand("ltr-eval", "evaluate the EAL ranker");
  std::string model_file, eval_file;
  bool aggregate_only = false;
  ltr_eval->add_option("--model", model_file, "model file")->required();
  ltr_eval->add_option("--eval", eval_file, "evaluation run file")->required();
  ltr_eval->add_option("--out", out, "output report file")->required();
  ltr_eval->add_flag("--aggregate-only", aggregate_only,
                     "skip the per-query breakdown");

  // air-*
  auto* air_triples = app.add_subcommand("air-triples", "build retrieval triples");
  air_triples->add_option("--kg", kg_dir, "KG directory")->required();
  air_triples->add_option("--embeddings", embeddings, "embeddings jsonl")
      ->required();
  air_triples->add_option("--out", out, "output triples file")->required();

  auto* air_train = app.add_subcommand("air-train", "train the retrieval model");
  std::string triples_file;
  air_train->add_option("--triples", triples_file, "triples jsonl")->required();
  air_train->add_option("--embeddings", embeddings, "embeddings jsonl")
      ->required();
  air_train->add_option("--out", out, "output model file")->required();

  auto* air_eval = app.add_subcommand("air-eval", "evaluate retrieval");
  std::string k_list;
  bool baseline = false;
  air_eval->add_option("--model", model_file, "model file");
  air_eval->add_option("--triples", triples_file, "triples jsonl")->required();
  air_eval->add_option("--embeddings", embeddings, "embeddings jsonl")
      ->required();
  air_eval->add_option("--k", k_list, "comma-separated metric cutoffs");
  air_eval->add_flag("--baseline", baseline, "score with raw aspect-text similarity");
  air_eval->add_option("--out", out, "output report file")->required();

  auto* kg_correct = app.add_subcommand("kg-correct", "remove off-aspect links");
  double threshold = 0.0;
  bool has_threshold = false;
  std::size_t top_m = 0;
  kg_correct->add_option("--kg", kg_dir, "KG directory")->required();
  kg_correct->add_option("--model", model_file, "AIR model file")->required();
  kg_correct->add_option("--embeddings", embeddings, "embeddings jsonl")
      ->required();
  auto* thr_opt =
      kg_correct->add_option("--threshold", threshold, "minimum keep score");
  kg_correct->add_option("--top-m", top_m, "links kept per aspect group");
  kg_correct->add_option("--out", out, "output KG directory")->required();

  auto* kg_expand = app.add_subcommand("kg-expand", "assign aspects to new images");
  std::string images_file;
  kg_expand->add_option("--kg", kg_dir, "KG directory")->required();
  kg_expand->add_option("--model", model_file, "AIR model file")->required();
  kg_expand->add_option("--embeddings", embeddings, "embeddings jsonl")
      ->required();
  kg_expand->add_option("--images", images_file,
                        "jsonl of {image_id, entity_id} to assign")
      ->required();
  kg_expand->add_option("--out", out, "output assignments file")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }
  has_threshold = thr_opt->count() > 0;

  json config_json = load_config(config_file);
  RunContext ctx;
  ctx.config = config_json;
  ctx.seeds = {seed};

  auto kg_inputs = [&](RunContext& c) {
    for (const char* name :
         {"entities.jsonl", "aspects.jsonl", "images.jsonl", "links.jsonl"})
      c.add_input((fs::path(kg_dir) / name).string());
  };

  if (build->parsed()) {
    ctx.command = "build";
    if (fixtures_dir.empty())
      if (const char* env = std::getenv("ASPECTKG_FIXTURES"))
        fixtures_dir = env;
    return run_build(pages_dir, entities_file, out, blacklist_file,
                     fixtures_dir, search_k, rate_limit, top_per_type, ctx);
  }
  if (flatten->parsed()) {
    ctx.command = "flatten";
    auto graph = kg::load_kg(kg_dir);
    kg_inputs(ctx);
    kg::save_kg(kg::flatten_to_first_level(graph), out);
    ctx.write(out);
    return 0;
  }
  if (stats->parsed()) {
    ctx.command = "stats";
    auto graph = kg::load_kg(kg_dir);
    kg_inputs(ctx);
    json j = stats_to_json(kg::compute_stats(graph));
    std::cout << j.dump(2) << '\n';
    if (!out.empty()) {
      std::ofstream f(out, std::ios::binary);
      f << j.dump(2) << '\n';
      ctx.metrics = j;
      ctx.write(out);
    }
    return 0;
  }
  if (feat->parsed()) {
    ctx.command = "features";
    return run_features(queries_file, kg_dir, embeddings, w2v_file,
                        feature_indices, air_model_file, out, ctx);
  }
  if (ltr_train->parsed()) {
    ctx.command = "ltr-train";
    return run_ltr_train(train_file, config_json, seed, out, ctx);
  }
  if (ltr_eval->parsed()) {
    ctx.command = "ltr-eval";
    return run_ltr_eval(model_file, eval_file, out, aggregate_only, ctx);
  }
  if (air_triples->parsed()) {
    ctx.command = "air-triples";
    auto graph = kg::load_kg(kg_dir);
    auto provider = embed::load_embeddings(embeddings);
    kg_inputs(ctx);
    ctx.add_input(embeddings);
    auto result = air::build_triples(graph, provider);
    air::save_triples(result.triples, out);
    ctx.metrics = {{"n_triples", result.triples.size()},
                   {"skipped_entities", result.skipped_entities}};
    ctx.write(out);
    return 0;
  }
  if (air_train->parsed()) {
    ctx.command = "air-train";
    auto triples = air::load_triples(triples_file);
    auto provider = embed::load_embeddings(embeddings);
    ctx.add_input(triples_file);
    ctx.add_input(embeddings);
    auto config = air_config_from_json(config_json, seed);
    auto split = air::split_triples(triples, seed);
    auto model = air::make_model(provider.image_dim(), provider.text_dim(),
                                 config.tau, seed);
    auto curve = air::train(model, split.train, provider, config);
    air::save_air_model(model, manifest::digest_string(config_json.dump()), out);
    std::ofstream curve_out(out + ".curve.json", std::ios::binary);
    curve_out << json{{"epoch_loss", curve.epoch_loss}}.dump(2) << '\n';
    ctx.metrics = {{"final_loss",
                    curve.epoch_loss.empty() ? 0.0 : curve.epoch_loss.back()},
                   {"n_train", split.train.size()}};
    ctx.write(out);
    return 0;
  }
  if (air_eval->parsed()) {
    ctx.command = "air-eval";
    return run_air_eval(model_file, triples_file, embeddings, k_list, baseline,
                        seed, out, ctx);
  }
  if (kg_correct->parsed()) {
    ctx.command = "kg-correct";
    auto graph = kg::load_kg(kg_dir);
    auto model = air::load_air_model(model_file);
    auto provider = embed::load_embeddings(embeddings);
    kg_inputs(ctx);
    ctx.add_input(model_file);
    ctx.add_input(embeddings);
    air::CorrectionPolicy policy;
    if (has_threshold) policy.threshold = threshold;
    if (top_m > 0) policy.keep_top_m = top_m;
    if (!policy.threshold && !policy.keep_top_m)
      throw UsageError("kg-correct needs --threshold or --top-m");
    auto result = air::correct_kg(graph, model, provider, policy);
    kg::save_kg(result.kg, out);
    std::ofstream removed(fs::path(out) / "removals.jsonl", std::ios::binary);
    for (const auto& r : result.removed)
      removed << json{{"entity_id", r.link.entity_id},
                      {"aspect_path", r.link.aspect_path},
                      {"image_id", r.link.image_id},
                      {"score", r.score}}
                     .dump()
              << '\n';
    ctx.metrics = {{"n_removed", result.removed.size()}};
    ctx.write(out);
    return 0;
  }
  if (kg_expand->parsed()) {
    ctx.command = "kg-expand";
    auto graph = kg::load_kg(kg_dir);
    auto model = air::load_air_model(model_file);
    auto provider = embed::load_embeddings(embeddings);
    kg_inputs(ctx);
    ctx.add_input(model_file);
    ctx.add_input(embeddings);
    ctx.add_input(images_file);
    std::ifstream in(images_file);
    if (!in) throw DataError("cannot read images file " + images_file);
    std::ofstream assignments(out, std::ios::binary);
    if (!assignments) throw DataError("cannot write " + out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      auto image_id = j.at("image_id").get<std::string>();
      auto entity_id = j.at("entity_id").get<std::string>();
      auto assigned =
          air::expand_assign(image_id, entity_id, graph, model, provider);
      assignments << json{{"image_id", image_id},
                          {"entity_id", entity_id},
                          {"aspect_label", assigned.aspect_label},
                          {"score", assigned.score}}
                         .dump()
                  << '\n';
      ++n;
    }
    ctx.metrics = {{"n_assigned", n}};
    ctx.write(out);
    return 0;
  }
  return 1;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace aspectkg::cli
