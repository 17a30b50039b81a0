// Copyright 2026 The projann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "projann/eval.hpp"
#include "projann/pipeline.hpp"
#include "projann/projection.hpp"
#include "projann/storage.hpp"

namespace projann::cli {
namespace {

// Bad flag combinations found after parsing; reported with a usage hint.
class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct Options {
  std::string data;
  std::string queries;
  std::string test_queries;
  std::string metric = "ip";
  std::optional<int> dim;
  std::string mode = "id";
  int b1 = 8;
  int b2 = 0;
  std::string secondary = "f32";
  uint32_t graph_degree = 128;
  uint32_t build_window = 200;
  std::optional<float> prune_alpha;
  std::vector<size_t> search_window{50};
  size_t rerank = 50;
  size_t k = 10;
  size_t runs = 10;
  size_t threads = 1;
  uint64_t seed = 0x5eed;
  std::string out;
  std::string index;
  std::string truth;
};

Metric metric_of(const Options& o) {
  return o.metric == "l2" ? Metric::euclidean : Metric::inner_product;
}

bool cosine(const Options& o) { return o.metric == "cosine"; }

void require(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) {
    throw UsageError(std::string(command) + " requires " + flag);
  }
}

FloatMatrix load_vectors(const std::string& path, bool normalize) {
  FloatMatrix m = read_fvecs(path);
  if (m.rows() == 0) throw ValidationError("no vectors in '" + path + "'");
  if (normalize) normalize_rows(m);
  return m;
}

// Query file for search, ground truth and bench: the report set when given.
const std::string& eval_queries(const Options& o, const char* command) {
  if (!o.test_queries.empty()) return o.test_queries;
  if (o.queries.empty()) {
    throw UsageError(std::string(command) + " requires --test-queries or --queries");
  }
  return o.queries;
}

nlohmann::json report_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["losses"] = r.losses;
  j["gaps_a"] = r.gaps_a;
  j["gaps_b"] = r.gaps_b;
  j["steps"] = r.steps;
  j["iterations_run"] = r.iterations_run;
  j["termination"] = std::string(to_string(r.termination));
  if (r.loss_before_retraction) j["loss_before_retraction"] = *r.loss_before_retraction;
  if (r.loss_after_retraction) j["loss_after_retraction"] = *r.loss_after_retraction;
  return j;
}

ProjectionPair train(const Options& o, const FloatMatrix& data, nlohmann::json& report) {
  if (!o.dim) throw UsageError("training requires --dim");
  const bool ood = o.mode != "id";
  FloatMatrix queries;
  if (ood) {
    if (o.queries.empty()) throw UsageError("--mode " + o.mode + " requires --queries");
    queries = load_vectors(o.queries, cosine(o));
    if (queries.cols() != data.cols()) {
      throw ValidationError("--queries dimension differs from --data");
    }
  } else {
    // PCA ignores K_Q; the database stands in for the query set
    queries = data;
  }
  GramOptions gopt;
  gopt.workers = o.threads;
  const GramPair grams = compute_grams(data, queries, gopt);

  report["mode"] = o.mode;
  report["metric"] = o.metric;
  report["source_dim"] = data.cols();
  report["target_dim"] = *o.dim;
  report["database_samples"] = grams.n;
  report["query_samples"] = ood ? grams.m : 0;

  ProjectionPair p;
  if (o.mode == "id") {
    p = train_id(grams.k_x, *o.dim);
    report["reconstruction_loss"] = reconstruction_loss(p.a, grams.k_x);
  } else if (o.mode == "ood-fw") {
    FwResult fw = train_ood_fw(grams, *o.dim);
    report["convergence"] = report_json(fw.report);
    p = std::move(fw.pair);
  } else {
    EsResult es = train_ood_es(grams, *o.dim);
    report["beta"] = es.beta;
    p = std::move(es.pair);
  }
  if (ood) {
    report["loss"] = ood_loss(p, grams);
    report["pca_loss"] = ood_loss(train_id(grams.k_x, *o.dim), grams);
  }
  report["orthonormal"] = p.orthonormal;
  return p;
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f || !(f << text) || !f.flush()) throw IoError("cannot write '" + path + "'");
}

int cmd_train(const Options& o, std::ostream&) {
  require(o.data, "--data", "train");
  require(o.out, "--out", "train");
  const FloatMatrix data = load_vectors(o.data, cosine(o));
  nlohmann::json report;
  const ProjectionPair p = train(o, data, report);
  save_projection(p, o.out);
  std::ofstream f(o.out + ".report.json", std::ios::trunc);
  if (!f || !(f << report.dump(2) << '\n')) {
    throw IoError("cannot write '" + o.out + ".report.json'");
  }
  return kExitOk;
}

int cmd_build(const Options& o, std::ostream&) {
  require(o.data, "--data", "build");
  require(o.out, "--out", "build");
  const FloatMatrix data = load_vectors(o.data, cosine(o));
  ProjectionPair p = ProjectionPair::identity(data.cols());
  if (o.dim && *o.dim != data.cols()) {
    nlohmann::json ignored;
    p = train(o, data, ignored);
  }
  IndexConfig cfg;
  cfg.metric = metric_of(o);
  cfg.primary = StoreSpec::lvq(o.b1, o.b2);
  cfg.secondary = StoreSpec::parse(o.secondary);
  cfg.graph.max_degree = o.graph_degree;
  cfg.graph.build_window = o.build_window;
  cfg.graph.prune_alpha =
      o.prune_alpha.value_or(cfg.metric == Metric::euclidean ? 1.2f : 0.95f);
  cfg.graph.seed = o.seed;
  cfg.graph.threads = o.threads;
  save_index(TwoPhaseIndex::build(data, std::move(p), cfg), o.out);
  return kExitOk;
}

TwoPhaseIndex open_index(const Options& o, bool metric_given) {
  require(o.index, "--index", "this command");
  TwoPhaseIndex index = load_index(o.index);
  if (metric_given && index.metric() != metric_of(o)) {
    throw ValidationError("--metric " + o.metric + " does not match the index metric " +
                          std::string(to_string(index.metric())));
  }
  return index;
}

int cmd_search(const Options& o, bool metric_given, std::ostream& out) {
  const TwoPhaseIndex index = open_index(o, metric_given);
  const FloatMatrix q = load_vectors(eval_queries(o, "search"), cosine(o));
  if (o.search_window.size() != 1) {
    throw UsageError("search takes a single --search-window");
  }
  const auto results =
      index.search_batch(q, o.k, {o.search_window.front(), o.rerank}, o.threads);
  std::ostringstream csv;
  csv << "query,rank,id,score\n";
  for (size_t i = 0; i < results.size(); ++i) {
    for (size_t r = 0; r < results[i].ids.size(); ++r) {
      csv << i << ',' << r << ',' << results[i].ids[r] << ',' << results[i].scores[r] << '\n';
    }
  }
  write_text(o.out, csv.str(), out);
  return kExitOk;
}

int cmd_ground_truth(const Options& o, std::ostream&) {
  require(o.data, "--data", "ground-truth");
  require(o.out, "--out", "ground-truth");
  const FloatMatrix data = load_vectors(o.data, cosine(o));
  const FloatMatrix q = load_vectors(eval_queries(o, "ground-truth"), cosine(o));
  write_ground_truth(brute_force_topk(data, q, o.k, metric_of(o), o.threads), o.out);
  return kExitOk;
}

int cmd_bench(const Options& o, bool metric_given, std::ostream& out) {
  const TwoPhaseIndex index = open_index(o, metric_given);
  const FloatMatrix q = load_vectors(eval_queries(o, "bench"), cosine(o));
  GroundTruth truth;
  if (!o.truth.empty()) {
    truth = read_ground_truth(o.truth, index.metric());
  } else if (!o.data.empty()) {
    truth = brute_force_topk(load_vectors(o.data, cosine(o)), q, o.k, index.metric(),
                             o.threads);
  } else {
    throw UsageError("bench requires --truth or --data");
  }
  std::vector<SweepPoint> sweep;
  for (size_t w : o.search_window) sweep.push_back({w, std::min(o.rerank, w)});
  BenchOptions bopt;
  bopt.k = o.k;
  bopt.runs = o.runs;
  bopt.threads = o.threads;
  std::ostringstream csv;
  write_csv(bench(index, q, truth, sweep, bopt), csv);
  write_text(o.out, csv.str(), out);
  return kExitOk;
}

void add_options(CLI::App& app, Options& o) {
  app.add_option("--data", o.data, "Database vectors (fvecs)");
  app.add_option("--queries", o.queries,
                 "Training query set (fvecs); required by --mode ood-fw and ood-es");
  app.add_option("--test-queries", o.test_queries,
                 "Query set for search, ground-truth and bench (default: --queries)");
  app.add_option("--metric", o.metric, "Similarity")
      ->check(CLI::IsMember({"ip", "l2", "cosine"}))
      ->capture_default_str();
  app.add_option("--dim", o.dim, "Target dimensionality d (build default: no reduction)");
  app.add_option("--mode", o.mode, "Projection training mode")
      ->check(CLI::IsMember({"id", "ood-fw", "ood-es"}))
      ->capture_default_str();
  app.add_option("--b1", o.b1, "Primary LVQ bits")
      ->check(CLI::IsMember({4, 8}))
      ->capture_default_str();
  app.add_option("--b2", o.b2, "Primary LVQ residual bits (0 = one level)")
      ->check(CLI::IsMember({0, 8}))
      ->capture_default_str();
  app.add_option("--secondary", o.secondary, "Re-ranking store")
      ->check(CLI::IsMember({"f32", "lvq8"}))
      ->capture_default_str();
  app.add_option("--graph-degree", o.graph_degree, "Graph max out-degree R")
      ->capture_default_str();
  app.add_option("--build-window", o.build_window, "Build search window L")
      ->capture_default_str();
  app.add_option("--prune-alpha", o.prune_alpha, "Pruning alpha")
      ->default_str("1.2 for l2, 0.95 for ip and cosine");
  app.add_option("--search-window", o.search_window,
                 "Search window W; bench accepts a comma-separated sweep")
      ->delimiter(',')
      ->default_str("50");
  app.add_option("--rerank", o.rerank,
                 "Candidates re-ranked with secondary vectors (bench: min with W)")
      ->capture_default_str();
  app.add_option("--k", o.k, "Neighbors returned")->capture_default_str();
  app.add_option("--runs", o.runs, "Bench repetitions per W (best QPS kept)")
      ->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->capture_default_str();
  app.add_option("--seed", o.seed, "Graph build seed")->capture_default_str();
  app.add_option("--out", o.out, "Output path (search and bench: default stdout)");
  app.add_option("--index", o.index, "Index bundle (.lvec) for search and bench");
  app.add_option("--truth", o.truth, "Ground truth (ivecs) for bench");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dimensionality-reduced graph index for similarity search", "projann"};
  app.fallthrough();
  app.require_subcommand(1);
  Options o;
  add_options(app, o);
  auto* train_cmd = app.add_subcommand("train", "Learn a projection; writes it and <out>.report.json");
  auto* build_cmd = app.add_subcommand("build", "Train (if --dim) and build an index bundle");
  auto* search_cmd = app.add_subcommand("search", "Query an index; CSV query,rank,id,score");
  auto* gt_cmd = app.add_subcommand("ground-truth", "Exact top-k by brute force; writes ivecs");
  auto* bench_cmd = app.add_subcommand("bench", "Recall and QPS sweep over W; writes CSV");

  std::vector<const char*> argv{"projann"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    // contradictory combination, rejected before anything is read
    if (o.metric == "l2" && o.mode == "ood-fw") {
      throw UsageError(std::string(kEuclideanNeedsSharedProjection) +
                       "; --mode ood-fw learns a != b, use --mode id or ood-es");
    }
    const bool metric_given = app.count("--metric") > 0;
    if (train_cmd->parsed()) return cmd_train(o, out);
    if (build_cmd->parsed()) return cmd_build(o, out);
    if (search_cmd->parsed()) return cmd_search(o, metric_given, out);
    if (gt_cmd->parsed()) return cmd_ground_truth(o, out);
    if (bench_cmd->parsed()) return cmd_bench(o, metric_given, out);
    return kExitValidation;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nRun 'projann --help' for usage.\n";
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace projann::cli
