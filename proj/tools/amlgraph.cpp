// amlgraph: ingest, train, evaluate and benchmark transaction classifiers
// on Elliptic-format data, export ego subgraphs, run the self-test.

#include <CLI11.hpp>
#include <numeric>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "amlgraph/bench.hpp"
#include "amlgraph/elliptic_io.hpp"
#include "amlgraph/models.hpp"
#include "amlgraph/synth.hpp"
#include "selftest.hpp"

namespace fs = std::filesystem;
using namespace amlgraph;

namespace {

struct DataArgs {
  std::string data_dir;
  std::string bundle;
  std::optional<std::size_t> n_local;

  void add(CLI::App* app) {
    app->add_option("--data-dir", data_dir, "Directory holding the three dataset CSVs (default: $AMLGRAPH_DATA_DIR)");
    app->add_option("--bundle", bundle, "Clean bundle written by `ingest` (takes precedence over --data-dir)");
    app->add_option("--n-local", n_local, "Number of local feature columns (default: detected)");
  }

  fs::path resolved_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("AMLGRAPH_DATA_DIR"); env != nullptr && *env != '\0') return env;
    throw ArgumentError("no dataset given: pass --bundle or --data-dir, or set AMLGRAPH_DATA_DIR");
  }

  RawTables load_raw_tables() const {
    const auto dir = resolved_dir();
    const auto paths = RawPaths::in_dir(dir);
    return amlgraph::load_raw(paths.features, paths.classes, paths.edges, local_columns(dir));
  }

  // An explicit --n-local wins; otherwise a manifest.json written by
  // `synth` next to the CSVs supplies the split.
  std::optional<std::size_t> local_columns(const fs::path& dir) const {
    if (n_local) return n_local;
    std::ifstream in(dir / "manifest.json");
    if (!in) return std::nullopt;
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("local_features") && j["local_features"].is_number_unsigned())
      return j["local_features"].get<std::size_t>();
    return std::nullopt;
  }

  PreprocessedDataset load() const {
    if (!bundle.empty()) return read_bundle(bundle);
    return preprocess(load_raw_tables());
  }
};

struct SplitArgs {
  int boundary = kDefaultSplitBoundary;
  void add(CLI::App* app) {
    app->add_option("--split-boundary", boundary, "Last time step of the training split")->capture_default_str();
  }
};

// Hyperparameters shared by `train` and `bench`; flag names double as
// config-file keys.
struct ModelArgs {
  ModelConfig cfg;
  std::optional<double> cw_licit, cw_illicit;
  std::string mlp_hidden = "64,32";
  std::optional<double> dropout;
  bool directed = false;

  void add(CLI::App* app) {
    app->add_option("--class-weight-licit", cw_licit, "Loss weight of the licit class (default 0.3)");
    app->add_option("--class-weight-illicit", cw_illicit, "Loss weight of the illicit class (default 0.7)");
    app->add_option("--max-depth", cfg.tree.max_depth, "Decision tree depth limit, 0 = unlimited");
    app->add_option("--min-leaf", cfg.tree.min_leaf, "Decision tree minimum leaf size");
    app->add_option("--n-trees", cfg.forest.n_trees, "Random forest size")->capture_default_str();
    app->add_option("--max-features", cfg.forest.max_features, "Features tried per forest split, 0 = sqrt(F)");
    app->add_option("--forest-max-depth", cfg.forest.max_depth, "Forest tree depth limit, 0 = unlimited");
    app->add_option("--rounds", cfg.adaboost.rounds, "AdaBoost rounds")->capture_default_str();
    app->add_option("--logreg-lr", cfg.logreg.lr, "Logistic regression step size")->capture_default_str();
    app->add_option("--logreg-epochs", cfg.logreg.epochs, "Logistic regression epochs")->capture_default_str();
    app->add_option("--l2", cfg.logreg.l2, "Logistic regression L2 penalty")->capture_default_str();
    app->add_option("--svc-lambda", cfg.svc.lambda, "Linear SVC regularization")->capture_default_str();
    app->add_option("--svc-epochs", cfg.svc.epochs, "Linear SVC epochs")->capture_default_str();
    app->add_option("--k", cfg.knn.k, "k-NN neighbours")->capture_default_str();
    app->add_option("--mlp-hidden", mlp_hidden, "MLP hidden widths, comma separated")->capture_default_str();
    app->add_option("--mlp-epochs", cfg.mlp.epochs, "MLP epochs")->capture_default_str();
    app->add_option("--mlp-lr", cfg.mlp.optimizer.lr, "MLP learning rate")->capture_default_str();
    app->add_option("--epochs", cfg.gnn.epochs, "GCN/GAT epochs")->capture_default_str();
    app->add_option("--patience", cfg.gnn.patience, "GCN/GAT early-stop patience, 0 = off")->capture_default_str();
    app->add_option("--lr", cfg.gnn.optimizer.lr, "GCN/GAT learning rate")->capture_default_str();
    app->add_option("--momentum", cfg.gnn.optimizer.momentum, "GCN/GAT RMSprop momentum")->capture_default_str();
    app->add_option("--rho", cfg.gnn.optimizer.rho, "GCN/GAT RMSprop decay")->capture_default_str();
    app->add_option("--hidden", cfg.gnn.hidden, "GCN width")->capture_default_str();
    app->add_option("--heads", cfg.gnn.heads, "GAT heads")->capture_default_str();
    app->add_option("--head-dim", cfg.gnn.head_dim, "GAT width per head")->capture_default_str();
    app->add_option("--gat-input-units", cfg.gnn.gat_input_units, "GAT input dense width")->capture_default_str();
    app->add_option("--gat-output-units", cfg.gnn.gat_output_units, "GAT output dense width")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout rate (default: 0 for GCN, 0.5 for GAT)");
    app->add_flag("--batch-norm", cfg.gnn.batch_norm, "Batch normalization in GCN feed-forward blocks");
    app->add_flag("--directed", directed, "Pass GNN messages along edge direction only");
  }

  ModelConfig resolve() const {
    ModelConfig c = cfg;
    if (cw_licit || cw_illicit) c.class_weights = std::array<double, 2>{cw_licit.value_or(0.3), cw_illicit.value_or(0.7)};
    c.mlp.hidden.clear();
    std::stringstream ss(mlp_hidden);
    for (std::string tok; std::getline(ss, tok, ',');) {
      if (tok.empty()) continue;
      std::size_t w = 0;
      try {
        w = std::stoul(tok);
      } catch (const std::exception&) {
        throw ArgumentError("--mlp-hidden: '" + tok + "' is not a width");
      }
      if (w == 0) throw ArgumentError("--mlp-hidden: widths must be positive");
      c.mlp.hidden.push_back(w);
    }
    c.gnn.dropout = dropout;
    c.gnn.symmetrize = !directed;
    return c;
  }
};

// Expands `--config file.json` into flags inserted ahead of the user's own
// arguments, so explicit flags win (options take the last value).
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].starts_with("--config=")) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  if (!j.is_object()) throw ParseError(path, 0, "config must be a flat JSON object");
  std::vector<std::string> injected;
  for (const auto& [key, value] : j.items()) {
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) injected.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      injected.insert(injected.end(), {flag, joined});
    } else if (value.is_string()) {
      injected.insert(injected.end(), {flag, value.get<std::string>()});
    } else if (value.is_number() || value.is_null()) {
      if (!value.is_null()) injected.insert(injected.end(), {flag, value.dump()});
    } else {
      throw ParseError(path, 0, "config key '" + key + "' must be a scalar or an array");
    }
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

void print_report(const EvalReport& r) {
  std::cout << "model=" << r.meta.model << " features=" << r.meta.features << " samples=" << r.n_samples << "\n";
  for (const auto* cls : {"illicit", "licit"}) {
    const auto& m = std::string(cls) == "illicit" ? r.illicit : r.licit;
    std::cout << "  " << cls << ": precision=" << format3(m.precision) << (m.precision_undefined ? " (undefined)" : "")
              << " recall=" << format3(m.recall) << (m.recall_undefined ? " (undefined)" : "")
              << " f1=" << format3(m.f1) << "  tp=" << m.cm.tp << " fp=" << m.cm.fp << " fn=" << m.cm.fn
              << " tn=" << m.cm.tn << "\n";
  }
  std::cout << "  micro_f1=" << format3(r.micro_f1) << "\n";
}

void write_text(const fs::path& path, const std::string& text) { io_detail::write_text(path, text); }

std::vector<std::size_t> rows_for(const std::string& which, const PreprocessedDataset& ds, const Split& split) {
  if (which == "test") return split.test;
  if (which == "train") return split.train;
  std::vector<std::size_t> all(ds.n_nodes());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transaction-graph classification for anti-money-laundering research", "amlgraph"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  int status = 0;

  auto add_config = [](CLI::App* sub) {
    sub->add_option("--config", "Flat JSON file whose keys are long flag names");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse and preprocess the dataset CSVs into a clean bundle");
  DataArgs ingest_data;
  std::string ingest_features, ingest_classes, ingest_edges, ingest_out;
  ingest_data.add(ingest);
  ingest->add_option("--features", ingest_features, "Features CSV (overrides --data-dir)");
  ingest->add_option("--classes", ingest_classes, "Classes CSV (overrides --data-dir)");
  ingest->add_option("--edges", ingest_edges, "Edge list CSV (overrides --data-dir)");
  ingest->add_option("--out", ingest_out, "Bundle to write");
  add_config(ingest);
  ingest->callback([&] {
    RawPaths paths;
    std::optional<std::size_t> n_local = ingest_data.n_local;
    if (ingest_features.empty() || ingest_classes.empty() || ingest_edges.empty()) {
      const auto dir = ingest_data.resolved_dir();
      paths = RawPaths::in_dir(dir);
      n_local = ingest_data.local_columns(dir);
    }
    if (!ingest_features.empty()) paths.features = ingest_features;
    if (!ingest_classes.empty()) paths.classes = ingest_classes;
    if (!ingest_edges.empty()) paths.edges = ingest_edges;
    const auto raw = load_raw(paths.features, paths.classes, paths.edges, n_local);
    const auto rc = count_labels(raw.labels);
    std::cout << "raw_nodes=" << raw.n_nodes() << " raw_edges=" << raw.edges.size() << " illicit=" << rc.illicit
              << " licit=" << rc.licit << " unknown=" << rc.unknown << "\n";
    std::cout << "columns: local=" << raw.layout.n_local << " aggregated=" << raw.layout.n_agg << "\n";
    const auto ds = preprocess(raw);
    const auto pc = count_labels(ds.y);
    std::cout << "nodes=" << ds.n_nodes() << " edges=" << ds.edges.size() << "\n";
    std::cout << "illicit=" << pc.illicit << " licit=" << pc.licit << "\n";
    if (!ingest_out.empty()) {
      write_bundle(ds, ingest_out);
      std::cout << "wrote " << ingest_out << "\n";
    }
  });

  // train
  auto* train = app.add_subcommand("train", "Train one model and evaluate it on the test split");
  DataArgs train_data;
  SplitArgs train_split;
  ModelArgs train_model_args;
  std::string train_family, train_features = "tx", train_out = "amlgraph-out";
  std::uint64_t train_seed = 0;
  train_data.add(train);
  train_split.add(train);
  train_model_args.add(train);
  train->add_option("--model", train_family, "decision_tree, random_forest, adaboost, logreg, svc, knn, mlp, gcn, gat")
      ->required();
  train->add_option("--features,--feature-mode", train_features, "tx or tx_agg")->capture_default_str();
  train->add_option("--seed", train_seed, "Master seed")->capture_default_str();
  train->add_option("--out-dir", train_out, "Output directory")->capture_default_str();
  add_config(train);
  train->callback([&] {
    const auto ds = train_data.load();
    const auto split = temporal_split(ds, train_split.boundary);
    const auto mode = parse_feature_mode(train_features);
    const auto g = build_graph(ds);
    auto trained = train_model(train_family, ds, mode, split, &g, train_model_args.resolve(), train_seed);
    const auto report = evaluate_model(*trained.model, ds, mode, split.test, train_seed);
    fs::create_directories(train_out);
    const fs::path out(train_out);
    save_model(*trained.model, mode, out / "model.ckpt");
    write_text(out / "report.csv", reports_csv(std::vector{report}));
    if (!trained.history.empty()) write_text(out / "history.csv", history_csv(trained.history));
    if (!trained.loss_curve.empty()) {
      std::string csv = "epoch,loss\n";
      for (std::size_t e = 0; e < trained.loss_curve.size(); ++e)
        csv += std::to_string(e + 1) + "," + detail::full_precision(trained.loss_curve[e]) + "\n";
      write_text(out / "history.csv", csv);
    }
    print_report(report);
    std::cout << "wrote " << (out / "model.ckpt").string() << ", " << (out / "report.csv").string() << "\n";
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model");
  DataArgs eval_data;
  SplitArgs eval_split;
  std::string eval_ckpt, eval_rows = "test", eval_out;
  std::uint64_t eval_seed = 0;
  eval_data.add(eval);
  eval_split.add(eval);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint written by `train`")->required();
  eval->add_option("--rows", eval_rows, "test, train or all")->check(CLI::IsMember({"test", "train", "all"}));
  eval->add_option("--seed", eval_seed, "Seed recorded in the report")->capture_default_str();
  eval->add_option("--out", eval_out, "Report CSV to write");
  add_config(eval);
  eval->callback([&] {
    const auto ds = eval_data.load();
    const auto split = temporal_split(ds, eval_split.boundary);
    const auto g = build_graph(ds);
    const auto loaded = load_model(eval_ckpt, &g);
    const auto report = evaluate_model(*loaded.model, ds, loaded.mode, rows_for(eval_rows, ds, split), eval_seed);
    print_report(report);
    if (!eval_out.empty()) write_text(eval_out, reports_csv(std::vector{report}));
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Run every model and feature mode; write both results tables");
  DataArgs bench_data;
  SplitArgs bench_split;
  ModelArgs bench_model_args;
  std::string bench_out = "amlgraph-bench", bench_models;
  BenchOptions bench_opts;
  bench_data.add(bench);
  bench_split.add(bench);
  bench_model_args.add(bench);
  bench->add_option("--seed", bench_opts.seed, "Master seed")->capture_default_str();
  bench->add_option("--jobs", bench_opts.jobs, "Cells trained in parallel")->capture_default_str();
  bench->add_option("--repeats", bench_opts.repeats, "Seeded runs per cell")->capture_default_str();
  bench->add_option("--models", bench_models, "Comma-separated subset of model families");
  bench->add_option("--out-dir", bench_out, "Output directory")->capture_default_str();
  add_config(bench);
  bench->callback([&] {
    const auto ds = bench_data.load();
    const auto split = temporal_split(ds, bench_split.boundary);
    const auto g = build_graph(ds);
    bench_opts.config = bench_model_args.resolve();
    if (!bench_models.empty()) {
      std::vector<std::string> keep;
      std::stringstream ss(bench_models);
      for (std::string tok; std::getline(ss, tok, ',');) {
        if (!is_known_family(tok)) throw ArgumentError("--models: unknown family '" + tok + "'");
        keep.push_back(tok);
      }
      std::erase_if(bench_opts.cells, [&](const BenchCell& c) {
        return std::find(keep.begin(), keep.end(), c.family) == keep.end();
      });
    }
    bench_opts.log = [](const std::string& line) { std::cerr << line << "\n"; };
    const auto res = run_bench(ds, split, g, bench_opts);
    fs::create_directories(bench_out);
    const fs::path out(bench_out);
    write_text(out / "results.csv", reports_csv(res.reports()));
    write_text(out / "tables.md", bench_markdown(res));
    write_text(out / "timings.csv", bench_timings_csv(res));
    std::cout << bench_markdown(res);
    if (!res.ok()) status = 1;
  });

  // export
  auto* exp = app.add_subcommand("export", "Write the ego subgraph of a transaction as DOT or GraphML");
  DataArgs exp_data;
  std::string exp_tx, exp_ann = "truth", exp_ckpt, exp_format, exp_out;
  int exp_depth = 2;
  bool exp_full = false;
  exp_data.add(exp);
  exp->add_option("--tx", exp_tx, "Transaction id at the centre")->required();
  exp->add_option("--depth", exp_depth, "Hops from the centre")->capture_default_str()->check(CLI::NonNegativeNumber);
  exp->add_option("--annotations", exp_ann, "truth or predicted")->check(CLI::IsMember({"truth", "predicted"}));
  exp->add_option("--checkpoint", exp_ckpt, "Model used for predicted annotations");
  exp->add_option("--format", exp_format, "dot or graphml (default: from --out extension)")
      ->check(CLI::IsMember({"dot", "graphml"}));
  exp->add_option("--out", exp_out, "File to write")->required();
  exp->add_flag("--full-graph", exp_full, "Use the unfiltered graph, unknown transactions included");
  add_config(exp);
  exp->callback([&] {
    std::string format = exp_format;
    if (format.empty()) format = fs::path(exp_out).extension() == ".graphml" ? "graphml" : "dot";
    NodeAnnotations ann;
    std::optional<TxGraph> g;
    if (exp_full) {
      if (exp_ann == "predicted") throw ArgumentError("predicted annotations need the preprocessed graph (drop --full-graph)");
      auto raw = exp_data.load_raw_tables();
      g.emplace(build_full_graph(raw));
      ann.names = std::move(raw.tx_ids);
      ann.labels = std::move(raw.labels);
      ann.time_steps = std::move(raw.time_steps);
    } else {
      const auto ds = exp_data.load();
      g.emplace(build_graph(ds));
      ann.names = ds.tx_ids;
      ann.labels = ds.y;
      ann.time_steps = ds.time_steps;
      if (exp_ann == "predicted") {
        if (exp_ckpt.empty()) throw ArgumentError("--annotations predicted needs --checkpoint");
        const auto loaded = load_model(exp_ckpt, &*g);
        ann.predictions = loaded.model->predict(feature_view(ds, loaded.mode));
      }
    }
    const auto it = std::find(ann.names.begin(), ann.names.end(), exp_tx);
    if (it == ann.names.end()) throw ArgumentError("unknown transaction '" + exp_tx + "'");
    const auto sub = ego_subgraph(*g, static_cast<std::size_t>(it - ann.names.begin()), exp_depth);
    if (format == "graphml") export_graphml(sub, ann, exp_out);
    else export_dot(sub, ann, exp_out);
    std::cout << "members=" << sub.members.size() << " edges=" << sub.edges.size() << " wrote " << exp_out << "\n";
  });

  // selftest
  auto* self = app.add_subcommand("selftest", "Gradient checks and oracle cross-checks on built-in fixtures");
  bool inject = false;
  self->add_flag("--inject-fault", inject, "Corrupt one analytic gradient (the check must then fail)");
  self->callback([&] {
    const auto checks = selftest::run({.inject_fault = inject});
    std::size_t failed = 0;
    for (const auto& c : checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
      failed += !c.pass;
    }
    std::cout << checks.size() - failed << "/" << checks.size() << " checks passed\n";
    if (failed > 0) status = 1;
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with a planted illicit pattern");
  SynthConfig sc;
  std::string synth_out;
  synth->add_option("--out-dir", synth_out, "Directory for the CSVs and manifest")->required();
  synth->add_option("--nodes", sc.n_nodes, "Transactions")->capture_default_str();
  synth->add_option("--steps", sc.n_steps, "Time steps")->capture_default_str();
  synth->add_option("--illicit-rate", sc.illicit_rate, "Share of illicit transactions")->capture_default_str();
  synth->add_option("--unknown-rate", sc.unknown_rate, "Share of the rest left unlabelled")->capture_default_str();
  synth->add_option("--local-features", sc.n_local, "Local feature columns")->capture_default_str();
  synth->add_option("--agg-features", sc.n_agg, "Aggregated feature columns")->capture_default_str();
  synth->add_option("--fan-in", sc.motif.fan_in, "In-edges planted on each illicit hub")->capture_default_str();
  synth->add_option("--feature-offset", sc.motif.feature_offset, "Shift of illicit signal columns")
      ->capture_default_str();
  synth->add_option("--seed", sc.seed, "Generator seed")->capture_default_str();
  add_config(synth);
  synth->callback([&] {
    const auto raw = synth_dataset(sc);
    const auto ds = preprocess(raw);
    fs::create_directories(synth_out);
    write_raw_csv(raw, RawPaths::in_dir(synth_out));
    const auto rc = count_labels(raw.labels);
    nlohmann::ordered_json m;
    m["seed"] = sc.seed;
    m["raw_nodes"] = raw.n_nodes();
    m["raw_edges"] = raw.edges.size();
    m["illicit"] = rc.illicit;
    m["licit"] = rc.licit;
    m["unknown"] = rc.unknown;
    m["nodes"] = ds.n_nodes();
    m["edges"] = ds.edges.size();
    m["local_features"] = raw.layout.n_local;
    m["agg_features"] = raw.layout.n_agg;
    m["time_steps"] = sc.n_steps;
    write_text(fs::path(synth_out) / "manifest.json", m.dump(2) + "\n");
    std::cout << "nodes=" << ds.n_nodes() << " edges=" << ds.edges.size() << " wrote " << synth_out << "\n";
  });

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return status;
}
