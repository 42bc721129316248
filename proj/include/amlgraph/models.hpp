#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amlgraph/baselines/adaboost.hpp"
#include "amlgraph/baselines/forest.hpp"
#include "amlgraph/baselines/knn.hpp"
#include "amlgraph/baselines/linear.hpp"
#include "amlgraph/baselines/mlp.hpp"
#include "amlgraph/baselines/tree.hpp"
#include "amlgraph/gnn.hpp"
#include "amlgraph/metrics.hpp"

namespace amlgraph {

/// Model families in results-table order.
inline const std::vector<std::string>& baseline_families() {
  static const std::vector<std::string> f = {"random_forest", "logreg", "mlp",     "knn",
                                             "svc",           "decision_tree", "adaboost"};
  return f;
}

inline const std::vector<std::string>& graph_families() {
  static const std::vector<std::string> f = {"gcn", "gat"};
  return f;
}

inline bool is_graph_family(const std::string& family) { return family == "gcn" || family == "gat"; }

inline bool is_known_family(const std::string& family) {
  for (const auto& f : baseline_families())
    if (f == family) return true;
  return is_graph_family(family);
}

inline std::string display_name(const std::string& family) {
  if (family == "random_forest") return "Random Forest Classifier";
  if (family == "logreg") return "Logistic Regression";
  if (family == "mlp") return "MLP";
  if (family == "knn") return "k-NN Classifier";
  if (family == "svc") return "SVC";
  if (family == "decision_tree") return "Decision Tree Classifier";
  if (family == "adaboost") return "AdaBoost Classifier";
  if (family == "gcn") return "GCN";
  if (family == "gat") return "GAT";
  return family;
}

inline std::string display_features(const std::string& mode) { return mode == "tx_agg" ? "tx + agg" : mode; }

/// Table row label such as "Random Forest Classifier (tx + agg)".
inline std::string display_row(const EvalReport& r) {
  return display_name(r.meta.model) + " (" + display_features(r.meta.features) + ")";
}

/// Hyperparameters of every family. The per-family seeds are overwritten by
/// the derived seed of the run; `class_weights`, when set, replaces the
/// weights of every loss-based family.
struct ModelConfig {
  TreeConfig tree;
  ForestConfig forest;
  AdaBoostConfig adaboost;
  LogRegConfig logreg;
  SvcConfig svc;
  KnnConfig knn;
  MlpConfig mlp;
  GnnConfig gnn;
  std::optional<std::array<double, 2>> class_weights;
};

/// Seed used for one (family, feature mode) cell under a master seed.
inline std::uint64_t cell_seed(std::uint64_t master, const std::string& family, FeatureMode mode) {
  return derive_seed(master, family + ":" + feature_mode_name(mode));
}

struct TrainedModel {
  std::unique_ptr<Classifier> model;
  std::string family;
  FeatureMode mode = FeatureMode::Tx;
  std::vector<GnnEpoch> history;   // graph models
  std::vector<double> loss_curve;  // mlp
};

/// Trains `family` on the train split. Graph families need `g`, built
/// from the same dataset.
inline TrainedModel train_model(const std::string& family, const PreprocessedDataset& ds, FeatureMode mode,
                                const Split& split, const TxGraph* g, ModelConfig cfg, std::uint64_t master_seed) {
  require(is_known_family(family), "unknown model family '" + family + "'");
  const std::uint64_t seed = cell_seed(master_seed, family, mode);
  if (cfg.class_weights) {
    const std::vector<double> cw(cfg.class_weights->begin(), cfg.class_weights->end());
    cfg.logreg.class_weights = cw;
    cfg.svc.class_weights = cw;
    cfg.mlp.class_weights = cw;
    cfg.gnn.class_weights = cw;
  }
  const Matrix x = feature_view(ds, mode);
  TrainedModel out;
  out.family = family;
  out.mode = mode;
  if (is_graph_family(family)) {
    require(g != nullptr && g->n_nodes() == ds.n_nodes(), family + ": needs the dataset's transaction graph");
    cfg.gnn.kind = parse_gnn_kind(family);
    cfg.gnn.seed = seed;
    auto res = train_gnn(x, ds.y, *g, split, cfg.gnn);
    out.model = std::move(res.model);
    out.history = std::move(res.history);
    return out;
  }
  require(!split.train.empty(), family + ": empty training split");
  const Matrix xt = select_rows(x, split.train);
  std::vector<Label> yt;
  yt.reserve(split.train.size());
  for (auto i : split.train) yt.push_back(ds.y[i]);
  if (family == "decision_tree") {
    out.model = train_decision_tree(xt, yt, cfg.tree);
  } else if (family == "random_forest") {
    cfg.forest.seed = seed;
    out.model = train_random_forest(xt, yt, cfg.forest);
  } else if (family == "adaboost") {
    out.model = train_adaboost(xt, yt, cfg.adaboost);
  } else if (family == "logreg") {
    out.model = train_logreg(xt, yt, cfg.logreg);
  } else if (family == "svc") {
    out.model = train_linear_svc(xt, yt, cfg.svc);
  } else if (family == "knn") {
    out.model = train_knn(xt, yt, cfg.knn);
  } else {
    cfg.mlp.seed = seed;
    auto m = train_mlp(xt, yt, cfg.mlp);
    out.loss_curve = m->loss_curve();
    out.model = std::move(m);
  }
  return out;
}

/// Predictions for the given node rows. Graph models predict on the whole
/// graph and are then restricted to `rows`.
inline std::vector<Label> predict_rows(const Classifier& model, const PreprocessedDataset& ds, FeatureMode mode,
                                       std::span<const std::size_t> rows) {
  const Matrix x = feature_view(ds, mode);
  if (dynamic_cast<const GnnClassifier*>(&model) != nullptr) {
    const auto all = model.predict(x);
    std::vector<Label> out;
    out.reserve(rows.size());
    for (auto i : rows) out.push_back(all[i]);
    return out;
  }
  return model.predict(select_rows(x, rows));
}

inline EvalReport evaluate_model(const Classifier& model, const PreprocessedDataset& ds, FeatureMode mode,
                                 std::span<const std::size_t> rows, std::uint64_t seed) {
  const auto pred = predict_rows(model, ds, mode, rows);
  std::vector<Label> truth;
  truth.reserve(rows.size());
  for (auto i : rows) truth.push_back(ds.y[i]);
  return full_report(pred, truth, {model.family(), feature_mode_name(mode), seed});
}

/// Writes a checkpoint tagged with the family and feature mode.
inline void save_model(const Classifier& model, FeatureMode mode, const std::filesystem::path& path) {
  Checkpoint ck;
  ck.put_scalar("meta/family/" + model.family(), 1.0);
  ck.put_scalar(std::string("meta/features/") + feature_mode_name(mode), 1.0);
  model.save(ck);
  ck.save(path);
}

struct LoadedModel {
  std::unique_ptr<Classifier> model;
  std::string family;
  FeatureMode mode = FeatureMode::Tx;
};

/// Reads a checkpoint written by save_model. Graph models are rebound to
/// `g`, which must be the graph they were trained on.
inline LoadedModel load_model(const std::filesystem::path& path, const TxGraph* g = nullptr) {
  const auto ck = Checkpoint::load(path);
  LoadedModel out;
  bool have_mode = false;
  for (const auto& [name, m] : ck.entries()) {
    if (name.starts_with("meta/family/")) out.family = name.substr(12);
    if (name.starts_with("meta/features/")) {
      out.mode = parse_feature_mode(name.substr(14));
      have_mode = true;
    }
  }
  if (out.family.empty() || !have_mode) throw IoError(path.string() + ": not a model checkpoint");
  const auto& f = out.family;
  if (f == "decision_tree") out.model = DecisionTreeClassifier::load(ck);
  else if (f == "random_forest") out.model = RandomForestClassifier::load(ck);
  else if (f == "adaboost") out.model = AdaBoostClassifier::load(ck);
  else if (f == "logreg") out.model = LogisticRegressionClassifier::load(ck);
  else if (f == "svc") out.model = LinearSvcClassifier::load(ck);
  else if (f == "knn") out.model = KnnClassifier::load(ck);
  else if (f == "mlp") out.model = MlpClassifier::load(ck);
  else if (is_graph_family(f)) {
    if (g == nullptr) throw ArgumentError(f + " checkpoint needs the transaction graph");
    out.model = GnnClassifier::load(ck, parse_gnn_kind(f), *g);
  } else {
    throw IoError(path.string() + ": unknown model family '" + f + "'");
  }
  return out;
}

}  // namespace amlgraph
