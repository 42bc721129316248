#pragma once

#include <memory>
#include <vector>

#include "amlgraph/baselines/classifier.hpp"
#include "amlgraph/nn.hpp"

namespace amlgraph {

struct MlpConfig {
  std::vector<std::size_t> hidden = {64, 32};
  std::size_t epochs = 300;
  nn::RmsPropConfig optimizer{.lr = 5e-3, .rho = 0.9, .momentum = 0.9, .eps = 1e-8};
  std::vector<double> class_weights = {0.3, 0.7};
  std::uint64_t seed = 0;
  bool zero_init_head = false;
};

/// Feed-forward network: hidden Dense+ReLU layers, then a two-way softmax.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  MlpNetwork(std::size_t in, const std::vector<std::size_t>& hidden, Rng& rng) {
    std::size_t width = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      layers_.emplace_back("mlp/hidden_" + std::to_string(i), width, hidden[i], rng);
      width = hidden[i];
    }
    head_ = nn::Dense("mlp/logits", width, 2, rng);
  }

  Matrix forward(const Matrix& x) {
    Matrix h = x;
    for (auto& l : layers_) h = l.forward(h);
    return head_.forward(h);
  }

  Matrix apply(const Matrix& x) const {
    Matrix h = x;
    for (const auto& l : layers_) h = l.apply(h);
    return head_.apply(h);
  }

  void backward(const Matrix& grad_logits) {
    Matrix g = head_.backward(grad_logits);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
  }

  nn::ParamRefs params() {
    nn::ParamRefs ps;
    for (auto& l : layers_)
      for (auto* p : l.params()) ps.push_back(p);
    for (auto* p : head_.params()) ps.push_back(p);
    return ps;
  }

  nn::ConstParamRefs params() const {
    nn::ConstParamRefs ps;
    for (const auto& l : layers_)
      for (const auto* p : l.params()) ps.push_back(p);
    for (const auto* p : head_.params()) ps.push_back(p);
    return ps;
  }

  nn::Dense& head() noexcept { return head_; }
  std::size_t in_features() const noexcept {
    return layers_.empty() ? head_.in_features() : layers_.front().dense().in_features();
  }
  const std::vector<nn::DenseRelu>& layers() const noexcept { return layers_; }

 private:
  std::vector<nn::DenseRelu> layers_;
  nn::Dense head_;
};

class MlpClassifier final : public Classifier {
 public:
  MlpClassifier(Standardizer scaler, MlpNetwork net, std::vector<std::size_t> hidden, std::vector<double> loss_curve)
      : scaler_(std::move(scaler)), net_(std::move(net)), hidden_(std::move(hidden)), loss_curve_(std::move(loss_curve)) {}

  std::string family() const override { return "mlp"; }

  /// Softmax probability of the illicit class.
  std::vector<double> predict_score(const Matrix& x) const override {
    const Matrix p = nn::softmax_rows(net_.apply(scaler_.transform(x)));
    std::vector<double> s(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) s[i] = p(i, 1);
    return s;
  }

  void save(Checkpoint& ck) const override {
    scaler_.save(ck, "mlp/scaler");
    std::vector<double> h(hidden_.begin(), hidden_.end());
    ck.put_vector("mlp/hidden_sizes", h);
    ck.put_scalar("mlp/in_features", static_cast<double>(net_.in_features()));
    ck.save_params(net_.params());
  }

  static std::unique_ptr<MlpClassifier> load(const Checkpoint& ck) {
    const auto& hv = ck.get("mlp/hidden_sizes").values();
    std::vector<std::size_t> hidden(hv.begin(), hv.end());
    Rng rng(0);
    MlpNetwork net(static_cast<std::size_t>(ck.get_scalar("mlp/in_features")), hidden, rng);
    ck.load_params(net.params());
    return std::make_unique<MlpClassifier>(Standardizer::load(ck, "mlp/scaler"), std::move(net), std::move(hidden),
                                           std::vector<double>{});
  }

  /// Training loss per epoch.
  const std::vector<double>& loss_curve() const noexcept { return loss_curve_; }

 private:
  Standardizer scaler_;
  MlpNetwork net_;
  std::vector<std::size_t> hidden_;
  std::vector<double> loss_curve_;
};

/// Full-batch training with class-weighted cross-entropy and RMSprop.
inline std::unique_ptr<MlpClassifier> train_mlp(const Matrix& x, std::span<const Label> y, const MlpConfig& cfg = {}) {
  require(x.rows() > 0, "mlp: empty input");
  require<ShapeError>(y.size() == x.rows(), "mlp: label count does not match rows");
  const auto t = binary_targets(y);
  auto scaler = Standardizer::fit(x);
  const Matrix z = scaler.transform(x);
  Rng rng(cfg.seed);
  MlpNetwork net(z.cols(), cfg.hidden, rng);
  if (cfg.zero_init_head) {
    net.head().weight().value.fill(0.0);
    net.head().bias().value.fill(0.0);
  }
  nn::RmsProp opt(cfg.optimizer);
  auto params = net.params();
  std::vector<double> curve;
  curve.reserve(cfg.epochs);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    nn::zero_grads(params);
    const Matrix logits = net.forward(z);
    const auto lg = nn::softmax_xent(logits, t, cfg.class_weights);
    if (!std::isfinite(lg.loss)) throw TrainingError("mlp: non-finite loss at epoch " + std::to_string(e));
    curve.push_back(lg.loss);
    net.backward(lg.grad);
    opt.step(params);
  }
  return std::make_unique<MlpClassifier>(std::move(scaler), std::move(net), cfg.hidden, std::move(curve));
}

}  // namespace amlgraph
