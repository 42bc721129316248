#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "amlgraph/baselines/classifier.hpp"
#include "amlgraph/checkpoint.hpp"
#include "amlgraph/dataset.hpp"
#include "amlgraph/metrics.hpp"
#include "amlgraph/nn.hpp"
#include "amlgraph/random.hpp"
#include "amlgraph/txgraph.hpp"

namespace amlgraph {

enum class GnnKind { Gcn, Gat };

inline const char* gnn_kind_name(GnnKind k) noexcept { return k == GnnKind::Gcn ? "gcn" : "gat"; }

inline GnnKind parse_gnn_kind(const std::string& s) {
  if (s == "gcn") return GnnKind::Gcn;
  if (s == "gat") return GnnKind::Gat;
  throw ArgumentError("unknown graph model '" + s + "' (expected gcn or gat)");
}

struct GnnConfig {
  GnnKind kind = GnnKind::Gcn;
  std::size_t hidden = 32;  // GCN width throughout
  std::size_t gat_input_units = 110;
  std::size_t heads = 5;
  std::size_t head_dim = 22;
  std::size_t gat_output_units = 330;
  std::optional<double> dropout;  // unset: 0 for GCN, 0.5 for GAT
  bool batch_norm = false;         // GCN feed-forward blocks only
  bool symmetrize = true;
  bool zero_init_logits = false;
  std::size_t epochs = 1000;
  std::size_t patience = 100;  // 0 disables early stopping
  nn::RmsPropConfig optimizer{};
  std::vector<double> class_weights = {0.3, 0.7};
  std::uint64_t seed = 0;

  double effective_dropout() const { return dropout.value_or(kind == GnnKind::Gcn ? 0.0 : 0.5); }
};

/// Message edges a model of the given configuration runs on. GAT adds a
/// self-loop per node.
inline MessageEdges gnn_edges(const TxGraph& g, const GnnConfig& cfg) {
  return message_edges(g, cfg.symmetrize, cfg.kind == GnnKind::Gat);
}

namespace nn {

/// [batch norm] → dropout → dense → ReLU.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool batch_norm = false,
              double dropout = 0.0)
      : dense_(name + "/dense", in, out, rng), drop_(dropout) {
    if (batch_norm) bn_ = BatchNorm(name + "/batch_norm", in);
  }

  Matrix forward(const Matrix& x, Mode mode, Rng& rng) {
    Matrix h = bn_ ? bn_->forward(x, mode) : x;
    return dense_.forward(drop_.forward(h, mode, rng));
  }

  Matrix apply(const Matrix& x) const { return dense_.apply(bn_ ? bn_->apply(x) : x); }

  Matrix backward(const Matrix& grad_out) {
    Matrix g = drop_.backward(dense_.backward(grad_out));
    return bn_ ? bn_->backward(g) : g;
  }

  DenseRelu& dense() noexcept { return dense_; }
  const DenseRelu& dense() const noexcept { return dense_; }
  BatchNorm* batch_norm() noexcept { return bn_ ? &*bn_ : nullptr; }
  const BatchNorm* batch_norm() const noexcept { return bn_ ? &*bn_ : nullptr; }

  ParamRefs params() {
    ParamRefs ps;
    if (bn_)
      for (auto* p : bn_->params()) ps.push_back(p);
    for (auto* p : dense_.params()) ps.push_back(p);
    return ps;
  }
  ConstParamRefs params() const {
    ConstParamRefs ps;
    if (bn_)
      for (const auto* p : bn_->params()) ps.push_back(p);
    for (const auto* p : dense_.params()) ps.push_back(p);
    return ps;
  }

 private:
  DenseRelu dense_;
  Dropout drop_;
  std::optional<BatchNorm> bn_;
};

/// Message FFN per node, sum of incoming messages per target, update FFN
/// on [state ‖ aggregate], plus the input as a skip connection.
class GraphConvLayer {
 public:
  GraphConvLayer() = default;
  GraphConvLayer(const std::string& name, std::size_t width, Rng& rng, bool batch_norm = false, double dropout = 0.0)
      : message_(name + "/message", width, width, rng, batch_norm, dropout),
        update_(name + "/update", 2 * width, width, rng, batch_norm, dropout) {}

  std::size_t width() const noexcept { return message_.dense().dense().in_features(); }

  Matrix forward(const Matrix& states, const MessageEdges& edges, Mode mode, Rng& rng) {
    check(states, edges);
    n_ = states.rows();
    edges_ = &edges;
    const Matrix msg = message_.forward(states, mode, rng);
    const Matrix agg = segment_sum(gather_rows(msg, edges.src), edges.dst, n_);
    Matrix out = update_.forward(hconcat(states, agg), mode, rng);
    out += states;
    return out;
  }

  Matrix apply(const Matrix& states, const MessageEdges& edges) const {
    check(states, edges);
    const Matrix msg = message_.apply(states);
    const Matrix agg = segment_sum(gather_rows(msg, edges.src), edges.dst, states.rows());
    Matrix out = update_.apply(hconcat(states, agg));
    out += states;
    return out;
  }

  Matrix backward(const Matrix& grad_out) {
    const std::size_t h = width();
    const Matrix d_cat = update_.backward(grad_out);
    Matrix d_states = grad_out;
    d_states += column_slice(d_cat, 0, h);
    const Matrix d_agg = column_slice(d_cat, h, 2 * h);
    const Matrix d_msg = segment_sum(gather_rows(d_agg, edges_->dst), edges_->src, n_);
    d_states += message_.backward(d_msg);
    return d_states;
  }

  FeedForward& message() noexcept { return message_; }
  FeedForward& update() noexcept { return update_; }
  const FeedForward& message() const noexcept { return message_; }
  const FeedForward& update() const noexcept { return update_; }

  ParamRefs params() {
    ParamRefs ps = message_.params();
    for (auto* p : update_.params()) ps.push_back(p);
    return ps;
  }
  ConstParamRefs params() const {
    ConstParamRefs ps = message_.params();
    for (const auto* p : update_.params()) ps.push_back(p);
    return ps;
  }

 private:
  void check(const Matrix& states, const MessageEdges& edges) const {
    require<ShapeError>(states.cols() == width(), "graph_conv: states have " + std::to_string(states.cols()) +
                                                      " columns, layer expects " + std::to_string(width()));
    for (std::size_t k = 0; k < edges.size(); ++k)
      if (edges.src[k] >= states.rows() || edges.dst[k] >= states.rows())
        throw ShapeError("graph_conv: edge endpoint outside the state matrix");
  }

  FeedForward message_;
  FeedForward update_;
  const MessageEdges* edges_ = nullptr;
  std::size_t n_ = 0;
};

/// One attention head: h = x·W, e = LeakyReLU(a_src·h_u + a_dst·h_v),
/// α = softmax of e over each target's incoming edges, out_v = Σ α·h_u.
class AttentionHead {
 public:
  static constexpr double kSlope = 0.2;

  AttentionHead() = default;
  AttentionHead(const std::string& name, std::size_t in, std::size_t head_dim, Rng& rng)
      : w_(name + "/kernel", glorot_uniform(in, head_dim, rng)),
        a_src_(name + "/attn_src", glorot_uniform(head_dim, 1, rng)),
        a_dst_(name + "/attn_dst", glorot_uniform(head_dim, 1, rng)) {}

  std::size_t in_features() const noexcept { return w_.value.rows(); }
  std::size_t head_dim() const noexcept { return w_.value.cols(); }

  Matrix forward(const Matrix& x, const MessageEdges& edges) {
    cache_ = compute(x, edges);
    edges_ = &edges;
    x_ = x;
    return cache_.out;
  }

  Matrix apply(const Matrix& x, const MessageEdges& edges) const { return compute(x, edges).out; }

  /// Attention weights per message edge from the last forward pass.
  const std::vector<double>& attention() const noexcept { return cache_.alpha; }

  /// Attention weights per message edge for the given input.
  std::vector<double> attention_for(const Matrix& x, const MessageEdges& edges) const {
    return compute(x, edges).alpha;
  }

  Matrix backward(const Matrix& grad_out) {
    const auto& ed = *edges_;
    const auto& h = cache_.h;
    const std::size_t n = h.rows(), d = h.cols(), m = ed.size();
    Matrix dh(n, d);
    std::vector<double> d_alpha(m);
    for (std::size_t k = 0; k < m; ++k) {
      auto go = grad_out.row(ed.dst[k]);
      auto hu = h.row(ed.src[k]);
      auto dhu = dh.row(ed.src[k]);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += go[j] * hu[j];
        dhu[j] += cache_.alpha[k] * go[j];
      }
      d_alpha[k] = s;
    }
    const auto dz = segment_softmax_backward(cache_.alpha, d_alpha, ed.dst, n);
    std::vector<double> ds_src(n, 0.0), ds_dst(n, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double de = dz[k] * (cache_.e[k] > 0.0 ? 1.0 : kSlope);
      ds_src[ed.src[k]] += de;
      ds_dst[ed.dst[k]] += de;
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto hi = h.row(i);
      auto dhi = dh.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        dhi[j] += ds_src[i] * a_src_.value(j, 0) + ds_dst[i] * a_dst_.value(j, 0);
        a_src_.grad(j, 0) += ds_src[i] * hi[j];
        a_dst_.grad(j, 0) += ds_dst[i] * hi[j];
      }
    }
    w_.grad += matmul_tn(x_, dh);
    return matmul_nt(dh, w_.value);
  }

  Param& kernel() noexcept { return w_; }
  Param& attn_src() noexcept { return a_src_; }
  Param& attn_dst() noexcept { return a_dst_; }
  const Param& kernel() const noexcept { return w_; }
  const Param& attn_src() const noexcept { return a_src_; }
  const Param& attn_dst() const noexcept { return a_dst_; }

  ParamRefs params() { return {&w_, &a_src_, &a_dst_}; }
  ConstParamRefs params() const { return {&w_, &a_src_, &a_dst_}; }

 private:
  struct Cache {
    Matrix h;
    std::vector<double> e;  // scores before LeakyReLU
    std::vector<double> alpha;
    Matrix out;
  };

  Cache compute(const Matrix& x, const MessageEdges& ed) const {
    require<ShapeError>(x.cols() == in_features(), "attention: states have " + std::to_string(x.cols()) +
                                                       " columns, kernel expects " + std::to_string(in_features()));
    const std::size_t n = x.rows(), m = ed.size();
    for (std::size_t k = 0; k < m; ++k)
      if (ed.src[k] >= n || ed.dst[k] >= n) throw ShapeError("attention: edge endpoint outside the state matrix");
    Cache c;
    c.h = matmul(x, w_.value);
    const Matrix s_src = matmul(c.h, a_src_.value), s_dst = matmul(c.h, a_dst_.value);
    c.e.resize(m);
    std::vector<double> z(m);
    for (std::size_t k = 0; k < m; ++k) {
      c.e[k] = s_src(ed.src[k], 0) + s_dst(ed.dst[k], 0);
      z[k] = c.e[k] > 0.0 ? c.e[k] : kSlope * c.e[k];
    }
    c.alpha = segment_softmax(z, ed.dst, n);
    Matrix weighted = gather_rows(c.h, ed.src);
    for (std::size_t k = 0; k < m; ++k)
      for (auto& v : weighted.row(k)) v *= c.alpha[k];
    c.out = segment_sum(weighted, ed.dst, n);
    return c;
  }

  Param w_, a_src_, a_dst_;
  Cache cache_;
  Matrix x_;
  const MessageEdges* edges_ = nullptr;
};

/// Independent heads, outputs concatenated in head order.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, std::size_t in, std::size_t heads, std::size_t head_dim, Rng& rng) {
    require(heads >= 1 && head_dim >= 1, "attention: need at least one head of positive width");
    for (std::size_t h = 0; h < heads; ++h) heads_.emplace_back(name + "/head_" + std::to_string(h), in, head_dim, rng);
  }

  std::size_t out_features() const noexcept { return heads_.size() * heads_.front().head_dim(); }

  Matrix forward(const Matrix& x, const MessageEdges& edges) {
    Matrix out = heads_.front().forward(x, edges);
    for (std::size_t h = 1; h < heads_.size(); ++h) out = hconcat(out, heads_[h].forward(x, edges));
    return out;
  }

  Matrix apply(const Matrix& x, const MessageEdges& edges) const {
    Matrix out = heads_.front().apply(x, edges);
    for (std::size_t h = 1; h < heads_.size(); ++h) out = hconcat(out, heads_[h].apply(x, edges));
    return out;
  }

  Matrix backward(const Matrix& grad_out) {
    const std::size_t d = heads_.front().head_dim();
    Matrix dx = heads_.front().backward(column_slice(grad_out, 0, d));
    for (std::size_t h = 1; h < heads_.size(); ++h) dx += heads_[h].backward(column_slice(grad_out, h * d, (h + 1) * d));
    return dx;
  }

  std::vector<AttentionHead>& heads() noexcept { return heads_; }
  const std::vector<AttentionHead>& heads() const noexcept { return heads_; }

  ParamRefs params() {
    ParamRefs ps;
    for (auto& h : heads_)
      for (auto* p : h.params()) ps.push_back(p);
    return ps;
  }
  ConstParamRefs params() const {
    ConstParamRefs ps;
    for (const auto& h : heads_)
      for (const auto* p : h.params()) ps.push_back(p);
    return ps;
  }

 private:
  std::vector<AttentionHead> heads_;
};

}  // namespace nn

/// Common interface of the two graph models. Forward passes take the
/// message edges explicitly; gnn_edges builds them from a graph.
class GnnModel {
 public:
  virtual ~GnnModel() = default;
  virtual GnnKind kind() const = 0;
  virtual std::size_t in_features() const = 0;
  virtual Matrix forward(const Matrix& x, const MessageEdges& edges, nn::Mode mode, Rng& rng) = 0;
  /// Eval-mode forward; leaves cached state alone.
  virtual Matrix apply(const Matrix& x, const MessageEdges& edges) const = 0;
  virtual void backward(const Matrix& grad_logits) = 0;
  virtual nn::ParamRefs params() = 0;
  virtual nn::ConstParamRefs params() const = 0;
  virtual std::unique_ptr<GnnModel> clone() const = 0;

  /// Trainable parameters plus any running statistics.
  virtual void save_state(Checkpoint& ck) const { ck.save_params(params()); }
  virtual void load_state(const Checkpoint& ck) { ck.load_params(params()); }
};

class GcnModel final : public GnnModel {
 public:
  GcnModel(std::size_t in, const GnnConfig& cfg, Rng& rng) {
    const std::size_t h = cfg.hidden;
    const double p = cfg.effective_dropout();
    pre_ = nn::FeedForward("gcn/preprocess", in, h, rng, cfg.batch_norm, p);
    conv1_ = nn::GraphConvLayer("gcn/conv1", h, rng, cfg.batch_norm, p);
    conv2_ = nn::GraphConvLayer("gcn/conv2", h, rng, cfg.batch_norm, p);
    post_ = nn::FeedForward("gcn/postprocess", h, h, rng, cfg.batch_norm, p);
    logits_ = nn::Dense("gcn/logits", h, 2, rng);
    if (cfg.zero_init_logits) {
      logits_.weight().value.fill(0.0);
      logits_.bias().value.fill(0.0);
    }
  }

  GnnKind kind() const override { return GnnKind::Gcn; }
  std::size_t in_features() const override { return pre_.dense().dense().in_features(); }

  Matrix forward(const Matrix& x, const MessageEdges& edges, nn::Mode mode, Rng& rng) override {
    check_input(x);
    Matrix h = pre_.forward(x, mode, rng);
    h = conv1_.forward(h, edges, mode, rng);
    h = conv2_.forward(h, edges, mode, rng);
    return logits_.forward(post_.forward(h, mode, rng));
  }

  Matrix apply(const Matrix& x, const MessageEdges& edges) const override {
    check_input(x);
    Matrix h = pre_.apply(x);
    h = conv1_.apply(h, edges);
    h = conv2_.apply(h, edges);
    return logits_.apply(post_.apply(h));
  }

  void backward(const Matrix& grad_logits) override {
    Matrix g = post_.backward(logits_.backward(grad_logits));
    g = conv2_.backward(g);
    g = conv1_.backward(g);
    pre_.backward(g);
  }

  nn::ParamRefs params() override {
    nn::ParamRefs ps;
    auto add = [&](nn::ParamRefs more) { ps.insert(ps.end(), more.begin(), more.end()); };
    add(pre_.params());
    add(conv1_.params());
    add(conv2_.params());
    add(post_.params());
    add(logits_.params());
    return ps;
  }

  nn::ConstParamRefs params() const override {
    nn::ConstParamRefs ps;
    auto add = [&](nn::ConstParamRefs more) { ps.insert(ps.end(), more.begin(), more.end()); };
    add(pre_.params());
    add(conv1_.params());
    add(conv2_.params());
    add(post_.params());
    add(logits_.params());
    return ps;
  }

  std::unique_ptr<GnnModel> clone() const override { return std::make_unique<GcnModel>(*this); }

  void save_state(Checkpoint& ck) const override {
    GnnModel::save_state(ck);
    for (const auto* bn : batch_norms()) {
      const auto base = bn->params().front()->name;
      const auto prefix = base.substr(0, base.rfind('/'));
      ck.put(prefix + "/running_mean", bn->running_mean());
      ck.put(prefix + "/running_var", bn->running_var());
    }
  }

  void load_state(const Checkpoint& ck) override {
    GnnModel::load_state(ck);
    for (auto* bn : batch_norms()) {
      const auto base = bn->params().front()->name;
      const auto prefix = base.substr(0, base.rfind('/'));
      bn->running_mean() = ck.get(prefix + "/running_mean");
      bn->running_var() = ck.get(prefix + "/running_var");
    }
  }

  /// Running statistics of the batch-norm layers; zero when disabled.
  std::size_t non_trainable_count() const {
    std::size_t n = 0;
    for (const auto* bn : batch_norms()) n += bn->non_trainable_count();
    return n;
  }

  nn::FeedForward& preprocess() noexcept { return pre_; }
  nn::GraphConvLayer& conv1() noexcept { return conv1_; }
  nn::GraphConvLayer& conv2() noexcept { return conv2_; }
  nn::FeedForward& postprocess() noexcept { return post_; }
  nn::Dense& logits() noexcept { return logits_; }
  const nn::FeedForward& preprocess() const noexcept { return pre_; }
  const nn::GraphConvLayer& conv1() const noexcept { return conv1_; }
  const nn::GraphConvLayer& conv2() const noexcept { return conv2_; }
  const nn::FeedForward& postprocess() const noexcept { return post_; }
  const nn::Dense& logits() const noexcept { return logits_; }

 private:
  void check_input(const Matrix& x) const {
    require<ShapeError>(x.cols() == in_features(), "gcn: input has " + std::to_string(x.cols()) +
                                                       " columns, model expects " + std::to_string(in_features()));
  }

  template <class Self>
  static auto batch_norms_of(Self& self) {
    using Ptr = decltype(self.pre_.batch_norm());
    std::vector<Ptr> out;
    for (Ptr p : {self.pre_.batch_norm(), self.conv1_.message().batch_norm(), self.conv1_.update().batch_norm(),
                  self.conv2_.message().batch_norm(), self.conv2_.update().batch_norm(), self.post_.batch_norm()})
      if (p) out.push_back(p);
    return out;
  }
  std::vector<nn::BatchNorm*> batch_norms() { return batch_norms_of(*this); }
  std::vector<const nn::BatchNorm*> batch_norms() const { return batch_norms_of(*this); }

  nn::FeedForward pre_;
  nn::GraphConvLayer conv1_, conv2_;
  nn::FeedForward post_;
  nn::Dense logits_;
};

class GatModel final : public GnnModel {
 public:
  GatModel(std::size_t in, const GnnConfig& cfg, Rng& rng)
      : input_("gat/input", in, cfg.gat_input_units, rng),
        drop1_(cfg.effective_dropout()),
        attention_("gat/attention", cfg.gat_input_units, cfg.heads, cfg.head_dim, rng),
        hidden_("gat/hidden", cfg.heads * cfg.head_dim, cfg.gat_output_units, rng),
        drop2_(cfg.effective_dropout()),
        logits_("gat/logits", cfg.gat_output_units, 2, rng) {
    if (cfg.zero_init_logits) {
      logits_.weight().value.fill(0.0);
      logits_.bias().value.fill(0.0);
    }
  }

  GnnKind kind() const override { return GnnKind::Gat; }
  std::size_t in_features() const override { return input_.dense().in_features(); }

  Matrix forward(const Matrix& x, const MessageEdges& edges, nn::Mode mode, Rng& rng) override {
    check_input(x);
    Matrix h = drop1_.forward(input_.forward(x), mode, rng);
    h = attention_.forward(h, edges);
    h = drop2_.forward(hidden_.forward(h), mode, rng);
    return logits_.forward(h);
  }

  Matrix apply(const Matrix& x, const MessageEdges& edges) const override {
    check_input(x);
    return logits_.apply(hidden_.apply(attention_.apply(input_.apply(x), edges)));
  }

  void backward(const Matrix& grad_logits) override {
    Matrix g = hidden_.backward(drop2_.backward(logits_.backward(grad_logits)));
    g = attention_.backward(g);
    input_.backward(drop1_.backward(g));
  }

  nn::ParamRefs params() override {
    nn::ParamRefs ps = input_.params();
    for (auto* p : attention_.params()) ps.push_back(p);
    for (auto* p : hidden_.params()) ps.push_back(p);
    for (auto* p : logits_.params()) ps.push_back(p);
    return ps;
  }

  nn::ConstParamRefs params() const override {
    nn::ConstParamRefs ps = input_.params();
    for (const auto* p : attention_.params()) ps.push_back(p);
    for (const auto* p : hidden_.params()) ps.push_back(p);
    for (const auto* p : logits_.params()) ps.push_back(p);
    return ps;
  }

  std::unique_ptr<GnnModel> clone() const override { return std::make_unique<GatModel>(*this); }

  nn::DenseRelu& input() noexcept { return input_; }
  nn::MultiHeadAttention& attention() noexcept { return attention_; }
  nn::DenseRelu& hidden() noexcept { return hidden_; }
  nn::Dense& logits() noexcept { return logits_; }
  const nn::DenseRelu& input() const noexcept { return input_; }
  const nn::MultiHeadAttention& attention() const noexcept { return attention_; }
  const nn::DenseRelu& hidden() const noexcept { return hidden_; }
  const nn::Dense& logits() const noexcept { return logits_; }

 private:
  void check_input(const Matrix& x) const {
    require<ShapeError>(x.cols() == in_features(), "gat: input has " + std::to_string(x.cols()) +
                                                       " columns, model expects " + std::to_string(in_features()));
  }

  nn::DenseRelu input_;
  nn::Dropout drop1_;
  nn::MultiHeadAttention attention_;
  nn::DenseRelu hidden_;
  nn::Dropout drop2_;
  nn::Dense logits_;
};

inline std::unique_ptr<GnnModel> make_gnn(std::size_t in, const GnnConfig& cfg, Rng& rng) {
  if (cfg.kind == GnnKind::Gcn) return std::make_unique<GcnModel>(in, cfg, rng);
  return std::make_unique<GatModel>(in, cfg, rng);
}

inline Matrix graph_conv(nn::GraphConvLayer& layer, const Matrix& states, const TxGraph& g, bool symmetrize = true) {
  require<ShapeError>(states.rows() == g.n_nodes(), "graph_conv: one state row per node");
  return layer.apply(states, message_edges(g, symmetrize, false));
}

inline Matrix attention_forward(const nn::AttentionHead& head, const Matrix& states, const TxGraph& g,
                                bool symmetrize = true) {
  require<ShapeError>(states.rows() == g.n_nodes(), "attention: one state row per node");
  return head.apply(states, message_edges(g, symmetrize, true));
}

inline Matrix gcn_forward(GcnModel& model, const TxGraph& g, const Matrix& x, nn::Mode mode, Rng& rng,
                          bool symmetrize = true) {
  require<ShapeError>(x.rows() == g.n_nodes(), "gcn: one feature row per node");
  const auto edges = message_edges(g, symmetrize, false);
  if (mode == nn::Mode::Eval) return model.apply(x, edges);
  return model.forward(x, edges, mode, rng);
}

inline Matrix gat_forward(GatModel& model, const TxGraph& g, const Matrix& x, nn::Mode mode, Rng& rng,
                          bool symmetrize = true) {
  require<ShapeError>(x.rows() == g.n_nodes(), "gat: one feature row per node");
  const auto edges = message_edges(g, symmetrize, true);
  if (mode == nn::Mode::Eval) return model.apply(x, edges);
  return model.forward(x, edges, mode, rng);
}

/// A trained graph model bound to the graph it was trained on. Inputs to
/// predict are feature matrices with one row per node of that graph.
class GnnClassifier final : public Classifier {
 public:
  GnnClassifier(GnnConfig cfg, Standardizer scaler, std::unique_ptr<GnnModel> model, MessageEdges edges,
                std::size_t n_nodes)
      : cfg_(std::move(cfg)),
        scaler_(std::move(scaler)),
        model_(std::move(model)),
        edges_(std::move(edges)),
        n_nodes_(n_nodes) {}

  std::string family() const override { return gnn_kind_name(cfg_.kind); }

  Matrix logits(const Matrix& x) const {
    require<ShapeError>(x.rows() == n_nodes_, family() + ": expected one row per graph node (" +
                                                  std::to_string(n_nodes_) + "), got " + std::to_string(x.rows()));
    return model_->apply(scaler_.transform(x), edges_);
  }

  std::vector<double> predict_score(const Matrix& x) const override {
    const Matrix p = nn::softmax_rows(logits(x));
    std::vector<double> s(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) s[i] = p(i, 1);
    return s;
  }

  void save(Checkpoint& ck) const override {
    const std::string k = family();
    ck.put_scalar(k + "/in_features", static_cast<double>(model_->in_features()));
    ck.put_scalar(k + "/n_nodes", static_cast<double>(n_nodes_));
    ck.put_vector(k + "/shape", {static_cast<double>(cfg_.hidden), static_cast<double>(cfg_.gat_input_units),
                                 static_cast<double>(cfg_.heads), static_cast<double>(cfg_.head_dim),
                                 static_cast<double>(cfg_.gat_output_units)});
    ck.put_vector(k + "/flags", {cfg_.batch_norm ? 1.0 : 0.0, cfg_.symmetrize ? 1.0 : 0.0});
    scaler_.save(ck, k + "/scaler");
    model_->save_state(ck);
  }

  /// Rebuilds a saved model of the given kind on the graph `g`.
  static std::unique_ptr<GnnClassifier> load(const Checkpoint& ck, GnnKind kind, const TxGraph& g) {
    const std::string k = gnn_kind_name(kind);
    GnnConfig cfg;
    cfg.kind = kind;
    const auto& shape = ck.get(k + "/shape").values();
    const auto& flags = ck.get(k + "/flags").values();
    if (shape.size() != 5 || flags.size() != 2) throw IoError("checkpoint: malformed " + k + " header");
    cfg.hidden = static_cast<std::size_t>(shape[0]);
    cfg.gat_input_units = static_cast<std::size_t>(shape[1]);
    cfg.heads = static_cast<std::size_t>(shape[2]);
    cfg.head_dim = static_cast<std::size_t>(shape[3]);
    cfg.gat_output_units = static_cast<std::size_t>(shape[4]);
    cfg.batch_norm = flags[0] != 0.0;
    cfg.symmetrize = flags[1] != 0.0;
    const auto n = static_cast<std::size_t>(ck.get_scalar(k + "/n_nodes"));
    if (n != g.n_nodes())
      throw IoError("checkpoint: " + k + " model was trained on " + std::to_string(n) + " nodes, graph has " +
                    std::to_string(g.n_nodes()));
    Rng rng(0);
    auto model = make_gnn(static_cast<std::size_t>(ck.get_scalar(k + "/in_features")), cfg, rng);
    model->load_state(ck);
    auto edges = gnn_edges(g, cfg);
    return std::make_unique<GnnClassifier>(cfg, Standardizer::load(ck, k + "/scaler"), std::move(model),
                                           std::move(edges), n);
  }

  const GnnModel& model() const noexcept { return *model_; }
  const GnnConfig& config() const noexcept { return cfg_; }

 private:
  GnnConfig cfg_;
  Standardizer scaler_;
  std::unique_ptr<GnnModel> model_;
  MessageEdges edges_;
  std::size_t n_nodes_;
};

struct GnnEpoch {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_f1 = 0.0;
  double test_f1 = 0.0;
};

struct GnnTrainResult {
  std::unique_ptr<GnnClassifier> model;
  std::vector<GnnEpoch> history;
  std::size_t best_epoch = 0;  // epoch whose parameters were kept
  bool stopped_early = false;
};

namespace detail {
inline double illicit_f1(const Matrix& logits, std::span<const Label> y, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  std::vector<Label> pred, truth;
  pred.reserve(rows.size());
  truth.reserve(rows.size());
  for (auto i : rows) {
    pred.push_back(logits(i, 1) > logits(i, 0) ? Label::Illicit : Label::Licit);
    truth.push_back(y[i]);
  }
  const auto cm = confusion(pred, truth, Label::Illicit);
  return f1(precision(cm), recall(cm));
}
}  // namespace detail

/// Full-batch training on every node; the loss covers train rows only.
/// Keeps the parameters of the epoch with the best test-split illicit F1
/// and stops after `patience` epochs without improvement. With an empty test
/// split the final parameters are kept.
inline GnnTrainResult train_gnn(const Matrix& x, std::span<const Label> y, const TxGraph& g, const Split& split,
                                const GnnConfig& cfg) {
  const std::size_t n = g.n_nodes();
  require<ShapeError>(x.rows() == n && y.size() == n, "train_gnn: features and labels need one row per node");
  require(!split.train.empty(), "train_gnn: empty training split");
  for (auto i : split.train) require(i < n, "train_gnn: split index out of range");
  for (auto i : split.test) require(i < n, "train_gnn: split index out of range");
  require(cfg.epochs >= 1, "train_gnn: epochs must be positive");
  const auto targets = binary_targets(y);

  Matrix train_x(split.train.size(), x.cols());
  for (std::size_t r = 0; r < split.train.size(); ++r) {
    auto src = x.row(split.train[r]);
    std::copy(src.begin(), src.end(), train_x.row(r).begin());
  }
  auto scaler = Standardizer::fit(train_x);
  const Matrix z = scaler.transform(x);

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng drop_rng(derive_seed(cfg.seed, "dropout"));
  auto model = make_gnn(x.cols(), cfg, init_rng);
  auto edges = gnn_edges(g, cfg);
  auto params = model->params();
  nn::RmsProp opt(cfg.optimizer);

  GnnTrainResult res;
  std::unique_ptr<GnnModel> best;
  double best_f1 = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    nn::zero_grads(params);
    const Matrix logits = model->forward(z, edges, nn::Mode::Train, drop_rng);
    nn::LossAndGrad lg;
    try {
      lg = nn::softmax_xent(logits, targets, cfg.class_weights, split.train);
    } catch (const TrainingError&) {
      throw TrainingError(std::string(gnn_kind_name(cfg.kind)) + ": non-finite loss at epoch " +
                          std::to_string(epoch));
    }
    model->backward(lg.grad);
    opt.step(params);

    const Matrix eval = model->apply(z, edges);
    GnnEpoch row{epoch, lg.loss, detail::illicit_f1(eval, y, split.train), detail::illicit_f1(eval, y, split.test)};
    res.history.push_back(row);
    if (split.test.empty()) {
      res.best_epoch = epoch;
      continue;
    }
    if (row.test_f1 > best_f1) {
      best_f1 = row.test_f1;
      res.best_epoch = epoch;
      best = model->clone();
    } else if (cfg.patience > 0 && epoch - res.best_epoch >= cfg.patience) {
      res.stopped_early = true;
      break;
    }
  }
  if (!best) best = std::move(model);
  res.model = std::make_unique<GnnClassifier>(cfg, std::move(scaler), std::move(best), std::move(edges), n);
  return res;
}

inline GnnTrainResult train_gnn(GnnKind kind, const PreprocessedDataset& ds, const TxGraph& g, const Split& split,
                                GnnConfig cfg = {}) {
  cfg.kind = kind;
  return train_gnn(feature_view(ds, FeatureMode::Tx), ds.y, g, split, cfg);
}

inline std::string history_csv(std::span<const GnnEpoch> history) {
  std::string out = "epoch,loss,train_f1,test_f1\n";
  for (const auto& h : history)
    out += std::to_string(h.epoch) + "," + detail::full_precision(h.loss) + "," + detail::full_precision(h.train_f1) +
           "," + detail::full_precision(h.test_f1) + "\n";
  return out;
}

}  // namespace amlgraph
