#include "sthg/hetgnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sthg/metrics.hpp"
#include "sthg/rng.hpp"

namespace sthg {

const char* to_string(Aggregation a) { return a == Aggregation::Mean ? "MEAN" : "MAX"; }

Aggregation aggregation_from_string(const std::string& s) {
  if (s == "MEAN") return Aggregation::Mean;
  if (s == "MAX") return Aggregation::Max;
  throw std::invalid_argument("unknown aggregation '" + s + "' (expected MEAN or MAX)");
}

void ModelConfig::validate() const {
  if (d_av <= 0 || d_a <= 0 || d_h <= 0)
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  const bool has_mean = std::any_of(agg_schedule.begin(), agg_schedule.end(),
                                    [](Aggregation a) { return a == Aggregation::Mean; });
  const bool has_max = std::any_of(agg_schedule.begin(), agg_schedule.end(),
                                   [](Aggregation a) { return a == Aggregation::Max; });
  if (!has_mean || !has_max)
    throw std::invalid_argument("ModelConfig: agg_schedule must use both MEAN and MAX");
  if (!(learning_rate >= 0) || !(l2_weight >= 0) || epochs < 0)
    throw std::invalid_argument("ModelConfig: negative learning_rate, l2_weight or epochs");
}

namespace {

Matrix glorot(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-s, s);
  return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  ModelParams p;
  p.p_vis = glorot(rng, cfg.d_h, cfg.d_av);
  p.b_vis = Vector::Zero(cfg.d_h);
  p.p_cw = glorot(rng, cfg.d_h, cfg.d_a);
  p.b_cw = Vector::Zero(cfg.d_h);
  for (auto& layer : p.layers) {
    layer.w_self = glorot(rng, cfg.d_h, cfg.d_h);
    layer.w_vv = glorot(rng, cfg.d_h, cfg.d_h);
    layer.w_vw = glorot(rng, cfg.d_h, cfg.d_h);
    layer.w_ww = glorot(rng, cfg.d_h, cfg.d_h);
    layer.bias = Vector::Zero(cfg.d_h);
  }
  p.w_out = glorot(rng, cfg.d_h, 1);
  p.b_out = 0.0;
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  visit_params(z, [](const char*, auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Scalar>)
      t = 0.0;
    else
      t.setZero();
  });
  return z;
}

Scalar squared_norm(const ModelParams& p) {
  Scalar total = 0;
  visit_params(p, [&total](const char*, const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Scalar>)
      total += t * t;
    else
      total += t.squaredNorm();
  });
  return total;
}

namespace {

/// Symmetric adjacency per edge type, from canonical edge storage.
struct Adjacency {
  std::array<std::vector<std::vector<int>>, kNumEdgeTypes> neighbors;

  explicit Adjacency(const HeteroGraph& g) {
    for (auto& per_type : neighbors) per_type.assign(g.nodes.size(), {});
    for (const auto& e : g.edges) {
      auto& per_type = neighbors[static_cast<int>(e.type)];
      per_type[e.src].push_back(e.dst);
      per_type[e.dst].push_back(e.src);
    }
  }
};

const Matrix& layer_weight(const LayerParams& layer, int type) {
  switch (type) {
    case 0: return layer.w_vv;
    case 1: return layer.w_vw;
    default: return layer.w_ww;
  }
}

Matrix& layer_weight(LayerParams& layer, int type) {
  switch (type) {
    case 0: return layer.w_vv;
    case 1: return layer.w_vw;
    default: return layer.w_ww;
  }
}

struct ForwardTrace {
  Matrix z0, h0;                             // d_h x n
  std::array<Matrix, kNumLayers> z, h;       // d_h x n
  // Per layer and edge type: arg-max neighbor per (coordinate, node); -1 when
  // the neighbor set is empty. Only filled for Max layers.
  std::array<std::array<IndexMatrix, kNumEdgeTypes>, kNumLayers> argmax;
  Vector logits;
};

void check_inputs(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg) {
  if (p.p_vis.rows() != cfg.d_h || p.p_vis.cols() != cfg.d_av || p.p_cw.rows() != cfg.d_h ||
      p.p_cw.cols() != cfg.d_a || p.w_out.size() != cfg.d_h)
    throw std::invalid_argument("forward: params do not match config shapes");
  for (const auto& node : g.nodes) {
    const Eigen::Index want = node.type == NodeType::Visible ? cfg.d_av : cfg.d_a;
    if (node.feature.size() != want)
      throw std::invalid_argument("forward: node feature dim " + std::to_string(node.feature.size()) +
                                  " does not match config dim " + std::to_string(want));
    if (!node.feature.allFinite()) throw std::invalid_argument("forward: non-finite node feature");
  }
}

ForwardTrace run_forward(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg,
                         const Adjacency& adj) {
  check_inputs(g, p, cfg);
  const int n = static_cast<int>(g.nodes.size());
  ForwardTrace t;
  t.z0.resize(cfg.d_h, n);
  for (int i = 0; i < n; ++i) {
    const auto& node = g.nodes[i];
    if (node.type == NodeType::Visible)
      t.z0.col(i) = p.p_vis * node.feature + p.b_vis;
    else
      t.z0.col(i) = p.p_cw * node.feature + p.b_cw;
  }
  t.h0 = t.z0.cwiseMax(0.0);

  const Matrix* prev = &t.h0;
  for (int l = 0; l < kNumLayers; ++l) {
    const LayerParams& layer = p.layers[l];
    Matrix z = layer.w_self * (*prev);
    z.colwise() += layer.bias;
    for (int k = 0; k < kNumEdgeTypes; ++k) {
      const Matrix transformed = layer_weight(layer, k) * (*prev);  // d_h x n
      const auto& neigh = adj.neighbors[k];
      if (cfg.agg_schedule[l] == Aggregation::Max)
        t.argmax[l][k] = IndexMatrix::Constant(cfg.d_h, n, -1);
      for (int i = 0; i < n; ++i) {
        const auto& js = neigh[i];
        if (js.empty()) continue;
        if (cfg.agg_schedule[l] == Aggregation::Mean) {
          Vector acc = Vector::Zero(cfg.d_h);
          for (int j : js) acc += transformed.col(j);
          z.col(i) += acc / static_cast<Scalar>(js.size());
        } else {
          Vector best = Vector::Constant(cfg.d_h, -std::numeric_limits<Scalar>::infinity());
          Eigen::VectorXi best_j = Eigen::VectorXi::Constant(cfg.d_h, -1);
          for (int j : js) {
            for (int c = 0; c < cfg.d_h; ++c) {
              const Scalar v = transformed(c, j);
              // Strict > keeps the lowest node index on ties because
              // neighbor lists are scanned in ascending order.
              if (v > best(c)) {
                best(c) = v;
                best_j(c) = j;
              }
            }
          }
          z.col(i) += best;
          t.argmax[l][k].col(i) = best_j;
        }
      }
    }
    t.z[l] = std::move(z);
    t.h[l] = t.z[l].cwiseMax(0.0);
    prev = &t.h[l];
  }

  t.logits = t.h[kNumLayers - 1].transpose() * p.w_out;
  t.logits.array() += p.b_out;
  return t;
}

void sort_neighbor_lists(Adjacency& adj) {
  // Ascending neighbor order makes max-tie routing hit the lowest node index.
  for (auto& per_type : adj.neighbors)
    for (auto& js : per_type) std::sort(js.begin(), js.end());
}

Vector sigmoid(const Vector& z) {
  return z.unaryExpr([](Scalar v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

Vector forward(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg) {
  Adjacency adj(g);
  sort_neighbor_lists(adj);
  return run_forward(g, p, cfg, adj).logits;
}

Vector predict(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg) {
  return sigmoid(forward(g, p, cfg));
}

Scalar bce_loss(const Vector& logits, const Vector& labels, const ModelParams* params,
                Scalar l2_weight) {
  if (logits.size() == 0) throw std::invalid_argument("bce_loss: empty input");
  if (logits.size() != labels.size()) throw std::invalid_argument("bce_loss: length mismatch");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const Scalar z = logits(i), y = labels(i);
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("bce_loss: labels must be 0 or 1");
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Scalar loss = total / static_cast<Scalar>(logits.size());
  if (params != nullptr && l2_weight != 0.0) loss += 0.5 * l2_weight * squared_norm(*params);
  return loss;
}

ModelParams backward(const HeteroGraph& g, const ModelParams& p, const Vector& labels,
                     const ModelConfig& cfg) {
  Adjacency adj(g);
  sort_neighbor_lists(adj);
  const ForwardTrace t = run_forward(g, p, cfg, adj);
  const int n = static_cast<int>(g.nodes.size());
  if (labels.size() != n) throw std::invalid_argument("backward: labels/nodes length mismatch");

  ModelParams grad = zeros_like(p);

  // d loss / d logit = (sigmoid(z) - y) / n
  const Vector dlogit = (sigmoid(t.logits) - labels) / static_cast<Scalar>(n);
  grad.w_out = t.h[kNumLayers - 1] * dlogit;
  grad.b_out = dlogit.sum();

  Matrix dh = p.w_out * dlogit.transpose();  // d_h x n

  for (int l = kNumLayers - 1; l >= 0; --l) {
    const LayerParams& layer = p.layers[l];
    const Matrix& prev_h = (l == 0) ? t.h0 : t.h[l - 1];
    const Matrix dz =
        (t.z[l].array() > 0.0).select(dh, Matrix::Zero(cfg.d_h, n));  // relu mask

    LayerParams& glayer = grad.layers[l];
    glayer.bias += dz.rowwise().sum();
    glayer.w_self += dz * prev_h.transpose();
    Matrix dprev = layer.w_self.transpose() * dz;

    for (int k = 0; k < kNumEdgeTypes; ++k) {
      const auto& neigh = adj.neighbors[k];
      Matrix dt = Matrix::Zero(cfg.d_h, n);  // gradient w.r.t. W_k * prev_h columns
      bool any = false;
      if (cfg.agg_schedule[l] == Aggregation::Mean) {
        for (int i = 0; i < n; ++i) {
          const auto& js = neigh[i];
          if (js.empty()) continue;
          any = true;
          const Vector share = dz.col(i) / static_cast<Scalar>(js.size());
          for (int j : js) dt.col(j) += share;
        }
      } else {
        const IndexMatrix& routes = t.argmax[l][k];
        for (int i = 0; i < n; ++i) {
          if (neigh[i].empty()) continue;
          any = true;
          for (int c = 0; c < cfg.d_h; ++c) dt(c, routes(c, i)) += dz(c, i);
        }
      }
      if (!any) continue;
      layer_weight(glayer, k) += dt * prev_h.transpose();
      dprev += layer_weight(layer, k).transpose() * dt;
    }
    dh = std::move(dprev);
  }

  const Matrix dz0 = (t.z0.array() > 0.0).select(dh, Matrix::Zero(cfg.d_h, n));
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].type == NodeType::Visible) {
      grad.p_vis += dz0.col(i) * g.nodes[i].feature.transpose();
      grad.b_vis += dz0.col(i);
    } else {
      grad.p_cw += dz0.col(i) * g.nodes[i].feature.transpose();
      grad.b_cw += dz0.col(i);
    }
  }

  // L2 term: d(0.5*l2*||theta||^2) = l2*theta.
  if (cfg.l2_weight != 0.0) for_each_tensor_pair(grad, p, [&cfg](auto& gt, const auto& pt) {
    gt += cfg.l2_weight * pt;
  });
  return grad;
}

namespace {

Vector graph_labels(const HeteroGraph& g) {
  Vector y(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) y(static_cast<Eigen::Index>(i)) = g.nodes[i].label;
  return y;
}

}  // namespace

std::pair<ModelParams, TrainHistory> train(const std::vector<HeteroGraph>& graphs,
                                           const ModelConfig& cfg) {
  cfg.validate();
  if (graphs.empty()) throw std::invalid_argument("train: no graphs");
  for (const auto& g : graphs)
    if (!g.fully_labeled()) throw std::invalid_argument("train: graph not fully labeled");

  ModelParams params = init_params(cfg);
  ModelParams velocity = zeros_like(params);
  const Scalar momentum = 0.9;
  Rng shuffle_rng(mix_seed(cfg.seed ^ 0x5u));

  std::vector<Vector> labels;
  labels.reserve(graphs.size());
  for (const auto& g : graphs) labels.push_back(graph_labels(g));

  auto dataset_loss = [&](const ModelParams& p) {
    Scalar total = 0;
    for (std::size_t i = 0; i < graphs.size(); ++i)
      total += bce_loss(forward(graphs[i], p, cfg), labels[i]);
    return total / static_cast<Scalar>(graphs.size()) + 0.5 * cfg.l2_weight * squared_norm(p);
  };
  auto dataset_ap = [&](const ModelParams& p) {
    std::vector<std::pair<Scalar, int>> pooled;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const Vector scores = predict(graphs[i], p, cfg);
      for (Eigen::Index j = 0; j < scores.size(); ++j)
        pooled.emplace_back(scores(j), static_cast<int>(labels[i](j)));
    }
    const bool any_positive =
        std::any_of(pooled.begin(), pooled.end(), [](const auto& s) { return s.second == 1; });
    return any_positive ? average_precision(pooled) : 0.0;
  };

  TrainHistory history;
  ModelParams best = params;
  Scalar best_loss = std::numeric_limits<Scalar>::infinity();

  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t idx : order) {
      ModelParams grad = backward(graphs[idx], params, labels[idx], cfg);
      // v <- momentum*v + g, then theta <- theta - lr*v; reuse grad as the
      // updated velocity to keep it a single pass.
      for_each_tensor_pair(grad, velocity, [momentum](auto& g_, auto& v) {
        g_ += momentum * v;
        v = g_;
      });
      for_each_tensor_pair(params, velocity, [&cfg](auto& th, const auto& v) {
        th -= cfg.learning_rate * v;
      });
    }

    const Scalar epoch_loss = dataset_loss(params);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
    history.loss.push_back(epoch_loss);
    history.train_ap.push_back(dataset_ap(params));
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best = params;
    }
  }
  history.final_params = params;
  if (cfg.epochs == 0) best = params;
  return {std::move(best), std::move(history)};
}

}  // namespace sthg
