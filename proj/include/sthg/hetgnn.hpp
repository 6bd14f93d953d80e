#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sthg/types.hpp"

namespace sthg {

enum class Aggregation { Mean, Max };

const char* to_string(Aggregation a);
Aggregation aggregation_from_string(const std::string& s);

inline constexpr int kNumLayers = 3;
inline constexpr int kNumEdgeTypes = 3;

struct ModelConfig {
  int d_av = 16;  // visible (audio-visual) input dim
  int d_a = 8;    // wearer (audio-only) input dim
  int d_h = 16;   // hidden dim
  std::array<Aggregation, kNumLayers> agg_schedule = {Aggregation::Mean, Aggregation::Mean,
                                                      Aggregation::Max};
  Scalar learning_rate = 1e-2;
  int epochs = 30;
  Scalar l2_weight = 1e-4;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One message-passing layer: a self weight plus one weight per edge type.
struct LayerParams {
  Matrix w_self, w_vv, w_vw, w_ww;  // each d_h x d_h
  Vector bias;                      // d_h
};

/// All trainable tensors. Same struct doubles as a gradient container.
struct ModelParams {
  Matrix p_vis;  // d_h x d_av
  Vector b_vis;  // d_h
  Matrix p_cw;   // d_h x d_a
  Vector b_cw;   // d_h
  std::array<LayerParams, kNumLayers> layers;
  Vector w_out;  // d_h
  Scalar b_out = 0;
};

/// Applies f(name, tensor) to every parameter tensor in the checkpoint field
/// order. f must accept (const char*, Matrix&), (const char*, Vector&) and
/// (const char*, Scalar&).
template <typename Params, typename F>
void visit_params(Params& p, F&& f) {
  f("p_vis", p.p_vis);
  f("b_vis", p.b_vis);
  f("p_cw", p.p_cw);
  f("b_cw", p.b_cw);
  static const char* names[kNumLayers][5] = {
      {"layer1.w_self", "layer1.w_vv", "layer1.w_vw", "layer1.w_ww", "layer1.bias"},
      {"layer2.w_self", "layer2.w_vv", "layer2.w_vw", "layer2.w_ww", "layer2.bias"},
      {"layer3.w_self", "layer3.w_vv", "layer3.w_vw", "layer3.w_ww", "layer3.bias"},
  };
  for (int l = 0; l < kNumLayers; ++l) {
    f(names[l][0], p.layers[l].w_self);
    f(names[l][1], p.layers[l].w_vv);
    f(names[l][2], p.layers[l].w_vw);
    f(names[l][3], p.layers[l].w_ww);
    f(names[l][4], p.layers[l].bias);
  }
  f("w_out", p.w_out);
  f("b_out", p.b_out);
}

/// Applies f(tensor_a, tensor_b) to corresponding tensors of two parameter
/// sets, in the same order as visit_params.
template <typename PA, typename PB, typename F>
void for_each_tensor_pair(PA& a, PB& b, F&& f) {
  f(a.p_vis, b.p_vis);
  f(a.b_vis, b.b_vis);
  f(a.p_cw, b.p_cw);
  f(a.b_cw, b.b_cw);
  for (int l = 0; l < kNumLayers; ++l) {
    f(a.layers[l].w_self, b.layers[l].w_self);
    f(a.layers[l].w_vv, b.layers[l].w_vv);
    f(a.layers[l].w_vw, b.layers[l].w_vw);
    f(a.layers[l].w_ww, b.layers[l].w_ww);
    f(a.layers[l].bias, b.layers[l].bias);
  }
  f(a.w_out, b.w_out);
  f(a.b_out, b.b_out);
}

/// Glorot-uniform weights ([-s, s], s = sqrt(6/(fan_in+fan_out))), zero biases.
/// Deterministic per cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

ModelParams zeros_like(const ModelParams& p);
Scalar squared_norm(const ModelParams& p);

/// One logit per node, in node order.
///
/// h0_i = relu(P_type(i) x_i + b_type(i));
/// h^l_i = relu(W_self h^{l-1}_i + sum_k AGG_{j in N_k(i)} W_k h^{l-1}_j + b^l)
/// with elementwise mean or max per agg_schedule and zero contribution from
/// empty neighbor sets; logit_i = w_out . h3_i + b_out.
///
/// Throws on dimension mismatch or non-finite features.
Vector forward(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg);

/// Sigmoid of forward logits: scores in [0, 1].
Vector predict(const HeteroGraph& g, const ModelParams& p, const ModelConfig& cfg);

/// Softplus-stabilized mean binary cross-entropy:
/// mean_i[max(z,0) - z y + log(1+exp(-|z|))], plus l2_weight*||params||^2/2
/// when params is given. Throws on empty input or length mismatch.
Scalar bce_loss(const Vector& logits, const Vector& labels, const ModelParams* params = nullptr,
                Scalar l2_weight = 0.0);

/// Exact reverse-mode gradient of bce_loss(forward(g), labels) w.r.t. every
/// parameter, including the L2 term. Max aggregation routes gradient to the
/// arg-max neighbor per coordinate, ties to the lowest node index.
ModelParams backward(const HeteroGraph& g, const ModelParams& p, const Vector& labels,
                     const ModelConfig& cfg);

struct TrainHistory {
  std::vector<Scalar> loss;      // per epoch, full-dataset loss after updates
  std::vector<Scalar> train_ap;  // per epoch, pooled AP over all nodes
  ModelParams final_params;      // params after the last epoch
};

/// Full-batch-per-graph SGD with momentum 0.9: one step per graph per epoch,
/// graph order shuffled per epoch by a seeded RNG. Single-threaded and
/// deterministic per cfg.seed. Returns the params with the best end-of-epoch
/// loss. Throws when no fully labeled graphs are given.
std::pair<ModelParams, TrainHistory> train(const std::vector<HeteroGraph>& graphs,
                                           const ModelConfig& cfg);

}  // namespace sthg
