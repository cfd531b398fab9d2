#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lautum::nn {

// Checkpoint/interchange container: shape plus contiguous 64-bit data.
struct Tensor {
  std::vector<Eigen::Index> shape;
  std::vector<double> data;

  Eigen::Index size() const {
    Eigen::Index n = 1;
    for (Eigen::Index d : shape) n *= d;
    return n;
  }
};

// Activation geometry flowing between layers; a flat vector is {1, 1, d}.
struct FeatureShape {
  Eigen::Index channels = 1;
  Eigen::Index height = 1;
  Eigen::Index width = 1;
  Eigen::Index flat() const { return channels * height * width; }
  bool operator==(const FeatureShape&) const = default;
};

enum class LayerKind : std::uint32_t {
  kDense = 0,
  kConv3x3 = 1,  // stride 1, zero padding 1 (same-size output)
  kRelu = 2,
  kMaxPool2 = 3,  // 2x2 window, stride 2, floor on odd extents
  kFlatten = 4,
};

struct LayerSpec {
  LayerKind kind;
  Eigen::Index out = 0;  // dense width / conv output channels

  static LayerSpec dense(Eigen::Index out) { return {LayerKind::kDense, out}; }
  static LayerSpec conv3x3(Eigen::Index cout) {
    return {LayerKind::kConv3x3, cout};
  }
  static LayerSpec relu() { return {LayerKind::kRelu, 0}; }
  static LayerSpec maxpool2() { return {LayerKind::kMaxPool2, 0}; }
  static LayerSpec flatten() { return {LayerKind::kFlatten, 0}; }
};

struct NetworkSpec {
  FeatureShape input;
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;
};

// One instantiated layer. Weight layout: dense out x in; conv
// cout x (cin * 9) with kernel rows ordered (channel, ky, kx).
struct Layer {
  LayerKind kind;
  FeatureShape in_shape;
  FeatureShape out_shape;
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;

  bool has_params() const {
    return kind == LayerKind::kDense || kind == LayerKind::kConv3x3;
  }
};

// Activations recorded by forward() for the matching backward() call.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;
  std::vector<Eigen::MatrixXi> pool_argmax;  // per layer; empty unless maxpool
  Eigen::MatrixXd logits;
  std::uint64_t params_version = 0;
};

// Per-layer parameter gradients; empty matrices for parameterless layers.
struct LayerGrads {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};
using Gradients = std::vector<LayerGrads>;

class Network {
 public:
  // Builds and initializes parameters (He-scaled Gaussian, bias zero,
  // deterministic in spec.seed). Validates that consecutive layer shapes are
  // compatible and the final width equals class_count.
  Network(const NetworkSpec& spec, Eigen::Index class_count);

  // Deterministic given parameters and inputs. Columns of x are samples with
  // input.flat() rows. When cache is non-null it is filled for backward().
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                          ForwardCache* cache = nullptr) const;

  // Reverse-mode pass over the cached activations. The cache must come from
  // a forward() on the current parameters (CacheError otherwise).
  Gradients backward(const ForwardCache& cache,
                     const Eigen::MatrixXd& dlogits) const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() {
    ++params_version_;
    return layers_;
  }
  Eigen::Index input_dim() const { return spec_.input.flat(); }
  Eigen::Index class_count() const { return class_count_; }
  const NetworkSpec& spec() const { return spec_; }
  std::uint64_t params_version() const { return params_version_; }

  // Parameter snapshot as named tensors; load_state restores it exactly.
  std::vector<std::pair<std::string, Tensor>> state() const;
  void load_state(const std::vector<std::pair<std::string, Tensor>>& state);

  // Versioned binary checkpoint, round-trip exact at 64 bits.
  void save_checkpoint(const std::string& path) const;
  static Network load_checkpoint(const std::string& path);

 private:
  NetworkSpec spec_;
  Eigen::Index class_count_;
  std::vector<Layer> layers_;
  std::uint64_t params_version_ = 0;
};

// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
// logits, stabilized by max-subtraction. Labels must be exactly one-hot.
struct CeLossResult {
  double loss;
  Eigen::MatrixXd dlogits;  // (softmax - labels) / B
};
CeLossResult softmax_ce_loss(const Eigen::MatrixXd& logits,
                             const Eigen::MatrixXd& onehot_labels);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(const Network& net, AdamParams hp);
  const AdamParams& params() const { return hp_; }
  std::int64_t step() const { return step_; }

  friend void adam_step(Network& net, const Gradients& grads,
                        AdamState& state);

 private:
  std::vector<LayerGrads> m_;
  std::vector<LayerGrads> v_;
  std::int64_t step_ = 0;
  AdamParams hp_;
};

// Standard bias-corrected Adam update, applied in place.
void adam_step(Network& net, const Gradients& grads, AdamState& state);

}  // namespace lautum::nn
