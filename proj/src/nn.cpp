#include "lautum/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "lautum/errors.hpp"
#include "lautum/rng.hpp"

namespace lautum::nn {

namespace {

#ifndef NDEBUG
void debug_check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw DataError(std::string("non-finite values after ") + what);
  }
}
#else
void debug_check_finite(const Eigen::MatrixXd&, const char*) {}
#endif

FeatureShape infer_out_shape(const LayerSpec& spec, const FeatureShape& in) {
  switch (spec.kind) {
    case LayerKind::kDense:
      if (spec.out < 1) throw ShapeError("dense layer needs out >= 1");
      return {1, 1, spec.out};
    case LayerKind::kConv3x3:
      if (spec.out < 1) throw ShapeError("conv layer needs out channels >= 1");
      if (in.height < 1 || in.width < 1) {
        throw ShapeError("conv3x3 requires spatial input");
      }
      return {spec.out, in.height, in.width};
    case LayerKind::kRelu:
      return in;
    case LayerKind::kMaxPool2:
      if (in.height < 2 || in.width < 2) {
        throw ShapeError("maxpool2 requires height and width >= 2");
      }
      return {in.channels, in.height / 2, in.width / 2};
    case LayerKind::kFlatten:
      return {1, 1, in.flat()};
  }
  throw ShapeError("unknown layer kind");
}

void init_layer_params(Layer& layer, Rng& rng) {
  switch (layer.kind) {
    case LayerKind::kDense: {
      const Eigen::Index in = layer.in_shape.flat();
      const Eigen::Index out = layer.out_shape.flat();
      const double stddev = std::sqrt(2.0 / static_cast<double>(in));
      layer.weights.resize(out, in);
      for (Eigen::Index j = 0; j < in; ++j)
        for (Eigen::Index i = 0; i < out; ++i)
          layer.weights(i, j) = stddev * rng.normal();
      layer.bias = Eigen::VectorXd::Zero(out);
      break;
    }
    case LayerKind::kConv3x3: {
      const Eigen::Index cin = layer.in_shape.channels;
      const Eigen::Index cout = layer.out_shape.channels;
      const double stddev = std::sqrt(2.0 / static_cast<double>(cin * 9));
      layer.weights.resize(cout, cin * 9);
      for (Eigen::Index j = 0; j < cin * 9; ++j)
        for (Eigen::Index i = 0; i < cout; ++i)
          layer.weights(i, j) = stddev * rng.normal();
      layer.bias = Eigen::VectorXd::Zero(cout);
      break;
    }
    default:
      break;
  }
}

// im2col for one sample: rows (cin*9) ordered (channel, ky, kx), columns
// spatial positions in row-major (h, w) order. Zero padding of 1.
Eigen::MatrixXd im2col3x3(const Eigen::VectorXd& sample,
                          const FeatureShape& in) {
  const Eigen::Index c = in.channels, h = in.height, w = in.width;
  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(c * 9, h * w);
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    const Eigen::Index base = ch * h * w;
    for (Eigen::Index oh = 0; oh < h; ++oh) {
      for (Eigen::Index ow = 0; ow < w; ++ow) {
        const Eigen::Index col = oh * w + ow;
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
          const Eigen::Index ih = oh + ky - 1;
          if (ih < 0 || ih >= h) continue;
          for (Eigen::Index kx = 0; kx < 3; ++kx) {
            const Eigen::Index iw = ow + kx - 1;
            if (iw < 0 || iw >= w) continue;
            patches(ch * 9 + ky * 3 + kx, col) = sample(base + ih * w + iw);
          }
        }
      }
    }
  }
  return patches;
}

void col2im3x3_add(const Eigen::MatrixXd& dpatches, const FeatureShape& in,
                   Eigen::Ref<Eigen::VectorXd> dsample) {
  const Eigen::Index c = in.channels, h = in.height, w = in.width;
  for (Eigen::Index ch = 0; ch < c; ++ch) {
    const Eigen::Index base = ch * h * w;
    for (Eigen::Index oh = 0; oh < h; ++oh) {
      for (Eigen::Index ow = 0; ow < w; ++ow) {
        const Eigen::Index col = oh * w + ow;
        for (Eigen::Index ky = 0; ky < 3; ++ky) {
          const Eigen::Index ih = oh + ky - 1;
          if (ih < 0 || ih >= h) continue;
          for (Eigen::Index kx = 0; kx < 3; ++kx) {
            const Eigen::Index iw = ow + kx - 1;
            if (iw < 0 || iw >= w) continue;
            dsample(base + ih * w + iw) += dpatches(ch * 9 + ky * 3 + kx, col);
          }
        }
      }
    }
  }
}

}  // namespace

Network::Network(const NetworkSpec& spec, Eigen::Index class_count)
    : spec_(spec), class_count_(class_count) {
  if (spec_.input.flat() < 1) throw ShapeError("input must have >= 1 feature");
  if (class_count_ < 2) throw ShapeError("need at least 2 classes");
  Rng rng(mix_seed(spec_.seed, 0x6e657477 /* "netw" */));
  FeatureShape cur = spec_.input;
  layers_.reserve(spec_.layers.size());
  for (const LayerSpec& ls : spec_.layers) {
    Layer layer;
    layer.kind = ls.kind;
    layer.in_shape = cur;
    layer.out_shape = infer_out_shape(ls, cur);
    init_layer_params(layer, rng);
    cur = layer.out_shape;
    layers_.push_back(std::move(layer));
  }
  if (cur.flat() != class_count_) {
    throw ShapeError("final layer width " + std::to_string(cur.flat()) +
                     " does not equal class count " +
                     std::to_string(class_count_));
  }
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& x,
                                 ForwardCache* cache) const {
  if (x.rows() != spec_.input.flat()) {
    throw ShapeError("input has " + std::to_string(x.rows()) +
                     " rows, network expects " +
                     std::to_string(spec_.input.flat()));
  }
  if (cache != nullptr) {
    cache->layer_inputs.assign(layers_.size(), Eigen::MatrixXd());
    cache->pool_argmax.assign(layers_.size(), Eigen::MatrixXi());
    cache->params_version = params_version_;
  }
  const Eigen::Index b = x.cols();
  Eigen::MatrixXd cur = x;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    if (cache != nullptr) cache->layer_inputs[li] = cur;
    switch (layer.kind) {
      case LayerKind::kDense:
        cur = (layer.weights * cur).colwise() + layer.bias;
        break;
      case LayerKind::kConv3x3: {
        const Eigen::Index hw = layer.in_shape.height * layer.in_shape.width;
        Eigen::MatrixXd out(layer.out_shape.flat(), b);
        for (Eigen::Index s = 0; s < b; ++s) {
          const Eigen::MatrixXd patches = im2col3x3(cur.col(s), layer.in_shape);
          Eigen::MatrixXd o = layer.weights * patches;  // cout x (h*w)
          o.colwise() += layer.bias;
          // channel-major flattening of the (cout, h, w) activation
          for (Eigen::Index ch = 0; ch < layer.out_shape.channels; ++ch)
            out.block(ch * hw, s, hw, 1) = o.row(ch).transpose();
        }
        cur = std::move(out);
        break;
      }
      case LayerKind::kRelu:
        cur = cur.cwiseMax(0.0);
        break;
      case LayerKind::kMaxPool2: {
        const Eigen::Index c = layer.in_shape.channels;
        const Eigen::Index h = layer.in_shape.height;
        const Eigen::Index w = layer.in_shape.width;
        const Eigen::Index oh = layer.out_shape.height;
        const Eigen::Index ow = layer.out_shape.width;
        Eigen::MatrixXd out(layer.out_shape.flat(), b);
        Eigen::MatrixXi argmax(layer.out_shape.flat(), b);
        for (Eigen::Index s = 0; s < b; ++s) {
          for (Eigen::Index ch = 0; ch < c; ++ch) {
            const Eigen::Index ibase = ch * h * w;
            const Eigen::Index obase = ch * oh * ow;
            for (Eigen::Index y = 0; y < oh; ++y) {
              for (Eigen::Index z = 0; z < ow; ++z) {
                double best = -std::numeric_limits<double>::infinity();
                Eigen::Index best_idx = 0;
                for (Eigen::Index dy = 0; dy < 2; ++dy) {
                  for (Eigen::Index dz = 0; dz < 2; ++dz) {
                    const Eigen::Index idx =
                        ibase + (2 * y + dy) * w + (2 * z + dz);
                    if (cur(idx, s) > best) {
                      best = cur(idx, s);
                      best_idx = idx;
                    }
                  }
                }
                out(obase + y * ow + z, s) = best;
                argmax(obase + y * ow + z, s) = static_cast<int>(best_idx);
              }
            }
          }
        }
        if (cache != nullptr) cache->pool_argmax[li] = std::move(argmax);
        cur = std::move(out);
        break;
      }
      case LayerKind::kFlatten:
        break;  // layout is already flat per column
    }
    debug_check_finite(cur, "layer forward");
  }
  if (cache != nullptr) cache->logits = cur;
  return cur;
}

Gradients Network::backward(const ForwardCache& cache,
                            const Eigen::MatrixXd& dlogits) const {
  if (cache.params_version != params_version_ ||
      cache.layer_inputs.size() != layers_.size()) {
    throw CacheError("forward cache is stale: parameters changed since it "
                     "was recorded");
  }
  if (dlogits.rows() != class_count_ ||
      dlogits.cols() != cache.logits.cols()) {
    throw ShapeError("dlogits shape does not match cached logits");
  }
  Gradients grads(layers_.size());
  Eigen::MatrixXd delta = dlogits;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& layer = layers_[li];
    const Eigen::MatrixXd& input = cache.layer_inputs[li];
    switch (layer.kind) {
      case LayerKind::kDense:
        grads[li].weights = delta * input.transpose();
        grads[li].bias = delta.rowwise().sum();
        delta = (layer.weights.transpose() * delta).eval();
        break;
      case LayerKind::kConv3x3: {
        const Eigen::Index b = input.cols();
        const Eigen::Index hw = layer.in_shape.height * layer.in_shape.width;
        grads[li].weights =
            Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
        grads[li].bias = Eigen::VectorXd::Zero(layer.bias.size());
        Eigen::MatrixXd dinput =
            Eigen::MatrixXd::Zero(input.rows(), input.cols());
        for (Eigen::Index s = 0; s < b; ++s) {
          Eigen::MatrixXd dy(layer.out_shape.channels, hw);
          for (Eigen::Index ch = 0; ch < layer.out_shape.channels; ++ch)
            dy.row(ch) = delta.block(ch * hw, s, hw, 1).transpose();
          const Eigen::MatrixXd patches =
              im2col3x3(input.col(s), layer.in_shape);
          grads[li].weights += dy * patches.transpose();
          grads[li].bias += dy.rowwise().sum();
          const Eigen::MatrixXd dpatches = layer.weights.transpose() * dy;
          col2im3x3_add(dpatches, layer.in_shape, dinput.col(s));
        }
        delta = std::move(dinput);
        break;
      }
      case LayerKind::kRelu:
        delta =
            ((input.array() > 0.0).cast<double>() * delta.array()).matrix();
        break;
      case LayerKind::kMaxPool2: {
        const Eigen::MatrixXi& argmax = cache.pool_argmax[li];
        Eigen::MatrixXd dinput =
            Eigen::MatrixXd::Zero(input.rows(), input.cols());
        for (Eigen::Index s = 0; s < delta.cols(); ++s)
          for (Eigen::Index i = 0; i < delta.rows(); ++i)
            dinput(argmax(i, s), s) += delta(i, s);
        delta = std::move(dinput);
        break;
      }
      case LayerKind::kFlatten:
        break;
    }
  }
  return grads;
}

std::vector<std::pair<std::string, Tensor>> Network::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& layer = layers_[li];
    if (!layer.has_params()) continue;
    Tensor w;
    w.shape = {layer.weights.rows(), layer.weights.cols()};
    w.data.assign(layer.weights.data(),
                  layer.weights.data() + layer.weights.size());
    out.emplace_back("layer" + std::to_string(li) + ".weights", std::move(w));
    Tensor b;
    b.shape = {layer.bias.size()};
    b.data.assign(layer.bias.data(), layer.bias.data() + layer.bias.size());
    out.emplace_back("layer" + std::to_string(li) + ".bias", std::move(b));
  }
  return out;
}

void Network::load_state(
    const std::vector<std::pair<std::string, Tensor>>& state) {
  std::size_t cursor = 0;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Layer& layer = layers_[li];
    if (!layer.has_params()) continue;
    if (cursor + 2 > state.size()) {
      throw ShapeError("state has too few tensors for this network");
    }
    const Tensor& w = state[cursor].second;
    const Tensor& b = state[cursor + 1].second;
    if (w.shape.size() != 2 || w.shape[0] != layer.weights.rows() ||
        w.shape[1] != layer.weights.cols() ||
        b.shape.size() != 1 || b.shape[0] != layer.bias.size()) {
      throw ShapeError("state tensor shapes do not match layer " +
                       std::to_string(li));
    }
    std::memcpy(layer.weights.data(), w.data.data(),
                sizeof(double) * w.data.size());
    std::memcpy(layer.bias.data(), b.data.data(),
                sizeof(double) * b.data.size());
    cursor += 2;
  }
  if (cursor != state.size()) {
    throw ShapeError("state has extra tensors");
  }
  ++params_version_;
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x4b43544cu;  // "LTCK"
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("checkpoint truncated");
  return v;
}

}  // namespace

void Network::save_checkpoint(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  write_pod(os, kCheckpointMagic);
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::int64_t>(spec_.input.channels));
  write_pod(os, static_cast<std::int64_t>(spec_.input.height));
  write_pod(os, static_cast<std::int64_t>(spec_.input.width));
  write_pod(os, static_cast<std::int64_t>(class_count_));
  write_pod(os, spec_.seed);
  write_pod(os, static_cast<std::uint64_t>(spec_.layers.size()));
  for (const LayerSpec& ls : spec_.layers) {
    write_pod(os, static_cast<std::uint32_t>(ls.kind));
    write_pod(os, static_cast<std::int64_t>(ls.out));
  }
  for (const Layer& layer : layers_) {
    if (!layer.has_params()) continue;
    write_pod(os, static_cast<std::int64_t>(layer.weights.rows()));
    write_pod(os, static_cast<std::int64_t>(layer.weights.cols()));
    os.write(reinterpret_cast<const char*>(layer.weights.data()),
             sizeof(double) * layer.weights.size());
    write_pod(os, static_cast<std::int64_t>(layer.bias.size()));
    os.write(reinterpret_cast<const char*>(layer.bias.data()),
             sizeof(double) * layer.bias.size());
  }
  if (!os) throw IoError("checkpoint write failed: " + path);
}

Network Network::load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  if (read_pod<std::uint32_t>(is) != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic in " + path);
  }
  if (read_pod<std::uint32_t>(is) != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version in " + path);
  }
  NetworkSpec spec;
  spec.input.channels = read_pod<std::int64_t>(is);
  spec.input.height = read_pod<std::int64_t>(is);
  spec.input.width = read_pod<std::int64_t>(is);
  const auto class_count = read_pod<std::int64_t>(is);
  spec.seed = read_pod<std::uint64_t>(is);
  const auto n_layers = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    LayerSpec ls;
    ls.kind = static_cast<LayerKind>(read_pod<std::uint32_t>(is));
    ls.out = read_pod<std::int64_t>(is);
    spec.layers.push_back(ls);
  }
  Network net(spec, class_count);
  for (Layer& layer : net.layers_) {
    if (!layer.has_params()) continue;
    const auto rows = read_pod<std::int64_t>(is);
    const auto cols = read_pod<std::int64_t>(is);
    if (rows != layer.weights.rows() || cols != layer.weights.cols()) {
      throw FormatError("checkpoint weight shape mismatch");
    }
    is.read(reinterpret_cast<char*>(layer.weights.data()),
            sizeof(double) * layer.weights.size());
    const auto blen = read_pod<std::int64_t>(is);
    if (blen != layer.bias.size()) {
      throw FormatError("checkpoint bias shape mismatch");
    }
    is.read(reinterpret_cast<char*>(layer.bias.data()),
            sizeof(double) * layer.bias.size());
    if (!is) throw FormatError("checkpoint truncated");
  }
  ++net.params_version_;
  return net;
}

CeLossResult softmax_ce_loss(const Eigen::MatrixXd& logits,
                             const Eigen::MatrixXd& onehot_labels) {
  if (logits.rows() != onehot_labels.rows() ||
      logits.cols() != onehot_labels.cols()) {
    throw ShapeError("logits and labels must have identical shapes");
  }
  const Eigen::Index k = logits.rows(), b = logits.cols();
  if (b < 1) throw ShapeError("empty batch");
  for (Eigen::Index s = 0; s < b; ++s) {
    int ones = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double v = onehot_labels(i, s);
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        throw DataError("labels must be exactly one-hot");
      }
    }
    if (ones != 1) throw DataError("labels must be exactly one-hot");
  }
  CeLossResult result;
  result.dlogits.resize(k, b);
  double loss = 0.0;
  for (Eigen::Index s = 0; s < b; ++s) {
    const double mx = logits.col(s).maxCoeff();
    const Eigen::ArrayXd shifted = logits.col(s).array() - mx;
    const Eigen::ArrayXd ex = shifted.exp();
    const double z = ex.sum();
    const Eigen::ArrayXd softmax = ex / z;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (onehot_labels(i, s) == 1.0) {
        loss -= shifted(i) - std::log(z);
      }
      result.dlogits(i, s) =
          (softmax(i) - onehot_labels(i, s)) / static_cast<double>(b);
    }
  }
  result.loss = loss / static_cast<double>(b);
  return result;
}

AdamState::AdamState(const Network& net, AdamParams hp) : hp_(hp) {
  for (const Layer& layer : net.layers()) {
    LayerGrads zero;
    if (layer.has_params()) {
      zero.weights =
          Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols());
      zero.bias = Eigen::VectorXd::Zero(layer.bias.size());
    }
    m_.push_back(zero);
    v_.push_back(zero);
  }
}

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  auto& layers = net.mutable_layers();
  if (grads.size() != layers.size() || state.m_.size() != layers.size()) {
    throw ShapeError("gradient/state structure does not match network");
  }
  const AdamParams& hp = state.hp_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(hp.beta1, t);
  const double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t li = 0; li < layers.size(); ++li) {
    Layer& layer = layers[li];
    if (!layer.has_params()) continue;
    const LayerGrads& g = grads[li];
    if (g.weights.rows() != layer.weights.rows() ||
        g.weights.cols() != layer.weights.cols() ||
        g.bias.size() != layer.bias.size()) {
      throw ShapeError("gradient shapes do not mirror parameters");
    }
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> m,
                      Eigen::Ref<Eigen::MatrixXd> v,
                      const Eigen::MatrixXd& grad,
                      Eigen::Ref<Eigen::MatrixXd> param) {
      m = hp.beta1 * m + (1.0 - hp.beta1) * grad;
      v = hp.beta2 * v + (1.0 - hp.beta2) * grad.cwiseProduct(grad);
      const Eigen::ArrayXXd mhat = m.array() / bc1;
      const Eigen::ArrayXXd vhat = v.array() / bc2;
      param.array() -= hp.lr * mhat / (vhat.sqrt() + hp.eps);
    };
    update(state.m_[li].weights, state.v_[li].weights, g.weights,
           layer.weights);
    Eigen::MatrixXd gb = g.bias;
    Eigen::Map<Eigen::MatrixXd> mb(state.m_[li].bias.data(),
                                   state.m_[li].bias.size(), 1);
    Eigen::Map<Eigen::MatrixXd> vb(state.v_[li].bias.data(),
                                   state.v_[li].bias.size(), 1);
    Eigen::Map<Eigen::MatrixXd> pb(layer.bias.data(), layer.bias.size(), 1);
    update(mb, vb, gb, pb);
  }
}

}  // namespace lautum::nn
