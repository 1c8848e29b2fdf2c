// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtv/cnn/model.h"

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace mtv::cnn {
namespace {

template <typename T>
ConvLayer<T> make_conv(std::size_t out, std::size_t in, int k) {
  ConvLayer<T> conv;
  const auto kk = static_cast<std::size_t>(k);
  conv.weights = Tensor<T>({out, in, kk, kk});
  conv.stride = 1;
  conv.padding = k / 2;
  return conv;
}

// Builds the shape skeleton with zero weights and default batch norms.
template <typename T>
CnnModel<T> skeleton(const Architecture& arch, const InputPipeline& pipeline) {
  arch.validate();
  if (pipeline.zero_channels < 0) throw ArgumentError("zero_channels must be >= 0");
  CnnModel<T> model;
  model.arch = arch;
  model.pipeline = pipeline;
  const auto w0 = static_cast<std::size_t>(arch.stage_width(0));
  model.stem = make_conv<T>(w0, static_cast<std::size_t>(model.network_input_channels()),
                            arch.kernel_size);
  std::size_t in = w0;
  for (int s = 0; s < arch.stages; ++s) {
    const auto width = static_cast<std::size_t>(arch.stage_width(s));
    for (int b = 0; b < arch.blocks_per_stage; ++b) {
      ResidualBlock<T> block;
      block.downsample = s > 0 && b == 0;
      block.bn1 = BatchNorm<T>(in);
      block.conv1 = make_conv<T>(width, in, arch.kernel_size);
      block.bn2 = BatchNorm<T>(width);
      block.conv2 = make_conv<T>(width, width, arch.kernel_size);
      model.blocks.push_back(std::move(block));
      in = width;
    }
  }
  model.head_bn = BatchNorm<T>(in);
  model.head.weights = Tensor<T>({static_cast<std::size_t>(arch.num_classes), in});
  model.head.bias.assign(static_cast<std::size_t>(arch.num_classes), T{0});
  return model;
}

template <typename T>
void fill_normal(Tensor<T>& t, double sd, Rng& rng) {
  for (auto& v : t.values()) v = static_cast<T>(rng.normal(0.0, sd));
}

template <typename T>
void he_init(ConvLayer<T>& conv, Rng& rng) {
  const double fan_in = static_cast<double>(conv.in_channels() * conv.kernel_size() *
                                            conv.kernel_size());
  fill_normal(conv.weights, std::sqrt(2.0 / fan_in), rng);
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](T v) { return std::isfinite(static_cast<double>(v)); });
}

template <typename T>
std::string first_nonfinite_layer(const ForwardCache<T>& cache, const Tensor<T>& logits) {
  for (std::size_t b = 0; b < cache.blocks.size(); ++b) {
    const auto& bc = cache.blocks[b];
    const std::string prefix = "block" + std::to_string(b);
    if (!all_finite(bc.input)) return b == 0 ? "stem" : "block" + std::to_string(b - 1);
    if (!all_finite(bc.relu1)) return prefix + ".bn1";
    if (!all_finite(bc.conv1)) return prefix + ".conv1";
    if (!all_finite(bc.relu2)) return prefix + ".bn2";
  }
  if (!all_finite(cache.head_relu)) return "head_bn";
  if (!all_finite(cache.pooled)) return "pool";
  if (!all_finite(logits)) return "dense";
  return "cross_entropy";
}

template <typename T, typename M>
auto collect_parameters(M& model) {
  using V = std::conditional_t<std::is_const_v<M>, const T, T>;
  std::vector<ParamRef<V>> out;
  out.push_back({"stem.w", model.stem.weights.values(), true});
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto& block = model.blocks[b];
    const std::string p = "block" + std::to_string(b) + ".";
    out.push_back({p + "bn1.gamma", block.bn1.gamma, false});
    out.push_back({p + "bn1.beta", block.bn1.beta, false});
    out.push_back({p + "conv1.w", block.conv1.weights.values(), true});
    out.push_back({p + "bn2.gamma", block.bn2.gamma, false});
    out.push_back({p + "bn2.beta", block.bn2.beta, false});
    out.push_back({p + "conv2.w", block.conv2.weights.values(), true});
  }
  out.push_back({"head_bn.gamma", model.head_bn.gamma, false});
  out.push_back({"head_bn.beta", model.head_bn.beta, false});
  out.push_back({"dense.w", model.head.weights.values(), true});
  out.push_back({"dense.b", model.head.bias, false});
  return out;
}

template <typename T, typename M>
auto collect_buffers(M& model) {
  using V = std::conditional_t<std::is_const_v<M>, const T, T>;
  std::vector<ParamRef<V>> out;
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    auto& block = model.blocks[b];
    const std::string p = "block" + std::to_string(b) + ".";
    out.push_back({p + "bn1.running_mean", block.bn1.running_mean, false});
    out.push_back({p + "bn1.running_var", block.bn1.running_var, false});
    out.push_back({p + "bn2.running_mean", block.bn2.running_mean, false});
    out.push_back({p + "bn2.running_var", block.bn2.running_var, false});
  }
  out.push_back({"head_bn.running_mean", model.head_bn.running_mean, false});
  out.push_back({"head_bn.running_var", model.head_bn.running_var, false});
  return out;
}

}  // namespace

void Architecture::validate() const {
  if (input_channels < 1 || base_width < 1 || stages < 1 || blocks_per_stage < 1 ||
      num_classes < 2 || kernel_size < 1 || kernel_size % 2 == 0) {
    throw ArgumentError("architecture: invalid descriptor");
  }
  if (image_size < 1 || image_size % (1 << (stages - 1)) != 0) {
    throw ArgumentError("architecture: image_size " + std::to_string(image_size) +
                        " must be divisible by 2^(stages-1)");
  }
}

template <typename T>
std::vector<ParamRef<T>> CnnModel<T>::parameters() {
  return collect_parameters<T>(*this);
}
template <typename T>
std::vector<ParamRef<const T>> CnnModel<T>::parameters() const {
  return collect_parameters<T>(*this);
}
template <typename T>
std::vector<ParamRef<T>> CnnModel<T>::buffers() {
  return collect_buffers<T>(*this);
}
template <typename T>
std::vector<ParamRef<const T>> CnnModel<T>::buffers() const {
  return collect_buffers<T>(*this);
}

template <typename T>
CnnModel<T> init_model(const Architecture& arch, const InputPipeline& pipeline, Rng& rng) {
  CnnModel<T> model = skeleton<T>(arch, pipeline);
  he_init(model.stem, rng);
  for (auto& block : model.blocks) {
    he_init(block.conv1, rng);
    he_init(block.conv2, rng);
  }
  fill_normal(model.head.weights,
              std::sqrt(1.0 / static_cast<double>(model.head.weights.dim(1))), rng);
  return model;
}

template <typename T>
CnnModel<T> zeros_like(const CnnModel<T>& model) {
  CnnModel<T> z = skeleton<T>(model.arch, model.pipeline);
  z.eval_uses_batch_stats = model.eval_uses_batch_stats;
  for (auto& p : z.parameters()) std::fill(p.values.begin(), p.values.end(), T{0});
  return z;
}

template <typename To, typename From>
CnnModel<To> model_cast(const CnnModel<From>& model) {
  CnnModel<To> out = skeleton<To>(model.arch, model.pipeline);
  out.eval_uses_batch_stats = model.eval_uses_batch_stats;
  auto dst = out.parameters();
  auto src = model.parameters();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    std::copy(src[i].values.begin(), src[i].values.end(), dst[i].values.begin());
  }
  auto dbuf = out.buffers();
  auto sbuf = model.buffers();
  for (std::size_t i = 0; i < dbuf.size(); ++i) {
    std::copy(sbuf[i].values.begin(), sbuf[i].values.end(), dbuf[i].values.begin());
  }
  return out;
}

template <typename T>
Tensor<T> prepare_inputs(const CnnModel<T>& model, const dataset::LabeledImageSet& set,
                         std::span<const std::size_t> indices) {
  const auto channels = static_cast<std::size_t>(model.arch.input_channels);
  const auto side = static_cast<std::size_t>(model.arch.image_size);
  if (set.channels != channels || set.height != side || set.width != side) {
    throw ArgumentError("prepare_inputs: images are (" + std::to_string(set.channels) + ", " +
                        std::to_string(set.height) + ", " + std::to_string(set.width) +
                        "), model expects (" + std::to_string(channels) + ", " +
                        std::to_string(side) + ", " + std::to_string(side) + ")");
  }
  const std::size_t net_c = static_cast<std::size_t>(model.network_input_channels());
  const std::size_t plane = set.plane_size();
  const std::size_t raw = set.image_size();
  Tensor<T> out({indices.size(), net_c, side, side});
  std::vector<T> buf;
  std::vector<T> norm;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto img = set.image(indices[r]);
    buf.assign(img.begin(), img.end());
    if (model.pipeline.stats_pad_value) {
      buf.resize(raw + plane, static_cast<T>(*model.pipeline.stats_pad_value));
    }
    norm.resize(buf.size());
    normalize_instance<T>(buf, norm);
    std::copy_n(norm.begin(), raw, out.data() + r * net_c * plane);
  }
  return out;
}

template <typename T>
Tensor<T> prepare_inputs(const CnnModel<T>& model, const dataset::LabeledImageSet& set) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return prepare_inputs(model, set, all);
}

template <typename T>
Tensor<T> gather(const Tensor<T>& batch, std::span<const std::size_t> indices) {
  Shape shape = batch.shape();
  const std::size_t row = batch.size() / shape.at(0);
  shape[0] = indices.size();
  Tensor<T> out(shape);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= batch.dim(0)) throw ArgumentError("gather: index out of range");
    std::copy_n(batch.data() + indices[r] * row, row, out.data() + r * row);
  }
  return out;
}

template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& input, bool batch_stats,
                  ForwardCache<T>* cache) {
  const auto side = static_cast<std::size_t>(model.arch.image_size);
  const Shape expected{input.rank() == 4 ? input.dim(0) : 0,
                       static_cast<std::size_t>(model.network_input_channels()), side, side};
  if (input.shape() != expected || input.dim(0) == 0) {
    throw ArgumentError("forward: input shape " + shape_string(input.shape()) +
                        " does not match model input " + shape_string(expected));
  }
  if (cache) {
    cache->input = input;
    cache->blocks.assign(model.blocks.size(), {});
  }
  Tensor<T> x = conv2d_forward(input, model.stem);
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    const auto& block = model.blocks[b];
    BlockCache<T> local;
    BlockCache<T>& bc = cache ? cache->blocks[b] : local;
    bc.pre_pool_shape = x.shape();
    if (block.downsample) x = avg_pool2_forward(x);
    Tensor<T> h = batch_norm_forward(x, block.bn1, batch_stats, &bc.bn1);
    bc.relu1 = relu_forward(h);
    bc.conv1 = conv2d_forward(bc.relu1, block.conv1);
    h = batch_norm_forward(bc.conv1, block.bn2, batch_stats, &bc.bn2);
    bc.relu2 = relu_forward(h);
    Tensor<T> y = conv2d_forward(bc.relu2, block.conv2);
    if (model.arch.skip_connections) {
      const Tensor<T> shortcut = x.dim(1) == y.dim(1) ? x : pad_channels_forward(x, y.dim(1));
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += shortcut[i];
    }
    bc.input = std::move(x);
    x = std::move(y);
    if (!cache) bc = {};
  }
  BatchNormCache<T> head_local;
  Tensor<T> h = batch_norm_forward(x, model.head_bn, batch_stats,
                                   cache ? &cache->head_bn : &head_local);
  Tensor<T> r = relu_forward(h);
  Tensor<T> pooled = global_avg_pool_forward(r);
  Tensor<T> logits = dense_forward(pooled, model.head);
  if (cache) {
    cache->trunk_shape = x.shape();
    cache->head_relu = std::move(r);
    cache->pooled = std::move(pooled);
  }
  return logits;
}

template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& input, Mode mode,
                  ForwardCache<T>* cache) {
  const bool batch_stats = mode == Mode::kTrain || model.eval_uses_batch_stats;
  return forward(model, input, batch_stats, cache);
}

template <typename T>
CnnModel<T> backward(const CnnModel<T>& model, const ForwardCache<T>& cache,
                     const Tensor<T>& grad_logits) {
  CnnModel<T> g = zeros_like(model);
  Tensor<T> grad = dense_backward(cache.pooled, model.head, grad_logits, g.head.weights,
                                  g.head.bias);
  grad = global_avg_pool_backward(grad, cache.trunk_shape);
  grad = relu_backward(grad, cache.head_relu);
  grad = batch_norm_backward(grad, model.head_bn, cache.head_bn, g.head_bn.gamma,
                             g.head_bn.beta);

  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    const auto& block = model.blocks[b];
    const auto& bc = cache.blocks[b];
    auto& gb = g.blocks[b];
    Tensor<T> g_relu2;
    conv2d_backward(bc.relu2, block.conv2, grad, &g_relu2, &gb.conv2.weights);
    Tensor<T> g_h = relu_backward(g_relu2, bc.relu2);
    Tensor<T> g_conv1 = batch_norm_backward(g_h, block.bn2, bc.bn2, gb.bn2.gamma, gb.bn2.beta);
    Tensor<T> g_relu1;
    conv2d_backward(bc.relu1, block.conv1, g_conv1, &g_relu1, &gb.conv1.weights);
    g_h = relu_backward(g_relu1, bc.relu1);
    Tensor<T> g_in = batch_norm_backward(g_h, block.bn1, bc.bn1, gb.bn1.gamma, gb.bn1.beta);
    if (model.arch.skip_connections) {
      const Tensor<T> g_skip = grad.dim(1) == g_in.dim(1)
                                   ? grad
                                   : pad_channels_backward(grad, g_in.dim(1));
      for (std::size_t i = 0; i < g_in.size(); ++i) g_in[i] += g_skip[i];
    }
    grad = block.downsample ? avg_pool2_backward(g_in) : std::move(g_in);
  }
  conv2d_backward<T>(cache.input, model.stem, grad, nullptr, &g.stem.weights);
  return g;
}

template <typename T>
void update_running_stats(CnnModel<T>& model, const ForwardCache<T>& cache, double momentum) {
  for (std::size_t b = 0; b < model.blocks.size(); ++b) {
    batch_norm_update_running(model.blocks[b].bn1, cache.blocks[b].bn1, momentum);
    batch_norm_update_running(model.blocks[b].bn2, cache.blocks[b].bn2, momentum);
  }
  batch_norm_update_running(model.head_bn, cache.head_bn, momentum);
}

std::string to_string(LossForm form) {
  switch (form) {
    case LossForm::kStandard: return "standard";
    case LossForm::kMinusDecay: return "minus_decay";
    case LossForm::kDecayOverNorm: return "decay_over_norm";
    case LossForm::kDecayMinusNorm: return "decay_minus_norm";
    case LossForm::kSummedCrossEntropy: return "summed_cross_entropy";
  }
  return "standard";
}

LossForm loss_form_from_string(const std::string& name) {
  for (LossForm f : {LossForm::kStandard, LossForm::kMinusDecay, LossForm::kDecayOverNorm,
                     LossForm::kDecayMinusNorm, LossForm::kSummedCrossEntropy}) {
    if (to_string(f) == name) return f;
  }
  throw ArgumentError("unknown loss form '" + name + "'");
}

template <typename T>
double l2_term(const CnnModel<T>& model) {
  double sum = 0.0;
  for (const auto& p : model.parameters()) {
    if (!p.decays) continue;
    for (T v : p.values) sum += static_cast<double>(v) * static_cast<double>(v);
  }
  return 0.5 * sum;
}

template <typename T>
LossResult<T> loss_and_grad(const CnnModel<T>& model, const Tensor<T>& input,
                            std::span<const int> labels, double weight_decay, LossForm form,
                            bool batch_stats) {
  if (labels.empty()) throw ArgumentError("loss_and_grad: empty batch");
  LossResult<T> result;
  const Tensor<T> logits = forward(model, input, batch_stats, &result.cache);
  const double n = static_cast<double>(labels.size());
  const double ce_scale = form == LossForm::kSummedCrossEntropy ? 1.0 : 1.0 / n;
  Tensor<T> grad_logits;
  const std::vector<double> losses = softmax_cross_entropy(logits, labels, ce_scale,
                                                           &grad_logits);
  double ce_sum = 0.0;
  for (double l : losses) ce_sum += l;
  result.cross_entropy = ce_sum / n;
  const double ce = form == LossForm::kSummedCrossEntropy ? ce_sum : result.cross_entropy;

  const double l2 = l2_term(model);
  double decay_grad_coef = 0.0;  // d(decay term)/dw = coef * w
  switch (form) {
    case LossForm::kStandard:
    case LossForm::kSummedCrossEntropy:
      result.loss = ce + weight_decay * l2;
      decay_grad_coef = weight_decay;
      break;
    case LossForm::kMinusDecay:
      result.loss = ce - weight_decay * l2;
      decay_grad_coef = -weight_decay;
      break;
    case LossForm::kDecayOverNorm:
      result.loss = ce + weight_decay / l2;
      decay_grad_coef = -weight_decay / (l2 * l2);
      break;
    case LossForm::kDecayMinusNorm:
      result.loss = ce + weight_decay - l2;
      decay_grad_coef = -1.0;
      break;
  }
  if (!std::isfinite(result.loss)) {
    throw NumericalError("loss_and_grad: non-finite loss, first non-finite layer: " +
                         first_nonfinite_layer(result.cache, logits));
  }

  result.grads = backward(model, result.cache, grad_logits);
  if (decay_grad_coef != 0.0) {
    auto gp = result.grads.parameters();
    const auto mp = model.parameters();
    for (std::size_t i = 0; i < gp.size(); ++i) {
      if (!mp[i].decays) continue;
      for (std::size_t j = 0; j < gp[i].values.size(); ++j) {
        gp[i].values[j] += static_cast<T>(decay_grad_coef * static_cast<double>(mp[i].values[j]));
      }
    }
  }
  return result;
}

#define MTV_INSTANTIATE_MODEL(T)                                                              \
  template struct CnnModel<T>;                                                                \
  template CnnModel<T> init_model<T>(const Architecture&, const InputPipeline&, Rng&);        \
  template CnnModel<T> zeros_like<T>(const CnnModel<T>&);                                     \
  template Tensor<T> prepare_inputs<T>(const CnnModel<T>&, const dataset::LabeledImageSet&,   \
                                       std::span<const std::size_t>);                         \
  template Tensor<T> prepare_inputs<T>(const CnnModel<T>&, const dataset::LabeledImageSet&);  \
  template Tensor<T> gather<T>(const Tensor<T>&, std::span<const std::size_t>);               \
  template Tensor<T> forward<T>(const CnnModel<T>&, const Tensor<T>&, bool, ForwardCache<T>*); \
  template Tensor<T> forward<T>(const CnnModel<T>&, const Tensor<T>&, Mode, ForwardCache<T>*); \
  template CnnModel<T> backward<T>(const CnnModel<T>&, const ForwardCache<T>&,                \
                                   const Tensor<T>&);                                         \
  template void update_running_stats<T>(CnnModel<T>&, const ForwardCache<T>&, double);        \
  template double l2_term<T>(const CnnModel<T>&);                                             \
  template LossResult<T> loss_and_grad<T>(const CnnModel<T>&, const Tensor<T>&,               \
                                          std::span<const int>, double, LossForm, bool);

MTV_INSTANTIATE_MODEL(float)
MTV_INSTANTIATE_MODEL(double)

#undef MTV_INSTANTIATE_MODEL

template CnnModel<double> model_cast<double, float>(const CnnModel<float>&);
template CnnModel<float> model_cast<float, double>(const CnnModel<double>&);
template CnnModel<float> model_cast<float, float>(const CnnModel<float>&);
template CnnModel<double> model_cast<double, double>(const CnnModel<double>&);

}  // namespace mtv::cnn
