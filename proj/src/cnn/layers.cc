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

#include "mtv/cnn/layers.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mtv::cnn {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ')';
  return out.str();
}

namespace {

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw ArgumentError(std::string(what) + ": expected rank " + std::to_string(rank) +
                        ", got shape " + shape_string(shape));
  }
}

// Output extent of a cross-correlation along one axis.
std::size_t conv_extent(std::size_t in, std::size_t k, int pad, int stride) {
  const long span = static_cast<long>(in) + 2L * pad - static_cast<long>(k);
  if (span < 0) throw ArgumentError("conv2d: kernel larger than padded input");
  return static_cast<std::size_t>(span / stride + 1);
}

// Range of output positions o with 0 <= o*stride + offset < in.
void valid_range(long in, long out, long stride, long offset, long& lo, long& hi) {
  lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  hi = in - 1 - offset < 0 ? 0 : (in - 1 - offset) / stride + 1;
  hi = std::min(hi, out);
  if (lo > hi) lo = hi;
}

}  // namespace

template <typename T>
void normalize_instance(std::span<const T> in, std::span<T> out) {
  if (in.size() != out.size()) throw ArgumentError("normalize_instance: size mismatch");
  if (in.empty()) throw ArgumentError("normalize_instance: empty image");
  double mean = 0.0;
  for (T v : in) mean += static_cast<double>(v);
  mean /= static_cast<double>(in.size());
  double var = 0.0;
  for (T v : in) {
    const double d = static_cast<double>(v) - mean;
    var += d * d;
  }
  var /= static_cast<double>(in.size());
  const double sd = std::sqrt(var);
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    throw NumericalError("normalize_instance: image has zero standard deviation");
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = static_cast<T>((static_cast<double>(in[i]) - mean) / sd);
  }
}

template <typename T>
std::vector<T> normalize_instance(std::span<const T> in) {
  std::vector<T> out(in.size());
  normalize_instance<T>(in, out);
  return out;
}

template <typename T>
void ConvLayer<T>::validate() const {
  require_rank(weights.shape(), 4, "conv2d weights");
  if (weights.dim(2) != weights.dim(3)) {
    throw ArgumentError("conv2d: kernel must be square, got " + shape_string(weights.shape()));
  }
  if (stride < 1 || padding < 0) throw ArgumentError("conv2d: bad stride or padding");
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  layer.validate();
  require_rank(input.shape(), 4, "conv2d input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (c != layer.in_channels()) {
    throw ArgumentError("conv2d: input has " + std::to_string(c) + " channels, layer expects " +
                        std::to_string(layer.in_channels()));
  }
  const std::size_t oc = layer.out_channels(), k = layer.kernel_size();
  const long s = layer.stride, p = layer.padding;
  const std::size_t ho = conv_extent(h, k, layer.padding, layer.stride);
  const std::size_t wo = conv_extent(w, k, layer.padding, layer.stride);
  Tensor<T> out({n, oc, ho, wo});
  const T* in = input.data();
  const T* wt = layer.weights.data();
  T* o = out.data();

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t f = 0; f < oc; ++f) {
      T* oplane = o + (b * oc + f) * ho * wo;
      for (std::size_t ic = 0; ic < c; ++ic) {
        const T* iplane = in + (b * c + ic) * h * w;
        for (std::size_t ky = 0; ky < k; ++ky) {
          long y_lo, y_hi;
          valid_range(static_cast<long>(h), static_cast<long>(ho), s,
                      static_cast<long>(ky) - p, y_lo, y_hi);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const T wv = wt[((f * c + ic) * k + ky) * k + kx];
            long x_lo, x_hi;
            const long xoff = static_cast<long>(kx) - p;
            valid_range(static_cast<long>(w), static_cast<long>(wo), s, xoff, x_lo, x_hi);
            for (long oy = y_lo; oy < y_hi; ++oy) {
              const T* irow = iplane + (oy * s + static_cast<long>(ky) - p) * static_cast<long>(w);
              T* orow = oplane + oy * static_cast<long>(wo);
              if (s == 1) {
                for (long ox = x_lo; ox < x_hi; ++ox) orow[ox] += wv * irow[ox + xoff];
              } else {
                for (long ox = x_lo; ox < x_hi; ++ox) orow[ox] += wv * irow[ox * s + xoff];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                     const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     Tensor<T>* grad_weights) {
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oc = layer.out_channels(), k = layer.kernel_size();
  const long s = layer.stride, p = layer.padding;
  const std::size_t ho = grad_output.dim(2), wo = grad_output.dim(3);
  if (grad_output.shape() != Shape{n, oc, ho, wo} ||
      ho != conv_extent(h, k, layer.padding, layer.stride)) {
    throw ArgumentError("conv2d_backward: gradient shape " + shape_string(grad_output.shape()));
  }
  if (grad_input) *grad_input = Tensor<T>(input.shape());
  if (grad_weights) *grad_weights = Tensor<T>(layer.weights.shape());
  const T* in = input.data();
  const T* wt = layer.weights.data();
  const T* go = grad_output.data();

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t f = 0; f < oc; ++f) {
      const T* gplane = go + (b * oc + f) * ho * wo;
      for (std::size_t ic = 0; ic < c; ++ic) {
        const T* iplane = in + (b * c + ic) * h * w;
        T* giplane = grad_input ? grad_input->data() + (b * c + ic) * h * w : nullptr;
        for (std::size_t ky = 0; ky < k; ++ky) {
          long y_lo, y_hi;
          valid_range(static_cast<long>(h), static_cast<long>(ho), s,
                      static_cast<long>(ky) - p, y_lo, y_hi);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::size_t widx = ((f * c + ic) * k + ky) * k + kx;
            const T wv = wt[widx];
            long x_lo, x_hi;
            const long xoff = static_cast<long>(kx) - p;
            valid_range(static_cast<long>(w), static_cast<long>(wo), s, xoff, x_lo, x_hi);
            T acc{0};
            for (long oy = y_lo; oy < y_hi; ++oy) {
              const long row = (oy * s + static_cast<long>(ky) - p) * static_cast<long>(w);
              const T* grow = gplane + oy * static_cast<long>(wo);
              const T* irow = iplane + row;
              for (long ox = x_lo; ox < x_hi; ++ox) acc += grow[ox] * irow[ox * s + xoff];
              if (giplane) {
                T* girow = giplane + row;
                for (long ox = x_lo; ox < x_hi; ++ox) girow[ox * s + xoff] += wv * grow[ox];
              }
            }
            if (grad_weights) (*grad_weights)[widx] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const BatchNorm<T>& bn, bool batch_stats,
                             BatchNormCache<std::type_identity_t<T>>* cache) {
  require_rank(x.shape(), 4, "batch_norm input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (c != bn.channels()) throw ArgumentError("batch_norm: channel mismatch");
  const double count = static_cast<double>(n * hw);
  std::vector<double> mean(c), var(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (batch_stats) {
      double sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) sum += static_cast<double>(plane[i]);
      }
      mean[ch] = sum / count;
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* plane = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const double d = static_cast<double>(plane[i]) - mean[ch];
          sq += d * d;
        }
      }
      var[ch] = sq / count;
    } else {
      mean[ch] = static_cast<double>(bn.running_mean[ch]);
      var[ch] = static_cast<double>(bn.running_var[ch]);
    }
    inv_std[ch] = 1.0 / std::sqrt(var[ch] + kBatchNormEpsilon);
  }

  Tensor<T> out(x.shape());
  Tensor<T> normalized(cache ? x.shape() : Shape{});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (b * c + ch) * hw;
      const T m = static_cast<T>(mean[ch]);
      const T is = static_cast<T>(inv_std[ch]);
      for (std::size_t i = 0; i < hw; ++i) {
        const T xhat = (x[base + i] - m) * is;
        if (cache) normalized[base + i] = xhat;
        out[base + i] = bn.gamma[ch] * xhat + bn.beta[ch];
      }
    }
  }
  if (cache) {
    cache->batch_stats = batch_stats;
    cache->normalized = std::move(normalized);
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm_backward(const Tensor<T>& grad_output, const BatchNorm<T>& bn,
                              const BatchNormCache<T>& cache, std::vector<T>& grad_gamma,
                              std::vector<T>& grad_beta) {
  const Tensor<T>& xhat = cache.normalized;
  if (grad_output.shape() != xhat.shape()) {
    throw ArgumentError("batch_norm_backward: gradient shape mismatch");
  }
  const std::size_t n = xhat.dim(0), c = xhat.dim(1), hw = xhat.dim(2) * xhat.dim(3);
  const double count = static_cast<double>(n * hw);
  grad_gamma.assign(c, T{0});
  grad_beta.assign(c, T{0});
  Tensor<T> grad_in(xhat.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += static_cast<double>(grad_output[base + i]);
        sum_dy_xhat += static_cast<double>(grad_output[base + i]) *
                       static_cast<double>(xhat[base + i]);
      }
    }
    grad_gamma[ch] = static_cast<T>(sum_dy_xhat);
    grad_beta[ch] = static_cast<T>(sum_dy);
    const double g = static_cast<double>(bn.gamma[ch]);
    const double is = cache.inv_std[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double dy = static_cast<double>(grad_output[base + i]);
        double dx;
        if (cache.batch_stats) {
          // dxhat = g * dy; dx = is/N (N dxhat - sum dxhat - xhat sum dxhat xhat)
          dx = g * is / count *
               (count * dy - sum_dy - static_cast<double>(xhat[base + i]) * sum_dy_xhat);
        } else {
          dx = g * is * dy;
        }
        grad_in[base + i] = static_cast<T>(dx);
      }
    }
  }
  return grad_in;
}

template <typename T>
void batch_norm_update_running(BatchNorm<T>& bn, const BatchNormCache<T>& cache,
                               double momentum) {
  if (!cache.batch_stats) return;
  for (std::size_t ch = 0; ch < bn.channels(); ++ch) {
    bn.running_mean[ch] = static_cast<T>(momentum * static_cast<double>(bn.running_mean[ch]) +
                                         (1.0 - momentum) * cache.mean[ch]);
    bn.running_var[ch] = static_cast<T>(momentum * static_cast<double>(bn.running_var[ch]) +
                                        (1.0 - momentum) * cache.var[ch]);
  }
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_output, const Tensor<T>& output) {
  Tensor<T> grad(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    grad[i] = output[i] > T{0} ? grad_output[i] : T{0};
  }
  return grad;
}

template <typename T>
Tensor<T> avg_pool2_forward(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "avg_pool2 input");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw ArgumentError("avg_pool2: spatial size must be even");
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor<T> out({n, c, ho, wo});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* in = x.data() + p * h * w;
    T* o = out.data() + p * ho * wo;
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t xx = 0; xx < wo; ++xx) {
        const T* a = in + 2 * y * w + 2 * xx;
        o[y * wo + xx] = ((a[0] + a[1]) + (a[w] + a[w + 1])) * T(0.25);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_output) {
  const std::size_t n = grad_output.dim(0), c = grad_output.dim(1);
  const std::size_t ho = grad_output.dim(2), wo = grad_output.dim(3);
  const std::size_t h = 2 * ho, w = 2 * wo;
  Tensor<T> grad({n, c, h, w});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* g = grad_output.data() + p * ho * wo;
    T* gi = grad.data() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) gi[y * w + xx] = g[(y / 2) * wo + xx / 2] * T(0.25);
    }
  }
  return grad;
}

template <typename T>
Tensor<T> pad_channels_forward(const Tensor<T>& x, std::size_t out_channels) {
  require_rank(x.shape(), 4, "pad_channels input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (out_channels < c) throw ArgumentError("pad_channels: cannot shrink channels");
  const std::size_t front = (out_channels - c) / 2;
  Tensor<T> out({n, out_channels, x.dim(2), x.dim(3)});
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(x.data() + b * c * hw, c * hw, out.data() + (b * out_channels + front) * hw);
  }
  return out;
}

template <typename T>
Tensor<T> pad_channels_backward(const Tensor<T>& grad_output, std::size_t in_channels) {
  const std::size_t n = grad_output.dim(0), oc = grad_output.dim(1);
  const std::size_t hw = grad_output.dim(2) * grad_output.dim(3);
  const std::size_t front = (oc - in_channels) / 2;
  Tensor<T> grad({n, in_channels, grad_output.dim(2), grad_output.dim(3)});
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(grad_output.data() + (b * oc + front) * hw, in_channels * hw,
                grad.data() + b * in_channels * hw);
  }
  return grad;
}

template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x) {
  require_rank(x.shape(), 4, "global_avg_pool input");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    double sum = 0.0;
    const T* plane = x.data() + p * hw;
    for (std::size_t i = 0; i < hw; ++i) sum += static_cast<double>(plane[i]);
    out[p] = static_cast<T>(sum / static_cast<double>(hw));
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_output, const Shape& input_shape) {
  const std::size_t hw = input_shape.at(2) * input_shape.at(3);
  Tensor<T> grad(input_shape);
  const T scale = static_cast<T>(1.0 / static_cast<double>(hw));
  for (std::size_t p = 0; p < grad_output.size(); ++p) {
    std::fill_n(grad.data() + p * hw, hw, grad_output[p] * scale);
  }
  return grad;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseLayer<T>& layer) {
  require_rank(x.shape(), 2, "dense input");
  const std::size_t n = x.dim(0), f = x.dim(1), k = layer.weights.dim(0);
  if (layer.weights.dim(1) != f) throw ArgumentError("dense: feature mismatch");
  Tensor<T> out({n, k});
  for (std::size_t b = 0; b < n; ++b) {
    const T* xi = x.data() + b * f;
    for (std::size_t j = 0; j < k; ++j) {
      const T* wj = layer.weights.data() + j * f;
      T acc = layer.bias[j];
      for (std::size_t i = 0; i < f; ++i) acc += wj[i] * xi[i];
      out[b * k + j] = acc;
    }
  }
  return out;
}

template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const DenseLayer<T>& layer,
                         const Tensor<T>& grad_output, Tensor<T>& grad_weights,
                         std::vector<T>& grad_bias) {
  const std::size_t n = x.dim(0), f = x.dim(1), k = layer.weights.dim(0);
  grad_weights = Tensor<T>(layer.weights.shape());
  grad_bias.assign(k, T{0});
  Tensor<T> grad_in(x.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const T* xi = x.data() + b * f;
    T* gi = grad_in.data() + b * f;
    for (std::size_t j = 0; j < k; ++j) {
      const T g = grad_output[b * k + j];
      grad_bias[j] += g;
      const T* wj = layer.weights.data() + j * f;
      T* gwj = grad_weights.data() + j * f;
      for (std::size_t i = 0; i < f; ++i) {
        gwj[i] += g * xi[i];
        gi[i] += g * wj[i];
      }
    }
  }
  return grad_in;
}

template <typename T>
std::vector<double> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                                          double scale, Tensor<std::type_identity_t<T>>* grad) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ArgumentError("softmax_cross_entropy: label count mismatch");
  std::vector<double> losses(n);
  if (grad) *grad = Tensor<T>(logits.shape());
  std::vector<double> p(k);
  for (std::size_t b = 0; b < n; ++b) {
    const T* z = logits.data() + b * k;
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ArgumentError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    }
    double zmax = static_cast<double>(z[0]);
    for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, static_cast<double>(z[j]));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(static_cast<double>(z[j]) - zmax);
      sum += p[j];
    }
    losses[b] = std::log(sum) + zmax - static_cast<double>(z[y]);
    if (grad) {
      for (std::size_t j = 0; j < k; ++j) {
        const double g = p[j] / sum - (static_cast<int>(j) == y ? 1.0 : 0.0);
        (*grad)[b * k + j] = static_cast<T>(scale * g);
      }
    }
  }
  return losses;
}

#define MTV_INSTANTIATE_LAYERS(T)                                                           \
  template void normalize_instance<T>(std::span<const T>, std::span<T>);                    \
  template std::vector<T> normalize_instance<T>(std::span<const T>);                        \
  template struct ConvLayer<T>;                                                             \
  template Tensor<T> conv2d_forward<T>(const Tensor<T>&, const ConvLayer<T>&);              \
  template void conv2d_backward<T>(const Tensor<T>&, const ConvLayer<T>&, const Tensor<T>&, \
                                   Tensor<T>*, Tensor<T>*);                                 \
  template Tensor<T> batch_norm_forward<T>(const Tensor<T>&, const BatchNorm<T>&, bool,     \
                                           BatchNormCache<T>*);                             \
  template Tensor<T> batch_norm_backward<T>(const Tensor<T>&, const BatchNorm<T>&,          \
                                            const BatchNormCache<T>&, std::vector<T>&,      \
                                            std::vector<T>&);                               \
  template void batch_norm_update_running<T>(BatchNorm<T>&, const BatchNormCache<T>&,       \
                                             double);                                       \
  template Tensor<T> relu_forward<T>(const Tensor<T>&);                                     \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> avg_pool2_forward<T>(const Tensor<T>&);                                \
  template Tensor<T> avg_pool2_backward<T>(const Tensor<T>&);                               \
  template Tensor<T> pad_channels_forward<T>(const Tensor<T>&, std::size_t);                \
  template Tensor<T> pad_channels_backward<T>(const Tensor<T>&, std::size_t);               \
  template Tensor<T> global_avg_pool_forward<T>(const Tensor<T>&);                          \
  template Tensor<T> global_avg_pool_backward<T>(const Tensor<T>&, const Shape&);            \
  template Tensor<T> dense_forward<T>(const Tensor<T>&, const DenseLayer<T>&);              \
  template Tensor<T> dense_backward<T>(const Tensor<T>&, const DenseLayer<T>&,              \
                                       const Tensor<T>&, Tensor<T>&, std::vector<T>&);      \
  template std::vector<double> softmax_cross_entropy<T>(const Tensor<T>&,                   \
                                                        std::span<const int>, double,       \
                                                        Tensor<T>*);

MTV_INSTANTIATE_LAYERS(float)
MTV_INSTANTIATE_LAYERS(double)

#undef MTV_INSTANTIATE_LAYERS

}  // namespace mtv::cnn
