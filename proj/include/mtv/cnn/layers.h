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

// Layer primitives with explicit forward and backward passes. All functions
// are instantiated for float (training) and double (finite-difference
// shadow). Reductions run sequentially in a fixed order; statistics are
// accumulated in double regardless of T.

#ifndef MTV_CNN_LAYERS_H_
#define MTV_CNN_LAYERS_H_

#include <span>
#include <type_traits>
#include <vector>

#include "mtv/cnn/tensor.h"

namespace mtv::cnn {

// Per-instance standardization (x - mean) / stddev over every value of one
// image. Throws NumericalError for a constant image.
template <typename T>
void normalize_instance(std::span<const T> in, std::span<T> out);
template <typename T>
std::vector<T> normalize_instance(std::span<const T> in);

// Cross-correlation with a square kernel and symmetric zero padding.
template <typename T>
struct ConvLayer {
  Tensor<T> weights;  // (out, in, k, k)
  int stride = 1;
  int padding = 0;

  std::size_t out_channels() const { return weights.dim(0); }
  std::size_t in_channels() const { return weights.dim(1); }
  std::size_t kernel_size() const { return weights.dim(2); }
  void validate() const;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer);
// grad_input may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                     const Tensor<T>& grad_output, Tensor<T>* grad_input,
                     Tensor<T>* grad_weights);

template <typename T>
struct BatchNorm {
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNorm(std::size_t channels = 0)
      : gamma(channels, T{1}), beta(channels, T{0}),
        running_mean(channels, T{0}), running_var(channels, T{1}) {}
  std::size_t channels() const { return gamma.size(); }
  bool operator==(const BatchNorm&) const = default;
};

inline constexpr double kBatchNormEpsilon = 1e-5;

template <typename T>
struct BatchNormCache {
  bool batch_stats = true;
  Tensor<T> normalized;
  std::vector<double> mean;
  std::vector<double> var;  // biased batch variance, or the running one
  std::vector<double> inv_std;
};

// batch_stats selects statistics of the current batch (training) or the
// running estimates (inference).
template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const BatchNorm<T>& bn,
                             bool batch_stats, BatchNormCache<std::type_identity_t<T>>* cache);
template <typename T>
Tensor<T> batch_norm_backward(const Tensor<T>& grad_output, const BatchNorm<T>& bn,
                              const BatchNormCache<T>& cache,
                              std::vector<T>& grad_gamma, std::vector<T>& grad_beta);
// running = momentum * running + (1 - momentum) * batch.
template <typename T>
void batch_norm_update_running(BatchNorm<T>& bn, const BatchNormCache<T>& cache,
                               double momentum);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_output, const Tensor<T>& output);

// 2x2 average pooling with stride 2; H and W must be even.
template <typename T>
Tensor<T> avg_pool2_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> avg_pool2_backward(const Tensor<T>& grad_output);

// Zero channels split evenly before and after the existing ones.
template <typename T>
Tensor<T> pad_channels_forward(const Tensor<T>& x, std::size_t out_channels);
template <typename T>
Tensor<T> pad_channels_backward(const Tensor<T>& grad_output, std::size_t in_channels);

// (N, C, H, W) -> (N, C).
template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_output, const Shape& input_shape);

template <typename T>
struct DenseLayer {
  Tensor<T> weights;  // (classes, features)
  std::vector<T> bias;
  bool operator==(const DenseLayer&) const = default;
};

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseLayer<T>& layer);
template <typename T>
Tensor<T> dense_backward(const Tensor<T>& x, const DenseLayer<T>& layer,
                         const Tensor<T>& grad_output, Tensor<T>& grad_weights,
                         std::vector<T>& grad_bias);

// Per-instance cross-entropy of softmax(logits) against labels. If grad is
// non-null it receives d(scale * sum of losses)/d logits.
template <typename T>
std::vector<double> softmax_cross_entropy(const Tensor<T>& logits,
                                          std::span<const int> labels, double scale,
                                          Tensor<std::type_identity_t<T>>* grad);

}  // namespace mtv::cnn

#endif  // MTV_CNN_LAYERS_H_
