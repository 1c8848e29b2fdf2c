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

// Small pre-activation residual network:
//
//   input -> conv3x3 -> [block]* -> BN -> ReLU -> global avg pool -> dense
//   block: [avgpool2 if downsampling] -> BN -> ReLU -> conv3x3 -> BN -> ReLU
//          -> conv3x3, plus the (channel zero-padded) block input
//
// Downsampling uses average pooling rather than strided convolution so the
// network commutes exactly with the eight square-grid symmetries.

#ifndef MTV_CNN_MODEL_H_
#define MTV_CNN_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtv/cnn/layers.h"
#include "mtv/dataset.h"
#include "mtv/rng.h"

namespace mtv::cnn {

struct Architecture {
  int input_channels = 3;
  int image_size = 16;
  int base_width = 8;
  int stages = 2;
  int blocks_per_stage = 1;
  int num_classes = 10;
  int kernel_size = 3;
  bool skip_connections = true;

  int stage_width(int stage) const { return base_width << stage; }
  void validate() const;
  bool operator==(const Architecture&) const = default;
};

// How raw pixels become network input. The fields other than the defaults
// exist to express input-side faults.
struct InputPipeline {
  // Extra all-zero planes appended after normalization; the first conv
  // then has input_channels + zero_channels inputs.
  int zero_channels = 0;
  // A constant plane of this value joins the normalization statistics and
  // is dropped afterwards.
  std::optional<float> stats_pad_value;
  bool operator==(const InputPipeline&) const = default;
};

template <typename T>
struct ResidualBlock {
  bool downsample = false;
  BatchNorm<T> bn1;
  ConvLayer<T> conv1;
  BatchNorm<T> bn2;
  ConvLayer<T> conv2;
};

// Non-owning view of one learnable array.
template <typename T>
struct ParamRef {
  std::string name;
  std::span<T> values;
  bool decays = false;  // included in the weight-decay term
};

template <typename T>
struct CnnModel {
  Architecture arch;
  InputPipeline pipeline;
  bool eval_uses_batch_stats = false;

  ConvLayer<T> stem;
  std::vector<ResidualBlock<T>> blocks;
  BatchNorm<T> head_bn;
  DenseLayer<T> head;

  int network_input_channels() const { return arch.input_channels + pipeline.zero_channels; }
  // Learnable parameters in a fixed order; running statistics excluded.
  std::vector<ParamRef<T>> parameters();
  std::vector<ParamRef<const T>> parameters() const;
  // Batch-norm running statistics, same fixed order.
  std::vector<ParamRef<T>> buffers();
  std::vector<ParamRef<const T>> buffers() const;
};

// Fan-in scaled normal initialization drawn from rng in parameter order.
template <typename T>
CnnModel<T> init_model(const Architecture& arch, const InputPipeline& pipeline, Rng& rng);
// Same structure, every learnable parameter zero (gradient container).
template <typename T>
CnnModel<T> zeros_like(const CnnModel<T>& model);
template <typename To, typename From>
CnnModel<To> model_cast(const CnnModel<From>& model);

// Normalizes each raw image and applies the pipeline, producing a
// (N, network_input_channels, H, W) batch.
template <typename T>
Tensor<T> prepare_inputs(const CnnModel<T>& model, const dataset::LabeledImageSet& set,
                         std::span<const std::size_t> indices);
template <typename T>
Tensor<T> prepare_inputs(const CnnModel<T>& model, const dataset::LabeledImageSet& set);
// Gathers rows of an already prepared batch.
template <typename T>
Tensor<T> gather(const Tensor<T>& batch, std::span<const std::size_t> indices);

enum class Mode { kTrain, kEval };

template <typename T>
struct BlockCache {
  Shape pre_pool_shape;
  Tensor<T> input;
  BatchNormCache<T> bn1;
  Tensor<T> relu1;
  Tensor<T> conv1;
  BatchNormCache<T> bn2;
  Tensor<T> relu2;
};

template <typename T>
struct ForwardCache {
  Tensor<T> input;
  std::vector<BlockCache<T>> blocks;
  Shape trunk_shape;
  BatchNormCache<T> head_bn;
  Tensor<T> head_relu;
  Tensor<T> pooled;
};

// batch_stats chooses batch-norm statistics explicitly.
template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& input, bool batch_stats,
                  ForwardCache<T>* cache = nullptr);
// Train mode uses batch statistics; eval mode the running ones unless the
// model is configured otherwise.
template <typename T>
Tensor<T> forward(const CnnModel<T>& model, const Tensor<T>& input, Mode mode,
                  ForwardCache<T>* cache = nullptr);

// Gradients of every learnable parameter given d loss / d logits.
template <typename T>
CnnModel<T> backward(const CnnModel<T>& model, const ForwardCache<T>& cache,
                     const Tensor<T>& grad_logits);

template <typename T>
void update_running_stats(CnnModel<T>& model, const ForwardCache<T>& cache, double momentum);

// Objective variants. kStandard is mean cross-entropy + lambda * L2, where
// L2 = 1/2 * sum of squared conv and dense weights.
enum class LossForm {
  kStandard,
  kMinusDecay,          // CE - lambda * L2
  kDecayOverNorm,       // CE + lambda / L2
  kDecayMinusNorm,      // CE + lambda - L2
  kSummedCrossEntropy,  // sum CE + lambda * L2
};

std::string to_string(LossForm form);
LossForm loss_form_from_string(const std::string& name);

template <typename T>
double l2_term(const CnnModel<T>& model);

template <typename T>
struct LossResult {
  double loss = 0.0;
  double cross_entropy = 0.0;  // mean over the batch
  CnnModel<T> grads;
  ForwardCache<T> cache;
};

template <typename T>
LossResult<T> loss_and_grad(const CnnModel<T>& model, const Tensor<T>& input,
                            std::span<const int> labels, double weight_decay,
                            LossForm form = LossForm::kStandard, bool batch_stats = true);

}  // namespace mtv::cnn

#endif  // MTV_CNN_MODEL_H_
