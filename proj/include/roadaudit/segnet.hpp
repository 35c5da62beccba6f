/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ROADAUDIT_SEGNET_HPP_
#define ROADAUDIT_SEGNET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roadaudit/grid.hpp"
#include "roadaudit/nn.hpp"
#include "roadaudit/taxonomy.hpp"
#include "roadaudit/tensor.hpp"

namespace roadaudit {

enum class ModelKind { kCascade, kBaseline };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(std::string_view name);

inline constexpr int kDownsampleFactor = 8;
inline constexpr int kRoadClasses = 2;

struct ModelConfig {
  ModelKind kind = ModelKind::kCascade;
  // Channel widths at 1/2, 1/4 and 1/8 resolution.
  std::array<int, 3> widths = {16, 32, 64};
  int mid_blocks = 2;      // residual blocks at 1/4
  int deep_blocks = 2;     // residual blocks at 1/8 (dilated)
  int decoder_blocks = 2;  // residual blocks after each upsampler
  std::vector<int> pool_scales = {1, 2, 4, 8};
  int pool_channels = 0;  // 0 selects max(1, C / 4)
  std::uint64_t seed = 1;

  // 16 base channels, 2 blocks per stage.
  static ModelConfig toy();
  // Widths and depths of the published backbone.
  static ModelConfig full();
  // Smallest useful instantiation, for gradient checks.
  static ModelConfig tiny();
};

void validate_model_config(const ModelConfig& config);
std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

// Encoder / optional spatial feature pooling / decoder.
template <typename T>
class SegNet {
 public:
  SegNet(const std::string& name, const std::array<int, 3>& widths, int mid_blocks,
         int deep_blocks, int decoder_blocks, int classes,
         const std::vector<int>* pool_scales, int pool_channels);

  Tensor<T> forward(const Tensor<T>& image, bool train);
  // Returns d(image) when need_dx.
  Tensor<T> backward(const Tensor<T>& d_logits, bool need_dx);
  void init(Rng& rng);
  void collect(nn::ParamList<T>& out);
  int classes() const { return classes_; }

 private:
  std::string name_;
  int classes_;
  std::vector<std::unique_ptr<nn::Layer<T>>> layers_;
  std::vector<std::string> layer_names_;
};

// Soft gate: gated[n, ch, y, x] = image[n, ch, y, x] * road_prob[n, 0, y, x].
// road_prob must be N x 1 x H x W with values in [0, 1] (kContract otherwise).
template <typename T>
Tensor<T> attention_apply(const Tensor<T>& image, const Tensor<T>& road_prob);

// Per-pixel softmax over the channel axis.
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits);

// Standalone spatial feature pooling on a C x H x W (or N x C x H x W) map.
// With identity projection each branch carries the raw pooled values.
template <typename T>
Tensor<T> spatial_feature_pool(const Tensor<T>& features, const std::vector<int>& scales,
                               bool identity_projection, int branch_channels = 0,
                               std::uint64_t seed = 1);

// The full model: cascade (road net -> gate -> defect net with pooling) or
// single-stage baseline (defect-shaped net without pooling or gate).
template <typename T>
class SegModel {
 public:
  explicit SegModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  bool is_cascade() const { return config_.kind == ModelKind::kCascade; }

  struct Output {
    Tensor<T> road_logits;    // N x 2 x H x W (cascade only)
    Tensor<T> road_prob;      // N x 1 x H x W (cascade only)
    Tensor<T> defect_logits;  // N x 11 x H x W
  };

  // image: N x 3 x H x W in [0, 1]; H, W divisible by 8.
  Tensor<T> forward_road(const Tensor<T>& image, bool train);
  Output forward(const Tensor<T>& image, bool train);

  // Gradients accumulate into parameter .grad fields.
  void backward_road(const Tensor<T>& d_road_logits);
  // d_road_logits may be empty (defect loss only).
  void backward(const Tensor<T>& d_road_logits, const Tensor<T>& d_defect_logits);

  nn::ParamList<T> parameters();
  nn::ParamList<T> road_parameters();
  nn::ParamList<T> defect_parameters();
  std::size_t parameter_count();
  void zero_grad();

  // Replaces the road probability with a constant (tests, ablations).
  void set_gate_override(std::optional<T> value) { gate_override_ = value; }
  // Binarize the road probability at 0.5 in inference.
  void set_hard_gate(bool hard) { hard_gate_ = hard; }

 private:
  void check_input(const Tensor<T>& image) const;

  ModelConfig config_;
  std::unique_ptr<SegNet<T>> road_;
  std::unique_ptr<SegNet<T>> defect_;
  std::optional<T> gate_override_;
  bool hard_gate_ = false;
  Tensor<T> image_;      // cached for the gate backward
  Tensor<T> road_prob_;  // cached for the gate backward
};

// Turns model output for sample n into a class-id mask. Cascade: pixels
// with road probability < 0.5 are void, others take the arg-max over the ten
// non-void classes. Baseline: arg-max over all eleven outputs.
template <typename T>
Mask decode_prediction(const typename SegModel<T>::Output& out, int n, bool cascade);

// Packs 8-bit RGB images into an N x 3 x H x W tensor scaled to [0, 1],
// resizing bilinearly to (height, width) if needed.
Tensor<float> images_to_tensor(const std::vector<const Image*>& images, int height, int width);
Mask resize_mask_nearest(const Mask& mask, int height, int width);

// Checkpoint archive: magic, version tag, JSON configuration record, then
// named float32 tensors. Loading requires exact name and shape agreement.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(SegModel<float>& model, const std::filesystem::path& path,
                     const std::string& extra_json = "{}");
std::unique_ptr<SegModel<float>> load_checkpoint(const std::filesystem::path& path,
                                                 std::string* extra_json = nullptr);

}  // namespace roadaudit

#endif  // ROADAUDIT_SEGNET_HPP_
