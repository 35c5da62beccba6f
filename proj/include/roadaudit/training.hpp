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

#ifndef ROADAUDIT_TRAINING_HPP_
#define ROADAUDIT_TRAINING_HPP_

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "roadaudit/dataset.hpp"
#include "roadaudit/segnet.hpp"

namespace roadaudit {

enum class TrainSchedule {
  kTwoStep,  // road subnetwork first, then both jointly
  kJoint,    // both subnetworks from the first epoch
};

struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 4;
  int input_width = 128;
  int input_height = 64;
  // Validation road mIoU that ends step 1.
  double road_phase_target = 0.85;
  int max_epochs_road = 50;
  int max_epochs_joint = 250;
  TrainSchedule schedule = TrainSchedule::kTwoStep;
  // Per-class loss weights total/(present * count) from the training masks.
  bool inverse_frequency_weights = false;
  // Stop step 2 once train defect mIoU reaches this value; 0 disables.
  double target_train_miou = 0.0;
  bool track_train_miou = true;
  int checkpoint_every = 0;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Desk-scale defaults: batch 4, 128 x 64 inputs, unweighted loss.
  static TrainConfig toy() { return TrainConfig{}; }
  // 1024 x 512 inputs, batch 14.
  static TrainConfig full_scale();
};

void validate_train_config(const TrainConfig& config);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text, TrainConfig base = TrainConfig{});

// Road-positive wherever the class is not void.
Mask road_ground_truth(const Mask& class_mask);

template <typename T>
struct LossResult {
  T loss = T(0);
  Tensor<T> grad;  // d loss / d logits
  std::int64_t counted = 0;
  bool all_ignored = false;
};

// Mean (optionally class-weighted) -log softmax(target) over pixels whose
// target differs from `ignore_label`. Returns loss 0 and all_ignored when no
// pixel counts. Throws kNumerical on non-finite logits.
template <typename T>
LossResult<T> masked_cross_entropy(const Tensor<T>& logits, std::span<const Mask* const> targets,
                                   std::optional<int> ignore_label,
                                   std::span<const double> class_weights = {});

template <typename T>
class Adam {
 public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  // Updates exactly the given parameters; others keep values and state.
  void step(const nn::ParamList<T>& params);
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  struct State {
    std::vector<double> m, v;
    long t = 0;
  };
  double lr_, beta1_, beta2_, eps_;
  std::unordered_map<const nn::Parameter<T>*, State> state_;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across both steps
  int step = 2;   // 1 = road only, 2 = joint (baseline always 2)
  double road_loss = 0.0;
  double defect_loss = 0.0;
  std::optional<double> val_road_miou;
  std::optional<double> val_defect_miou;
  std::optional<double> train_defect_miou;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  bool road_target_reached = false;
  int road_epochs = 0;

  // First epoch whose train defect mIoU reached `threshold`.
  std::optional<int> first_epoch_reaching(double threshold) const;
  std::optional<double> final_train_defect_miou() const;
  std::string to_csv() const;
};

struct TrainData {
  std::vector<const Frame*> train;
  std::vector<const Frame*> val;
};

// Per-frame class-level defect mIoU and binary road mIoU of a model on a
// frame set, scored at the model input resolution.
struct QuickScores {
  std::optional<double> road_miou;
  std::optional<double> defect_miou;
};
QuickScores score_frames(SegModel<float>& model, const std::vector<const Frame*>& frames,
                         int input_height, int input_width);

using EpochCallback = std::function<void(const EpochRecord&, SegModel<float>&)>;

// Two-step (or joint) training. Deterministic in (data, config, model init).
// Throws kNumerical with the epoch index on divergence.
TrainHistory train_model(SegModel<float>& model, const TrainData& data, const TrainConfig& config,
                         const EpochCallback& on_epoch = nullptr);

}  // namespace roadaudit

#endif  // ROADAUDIT_TRAINING_HPP_
