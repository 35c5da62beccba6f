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

#ifndef ROADAUDIT_PREDICTOR_HPP_
#define ROADAUDIT_PREDICTOR_HPP_

#include <memory>
#include <string>

#include "roadaudit/dataset.hpp"
#include "roadaudit/segnet.hpp"

namespace roadaudit {

// Frame -> predicted class mask at the frame's own resolution.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual Mask predict(const Frame& frame) = 0;
  virtual std::string name() const = 0;
};

// Runs the network at its training input size and resizes the decoded mask
// back to the frame (nearest neighbour).
class ModelPredictor : public Predictor {
 public:
  ModelPredictor(std::unique_ptr<SegModel<float>> model, int input_height, int input_width);
  Mask predict(const Frame& frame) override;
  std::string name() const override;
  SegModel<float>& model() { return *model_; }

 private:
  std::unique_ptr<SegModel<float>> model_;
  int input_height_;
  int input_width_;
};

// Returns the frame's ground-truth mask. Plumbing check for eval and audit.
class OracleFramePredictor : public Predictor {
 public:
  Mask predict(const Frame& frame) override { return frame.mask; }
  std::string name() const override { return "oracle"; }
};

// "oracle" selects OracleFramePredictor; anything else is a checkpoint path.
// Checkpoints record the input size they were trained at.
std::unique_ptr<Predictor> open_predictor(const std::string& checkpoint_or_oracle);

}  // namespace roadaudit

#endif  // ROADAUDIT_PREDICTOR_HPP_
