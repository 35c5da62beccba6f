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

#include "roadaudit/predictor.hpp"

#include "json.hpp"

namespace roadaudit {

ModelPredictor::ModelPredictor(std::unique_ptr<SegModel<float>> model, int input_height,
                               int input_width)
    : model_(std::move(model)), input_height_(input_height), input_width_(input_width) {
  if (!model_) fail(ErrorKind::kContract, "ModelPredictor needs a model");
  if (input_height % kDownsampleFactor != 0 || input_width % kDownsampleFactor != 0 ||
      input_height <= 0 || input_width <= 0) {
    fail(ErrorKind::kConfig, "model input size must be positive multiples of 8");
  }
}

Mask ModelPredictor::predict(const Frame& frame) {
  const auto x = images_to_tensor({&frame.image}, input_height_, input_width_);
  const auto out = model_->forward(x, false);
  const Mask small = decode_prediction<float>(out, 0, model_->is_cascade());
  return resize_mask_nearest(small, frame.image.height, frame.image.width);
}

std::string ModelPredictor::name() const { return std::string(model_kind_name(model_->config().kind)); }

std::unique_ptr<Predictor> open_predictor(const std::string& checkpoint_or_oracle) {
  if (checkpoint_or_oracle == "oracle") return std::make_unique<OracleFramePredictor>();
  std::string extra;
  auto model = load_checkpoint(checkpoint_or_oracle, &extra);
  int h = 64, w = 128;
  try {
    const auto j = nlohmann::json::parse(extra);
    h = j.value("input_height", h);
    w = j.value("input_width", w);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kData, std::string("checkpoint metadata is malformed: ") + e.what());
  }
  return std::make_unique<ModelPredictor>(std::move(model), h, w);
}

}  // namespace roadaudit
