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

#include "roadaudit/segnet.hpp"

#include <cmath>

#include "json.hpp"

namespace roadaudit {

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::kCascade ? "cascade" : "baseline";
}

ModelKind model_kind_from_name(std::string_view name) {
  if (name == "cascade") return ModelKind::kCascade;
  if (name == "baseline") return ModelKind::kBaseline;
  fail(ErrorKind::kConfig, "unknown model kind '" + std::string(name) +
                               "' (expected cascade or baseline)");
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.widths = {16, 64, 128};
  c.mid_blocks = 5;
  c.deep_blocks = 8;
  c.decoder_blocks = 2;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.widths = {4, 6, 8};
  c.mid_blocks = 1;
  c.deep_blocks = 1;
  c.decoder_blocks = 0;
  c.pool_scales = {1, 2};
  return c;
}

void validate_model_config(const ModelConfig& c) {
  if (c.widths[0] <= 3 || c.widths[1] <= c.widths[0] || c.widths[2] <= c.widths[1]) {
    fail(ErrorKind::kConfig, "model widths must be strictly increasing and exceed 3");
  }
  if (c.mid_blocks < 0 || c.deep_blocks < 0 || c.decoder_blocks < 0) {
    fail(ErrorKind::kConfig, "block counts must be non-negative");
  }
  if (c.kind == ModelKind::kCascade) {
    if (c.pool_scales.empty()) fail(ErrorKind::kConfig, "cascade model needs pooling scales");
    for (int s : c.pool_scales) {
      if (s < 1) fail(ErrorKind::kConfig, "pooling scales must be >= 1");
    }
  }
  if (c.pool_channels < 0) fail(ErrorKind::kConfig, "pool_channels must be >= 0");
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = model_kind_name(c.kind);
  j["widths"] = c.widths;
  j["mid_blocks"] = c.mid_blocks;
  j["deep_blocks"] = c.deep_blocks;
  j["decoder_blocks"] = c.decoder_blocks;
  j["pool_scales"] = c.pool_scales;
  j["pool_channels"] = c.pool_channels;
  j["seed"] = c.seed;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("preset")) {
      const auto preset = j.at("preset").get<std::string>();
      if (preset == "toy") {
        c = ModelConfig::toy();
      } else if (preset == "full") {
        c = ModelConfig::full();
      } else if (preset == "tiny") {
        c = ModelConfig::tiny();
      } else {
        fail(ErrorKind::kConfig, "unknown model preset '" + preset + "'");
      }
    }
    if (j.contains("kind")) c.kind = model_kind_from_name(j.at("kind").get<std::string>());
    if (j.contains("widths")) c.widths = j.at("widths").get<std::array<int, 3>>();
    if (j.contains("mid_blocks")) c.mid_blocks = j.at("mid_blocks").get<int>();
    if (j.contains("deep_blocks")) c.deep_blocks = j.at("deep_blocks").get<int>();
    if (j.contains("decoder_blocks")) c.decoder_blocks = j.at("decoder_blocks").get<int>();
    if (j.contains("pool_scales")) c.pool_scales = j.at("pool_scales").get<std::vector<int>>();
    if (j.contains("pool_channels")) c.pool_channels = j.at("pool_channels").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed model config: ") + e.what());
  }
  validate_model_config(c);
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
SegNet<T>::SegNet(const std::string& name, const std::array<int, 3>& widths, int mid_blocks,
                  int deep_blocks, int decoder_blocks, int classes,
                  const std::vector<int>* pool_scales, int pool_channels)
    : name_(name), classes_(classes) {
  auto add = [&](std::string layer_name, std::unique_ptr<nn::Layer<T>> layer) {
    layer_names_.push_back(name_ + "." + layer_name);
    layers_.push_back(std::move(layer));
  };
  add("enc.down1", std::make_unique<nn::DownsamplerBlock<T>>(3, widths[0]));
  add("enc.down2", std::make_unique<nn::DownsamplerBlock<T>>(widths[0], widths[1]));
  for (int i = 0; i < mid_blocks; ++i) {
    add("enc.mid" + std::to_string(i), std::make_unique<nn::NonBottleneck1D<T>>(widths[1], 1));
  }
  add("enc.down3", std::make_unique<nn::DownsamplerBlock<T>>(widths[1], widths[2]));
  static constexpr int kDilations[] = {2, 4, 8, 16};
  for (int i = 0; i < deep_blocks; ++i) {
    add("enc.deep" + std::to_string(i),
        std::make_unique<nn::NonBottleneck1D<T>>(widths[2], kDilations[i % 4]));
  }
  int channels = widths[2];
  if (pool_scales) {
    const int branch = pool_channels > 0 ? pool_channels : nn::default_branch_channels(channels);
    auto pool = std::make_unique<nn::SpatialFeaturePooling<T>>(channels, *pool_scales, branch);
    channels = pool->out_channels();
    add("pool", std::move(pool));
  }
  add("dec.up1", std::make_unique<nn::UpsamplerBlock<T>>(channels, widths[1]));
  for (int i = 0; i < decoder_blocks; ++i) {
    add("dec.a" + std::to_string(i), std::make_unique<nn::NonBottleneck1D<T>>(widths[1], 1));
  }
  add("dec.up2", std::make_unique<nn::UpsamplerBlock<T>>(widths[1], widths[0]));
  for (int i = 0; i < decoder_blocks; ++i) {
    add("dec.b" + std::to_string(i), std::make_unique<nn::NonBottleneck1D<T>>(widths[0], 1));
  }
  add("head", std::make_unique<nn::ConvTranspose2d<T>>(widths[0], classes, 2, 2, 0, 0,
                                                        std::sqrt(0.5)));
}

template <typename T>
Tensor<T> SegNet<T>::forward(const Tensor<T>& image, bool train) {
  Tensor<T> x = layers_.front()->forward(image, train);
  for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->forward(x, train);
  return x;
}

template <typename T>
Tensor<T> SegNet<T>::backward(const Tensor<T>& d_logits, bool need_dx) {
  Tensor<T> d = d_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    d = layers_[i]->backward(d, i > 0 || need_dx);
  }
  return d;
}

template <typename T>
void SegNet<T>::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

template <typename T>
void SegNet<T>::collect(nn::ParamList<T>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(layer_names_[i], out);
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> attention_apply(const Tensor<T>& image, const Tensor<T>& road_prob) {
  if (image.rank() != 4 || road_prob.rank() != 4 || road_prob.dim(1) != 1 ||
      image.dim(0) != road_prob.dim(0) || image.dim(2) != road_prob.dim(2) ||
      image.dim(3) != road_prob.dim(3)) {
    fail(ErrorKind::kShape, "attention_apply: image " + image.shape_string() +
                                " and road probability " + road_prob.shape_string() +
                                " do not agree");
  }
  for (const T p : road_prob.values()) {
    if (!(p >= T(0) && p <= T(1))) {
      fail(ErrorKind::kContract, "attention_apply: road probability outside [0, 1]");
    }
  }
  const int n = image.dim(0), c = image.dim(1), h = image.dim(2), w = image.dim(3);
  Tensor<T> gated(image.shape());
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          gated.at(s, ch, y, x) = image.at(s, ch, y, x) * road_prob.at(s, 0, y, x);
        }
      }
    }
  }
  return gated;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& logits) {
  const int n = logits.dim(0), k = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
  Tensor<T> p(logits.shape());
  for (int s = 0; s < n; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T mx = logits.at(s, 0, y, x);
        for (int c = 1; c < k; ++c) mx = std::max(mx, logits.at(s, c, y, x));
        T sum = T(0);
        for (int c = 0; c < k; ++c) {
          const T e = std::exp(logits.at(s, c, y, x) - mx);
          p.at(s, c, y, x) = e;
          sum += e;
        }
        for (int c = 0; c < k; ++c) p.at(s, c, y, x) /= sum;
      }
    }
  }
  return p;
}

template <typename T>
Tensor<T> spatial_feature_pool(const Tensor<T>& features, const std::vector<int>& scales,
                               bool identity_projection, int branch_channels,
                               std::uint64_t seed) {
  Tensor<T> x = features;
  const bool unbatched = features.rank() == 3;
  if (unbatched) {
    x = Tensor<T>({1, features.dim(0), features.dim(1), features.dim(2)});
    std::copy(features.data(), features.data() + features.size(), x.data());
  } else if (features.rank() != 4) {
    fail(ErrorKind::kShape, "spatial_feature_pool expects C x H x W or N x C x H x W");
  }
  const int c = x.dim(1);
  nn::SpatialFeaturePooling<T> layer(
      c, scales, branch_channels > 0 ? branch_channels : nn::default_branch_channels(c),
      identity_projection);
  Rng rng(seed);
  layer.init(rng);
  Tensor<T> y = layer.forward(x, false);
  if (!unbatched) return y;
  Tensor<T> out({y.dim(1), y.dim(2), y.dim(3)});
  std::copy(y.data(), y.data() + y.size(), out.data());
  return out;
}

// ---------------------------------------------------------------------------

template <typename T>
SegModel<T>::SegModel(const ModelConfig& config) : config_(config) {
  validate_model_config(config_);
  const auto half = [](int n) { return std::max(1, n / 2); };
  const auto half_or_zero = [](int n) { return n == 0 ? 0 : std::max(1, n / 2); };
  if (is_cascade()) {
    road_ = std::make_unique<SegNet<T>>("road", config_.widths, half(config_.mid_blocks),
                                        half(config_.deep_blocks),
                                        half_or_zero(config_.decoder_blocks), kRoadClasses,
                                        nullptr, 0);
    defect_ = std::make_unique<SegNet<T>>("defect", config_.widths, config_.mid_blocks,
                                          config_.deep_blocks, config_.decoder_blocks,
                                          kNumClasses, &config_.pool_scales,
                                          config_.pool_channels);
  } else {
    defect_ = std::make_unique<SegNet<T>>("baseline", config_.widths, config_.mid_blocks,
                                          config_.deep_blocks, config_.decoder_blocks,
                                          kNumClasses, nullptr, 0);
  }
  if (road_) {
    Rng rng(mix_seed(config_.seed, 1));
    road_->init(rng);
  }
  Rng rng(mix_seed(config_.seed, 2));
  defect_->init(rng);
}

template <typename T>
void SegModel<T>::check_input(const Tensor<T>& image) const {
  if (image.rank() != 4 || image.dim(1) != 3) {
    fail(ErrorKind::kShape, "model input must be N x 3 x H x W, got " + image.shape_string());
  }
  const int h = image.dim(2), w = image.dim(3);
  if (h <= 0 || w <= 0 || h % kDownsampleFactor != 0 || w % kDownsampleFactor != 0) {
    fail(ErrorKind::kShape, "input height and width must be positive multiples of 8, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
  if (is_cascade()) {
    const int inner_h = h / kDownsampleFactor, inner_w = w / kDownsampleFactor;
    for (int s : config_.pool_scales) {
      if (s > inner_h || s > inner_w) {
        fail(ErrorKind::kShape, "input " + std::to_string(w) + "x" + std::to_string(h) +
                                    " is too small for pooling scale " + std::to_string(s));
      }
    }
  }
}

template <typename T>
Tensor<T> SegModel<T>::forward_road(const Tensor<T>& image, bool train) {
  check_input(image);
  if (!road_) fail(ErrorKind::kContract, "baseline model has no road subnetwork");
  return road_->forward(image, train);
}

template <typename T>
typename SegModel<T>::Output SegModel<T>::forward(const Tensor<T>& image, bool train) {
  check_input(image);
  Output out;
  if (!is_cascade()) {
    out.defect_logits = defect_->forward(image, train);
    return out;
  }
  out.road_logits = road_->forward(image, train);
  const int n = image.dim(0), h = image.dim(2), w = image.dim(3);
  out.road_prob = Tensor<T>::nchw(n, 1, h, w);
  if (gate_override_) {
    out.road_prob.fill(*gate_override_);
  } else {
    // softmax over two logits == sigmoid of their difference
    for (int s = 0; s < n; ++s) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const T z = out.road_logits.at(s, 1, y, x) - out.road_logits.at(s, 0, y, x);
          out.road_prob.at(s, 0, y, x) = T(1) / (T(1) + std::exp(-z));
        }
      }
    }
  }
  Tensor<T> gate = out.road_prob;
  if (hard_gate_ && !train) {
    for (auto& p : gate.values()) p = p >= T(0.5) ? T(1) : T(0);
  }
  out.defect_logits = defect_->forward(attention_apply(image, gate), train);
  if (train) {
    image_ = image;
    road_prob_ = out.road_prob;
  }
  return out;
}

template <typename T>
void SegModel<T>::backward_road(const Tensor<T>& d_road_logits) {
  if (!road_) fail(ErrorKind::kContract, "baseline model has no road subnetwork");
  road_->backward(d_road_logits, false);
}

template <typename T>
void SegModel<T>::backward(const Tensor<T>& d_road_logits, const Tensor<T>& d_defect_logits) {
  if (!is_cascade()) {
    defect_->backward(d_defect_logits, false);
    return;
  }
  const bool through_gate = !gate_override_.has_value();
  Tensor<T> d_gated = defect_->backward(d_defect_logits, through_gate);
  if (!through_gate) {
    if (!d_road_logits.empty()) road_->backward(d_road_logits, false);
    return;
  }
  const int n = image_.dim(0), c = image_.dim(1), h = image_.dim(2), w = image_.dim(3);
  Tensor<T> dl = d_road_logits.empty() ? Tensor<T>::nchw(n, kRoadClasses, h, w) : d_road_logits;
  for (int s = 0; s < n; ++s) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T dp = T(0);
        for (int ch = 0; ch < c; ++ch) dp += d_gated.at(s, ch, y, x) * image_.at(s, ch, y, x);
        const T p = road_prob_.at(s, 0, y, x);
        const T dz = dp * p * (T(1) - p);
        dl.at(s, 1, y, x) += dz;
        dl.at(s, 0, y, x) -= dz;
      }
    }
  }
  road_->backward(dl, false);
  image_ = Tensor<T>();
  road_prob_ = Tensor<T>();
}

template <typename T>
nn::ParamList<T> SegModel<T>::road_parameters() {
  nn::ParamList<T> out;
  if (road_) road_->collect(out);
  return out;
}

template <typename T>
nn::ParamList<T> SegModel<T>::defect_parameters() {
  nn::ParamList<T> out;
  defect_->collect(out);
  return out;
}

template <typename T>
nn::ParamList<T> SegModel<T>::parameters() {
  auto out = road_parameters();
  for (auto* p : defect_parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::size_t SegModel<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
void SegModel<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T(0));
}

template <typename T>
Mask decode_prediction(const typename SegModel<T>::Output& out, int n, bool cascade) {
  const auto& logits = out.defect_logits;
  const int h = logits.dim(2), w = logits.dim(3);
  Mask mask(h, w, kVoidId);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (cascade && out.road_prob.at(n, 0, y, x) < T(0.5)) continue;
      int best = cascade ? 1 : 0;
      for (int c = best + 1; c < kNumClasses; ++c) {
        if (logits.at(n, c, y, x) > logits.at(n, best, y, x)) best = c;
      }
      mask(y, x) = static_cast<std::uint8_t>(best);
    }
  }
  return mask;
}

template class SegNet<float>;
template class SegNet<double>;
template class SegModel<float>;
template class SegModel<double>;
template Tensor<float> attention_apply(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> attention_apply(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> softmax_channels(const Tensor<float>&);
template Tensor<double> softmax_channels(const Tensor<double>&);
template Tensor<float> spatial_feature_pool(const Tensor<float>&, const std::vector<int>&, bool,
                                            int, std::uint64_t);
template Tensor<double> spatial_feature_pool(const Tensor<double>&, const std::vector<int>&,
                                             bool, int, std::uint64_t);
template Mask decode_prediction<float>(const SegModel<float>::Output&, int, bool);
template Mask decode_prediction<double>(const SegModel<double>::Output&, int, bool);

// ---------------------------------------------------------------------------

Tensor<float> images_to_tensor(const std::vector<const Image*>& images, int height, int width) {
  const int n = static_cast<int>(images.size());
  Tensor<float> out = Tensor<float>::nchw(n, 3, height, width);
  for (int s = 0; s < n; ++s) {
    const Image& img = *images[s];
    Tensor<float> src = Tensor<float>::nchw(1, 3, img.height, img.width);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int ch = 0; ch < 3; ++ch) src.at(0, ch, y, x) = img.at(y, x, ch) / 255.0f;
      }
    }
    if (img.height != height || img.width != width) src = nn::bilinear_resize(src, height, width);
    std::copy(src.data(), src.data() + src.size(), out.sample(s));
  }
  return out;
}

Mask resize_mask_nearest(const Mask& mask, int height, int width) {
  if (mask.height() == height && mask.width() == width) return mask;
  Mask out(height, width);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

}  // namespace roadaudit
