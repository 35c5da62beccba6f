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

#ifndef ROADAUDIT_NN_HPP_
#define ROADAUDIT_NN_HPP_

#include <memory>
#include <string>
#include <vector>

#include "roadaudit/rng.hpp"
#include "roadaudit/tensor.hpp"

// Layers with explicit backward passes. Instantiated for float (training,
// inference) and double (gradient checking).
namespace roadaudit::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
using ParamList = std::vector<Parameter<T>*>;

// A layer caches whatever it needs for backward when forward runs with
// train == true. backward() accumulates parameter gradients and returns the
// input gradient (empty when need_dx is false).
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, bool need_dx) = 0;
  virtual void collect(const std::string& prefix, ParamList<T>& out) = 0;
  virtual void init(Rng& rng) = 0;
  virtual int out_channels() const = 0;
};

struct ConvGeometry {
  int kh = 3, kw = 3;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;
  int dil_h = 1, dil_w = 1;

  int out_h(int h) const { return (h + 2 * pad_h - dil_h * (kh - 1) - 1) / stride_h + 1; }
  int out_w(int w) const { return (w + 2 * pad_w - dil_w * (kw - 1) - 1) / stride_w + 1; }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  // gain scales the He-normal init (1.0 for ReLU-followed convs).
  Conv2d(int in, int out, ConvGeometry g, double gain = 1.0);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override { return out_; }

 private:
  int in_, out_;
  ConvGeometry g_;
  double gain_;
  Parameter<T> weight_, bias_;  // weight: out x in x kh x kw
  Tensor<T> x_;
};

// Transposed convolution, the adjoint of Conv2d in its data argument.
// Output size: (H - 1) * stride - 2 * pad + k + output_pad.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in, int out, int k, int stride, int pad, int output_pad, double gain = 1.0);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override { return out_; }

 private:
  int in_, out_, k_, stride_, pad_, output_pad_;
  double gain_;
  Parameter<T> weight_, bias_;  // weight: in x out x k x k
  Tensor<T> x_;
};

// ERFNet-style downsampler: concat(conv3x3/2, maxpool2x2) followed by ReLU.
template <typename T>
class DownsamplerBlock final : public Layer<T> {
 public:
  DownsamplerBlock(int in, int out);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override { return out_; }

 private:
  int in_, out_;
  Conv2d<T> conv_;
  std::vector<int> argmax_;
  std::vector<int> x_shape_;
  Tensor<T> y_;
};

// Non-bottleneck-1D residual block: 3x1, 1x3, dilated 3x1, dilated 1x3,
// identity skip. Shape-preserving.
template <typename T>
class NonBottleneck1D final : public Layer<T> {
 public:
  NonBottleneck1D(int channels, int dilation);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override { return channels_; }

 private:
  int channels_;
  Conv2d<T> c1_, c2_, c3_, c4_;
  Tensor<T> a1_, a2_, a3_, y_;
};

// Transposed 3x3 stride-2 convolution followed by ReLU.
template <typename T>
class UpsamplerBlock final : public Layer<T> {
 public:
  UpsamplerBlock(int in, int out);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override { return out_; }

 private:
  int out_;
  ConvTranspose2d<T> deconv_;
  Tensor<T> y_;
};

// Multi-scale context: for each scale s the input is average-pooled to an
// s x s grid, projected with a 1x1 conv + ReLU, bilinearly upsampled back and
// concatenated after the input channels. With identity projection the
// pooled values pass through untouched and each branch keeps C channels.
template <typename T>
class SpatialFeaturePooling final : public Layer<T> {
 public:
  SpatialFeaturePooling(int channels, std::vector<int> scales, int branch_channels,
                        bool identity_projection = false);
  Tensor<T> forward(const Tensor<T>& x, bool train) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_dx) override;
  void collect(const std::string& prefix, ParamList<T>& out) override;
  void init(Rng& rng) override;
  int out_channels() const override;
  int branch_channels() const { return branch_channels_; }

 private:
  int channels_;
  std::vector<int> scales_;
  int branch_channels_;
  bool identity_;
  std::vector<std::unique_ptr<Conv2d<T>>> proj_;
  std::vector<Tensor<T>> proj_out_;  // post-ReLU, for the backward mask
  int h_ = 0, w_ = 0;
};

// Default branch width: max(1, C / 4).
int default_branch_channels(int channels);

// Free-standing ops (also used by the layers above).
template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, int out_h, int out_w);
template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Tensor<T>& dy, int in_h, int in_w);
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w);
template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& dy, int in_h, int in_w);
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts);

}  // namespace roadaudit::nn

#endif  // ROADAUDIT_NN_HPP_
