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

#include "roadaudit/nn.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>

namespace roadaudit::nn {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

void require_nchw(const std::vector<int>& shape, int channels, const char* who) {
  if (shape.size() != 4) fail(ErrorKind::kShape, std::string(who) + ": expected NCHW input");
  if (channels >= 0 && shape[1] != channels) {
    fail(ErrorKind::kShape, std::string(who) + ": expected " + std::to_string(channels) +
                                " channels, got " + std::to_string(shape[1]));
  }
}

// col[(c * kh * kw + i * kw + j) * (Ho * Wo) + oy * Wo + ox]
template <typename T>
void im2col(const T* x, int channels, int h, int w, const ConvGeometry& g, int ho, int wo,
            T* col) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    const T* xc = x + static_cast<std::size_t>(c) * h * w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        T* row = col + (static_cast<std::size_t>(c) * g.kh * g.kw + i * g.kw + j) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride_h - g.pad_h + i * g.dil_h;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = xc + static_cast<std::size_t>(iy) * w;
          const int off = -g.pad_w + j * g.dil_w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride_w + off;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col; accumulates into x.
template <typename T>
void col2im(const T* col, int channels, int h, int w, const ConvGeometry& g, int ho, int wo,
            T* x) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    T* xc = x + static_cast<std::size_t>(c) * h * w;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const T* row = col + (static_cast<std::size_t>(c) * g.kh * g.kw + i * g.kw + j) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * g.stride_h - g.pad_h + i * g.dil_h;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = xc + static_cast<std::size_t>(iy) * w;
          const int off = -g.pad_w + j * g.dil_w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * g.stride_w + off;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
         g.pad_w == 0;
}

template <typename T>
void he_normal(Tensor<T>& w, double fan_in, double gain, Rng& rng) {
  const double std = gain * std::sqrt(2.0 / fan_in);
  for (auto& v : w.values()) v = static_cast<T>(rng.normal() * std);
}

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.values()) v = v > T(0) ? v : T(0);
}

// dy masked by y > 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& dy, const Tensor<T>& y) {
  Tensor<T> d(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) d[i] = y[i] > T(0) ? dy[i] : T(0);
  return d;
}

}  // namespace

int default_branch_channels(int channels) { return std::max(1, channels / 4); }

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in, int out, ConvGeometry g, double gain)
    : in_(in), out_(out), g_(g), gain_(gain) {
  weight_.value = Tensor<T>({out, in, g.kh, g.kw});
  weight_.grad = Tensor<T>({out, in, g.kh, g.kw});
  bias_.value = Tensor<T>({out});
  bias_.grad = Tensor<T>({out});
}

template <typename T>
void Conv2d<T>::init(Rng& rng) {
  he_normal(weight_.value, static_cast<double>(in_) * g_.kh * g_.kw, gain_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, ParamList<T>& out) {
  weight_.name = prefix + ".weight";
  bias_.name = prefix + ".bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, bool train) {
  require_nchw(x.shape(), in_, "Conv2d");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ho = g_.out_h(h), wo = g_.out_w(w);
  if (ho <= 0 || wo <= 0) fail(ErrorKind::kShape, "Conv2d: input too small");
  Tensor<T> y = Tensor<T>::nchw(n, out_, ho, wo);
  const int k = in_ * g_.kh * g_.kw;
  const int p = ho * wo;
  CMapR<T> wm(weight_.value.data(), out_, k);
  AlignedVector<T> col;
  if (!is_pointwise(g_)) col.resize(static_cast<std::size_t>(k) * p);
  for (int s = 0; s < n; ++s) {
    MapR<T> ym(y.sample(s), out_, p);
    if (is_pointwise(g_)) {
      ym.noalias() = wm * CMapR<T>(x.sample(s), k, p);
    } else {
      im2col(x.sample(s), in_, h, w, g_, ho, wo, col.data());
      ym.noalias() = wm * CMapR<T>(col.data(), k, p);
    }
    for (int o = 0; o < out_; ++o) ym.row(o).array() += bias_.value[o];
  }
  if (train) x_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy, bool need_dx) {
  if (x_.empty()) fail(ErrorKind::kContract, "Conv2d::backward without cached forward");
  const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int ho = dy.dim(2), wo = dy.dim(3);
  const int k = in_ * g_.kh * g_.kw;
  const int p = ho * wo;
  CMapR<T> wm(weight_.value.data(), out_, k);
  MapR<T> dw(weight_.grad.data(), out_, k);
  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>::nchw(n, in_, h, w);
  AlignedVector<T> col(is_pointwise(g_) ? 0 : static_cast<std::size_t>(k) * p);
  AlignedVector<T> dcol(static_cast<std::size_t>(k) * p);
  for (int s = 0; s < n; ++s) {
    CMapR<T> dym(dy.sample(s), out_, p);
    const T* colp = x_.sample(s);
    if (!is_pointwise(g_)) {
      im2col(x_.sample(s), in_, h, w, g_, ho, wo, col.data());
      colp = col.data();
    }
    dw.noalias() += dym * CMapR<T>(colp, k, p).transpose();
    for (int o = 0; o < out_; ++o) bias_.grad[o] += dym.row(o).sum();
    if (need_dx) {
      if (is_pointwise(g_)) {
        MapR<T>(dx.sample(s), k, p).noalias() = wm.transpose() * dym;
      } else {
        MapR<T>(dcol.data(), k, p).noalias() = wm.transpose() * dym;
        col2im(dcol.data(), in_, h, w, g_, ho, wo, dx.sample(s));
      }
    }
  }
  x_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(int in, int out, int k, int stride, int pad, int output_pad,
                                    double gain)
    : in_(in), out_(out), k_(k), stride_(stride), pad_(pad), output_pad_(output_pad), gain_(gain) {
  if (output_pad >= stride) fail(ErrorKind::kConfig, "output padding must be < stride");
  weight_.value = Tensor<T>({in, out, k, k});
  weight_.grad = Tensor<T>({in, out, k, k});
  bias_.value = Tensor<T>({out});
  bias_.grad = Tensor<T>({out});
}

template <typename T>
void ConvTranspose2d<T>::init(Rng& rng) {
  // Each output pixel receives roughly in * k^2 / stride^2 contributions.
  const double fan_in = static_cast<double>(in_) * k_ * k_ / (stride_ * stride_);
  he_normal(weight_.value, fan_in, gain_, rng);
  bias_.value.fill(T(0));
}

template <typename T>
void ConvTranspose2d<T>::collect(const std::string& prefix, ParamList<T>& out) {
  weight_.name = prefix + ".weight";
  bias_.name = prefix + ".bias";
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const Tensor<T>& x, bool train) {
  require_nchw(x.shape(), in_, "ConvTranspose2d");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ho = (h - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
  const int wo = (w - 1) * stride_ - 2 * pad_ + k_ + output_pad_;
  const ConvGeometry g{k_, k_, stride_, stride_, pad_, pad_, 1, 1};
  const int kk = out_ * k_ * k_;
  const int p = h * w;
  CMapR<T> wm(weight_.value.data(), in_, kk);
  Tensor<T> y = Tensor<T>::nchw(n, out_, ho, wo);
  AlignedVector<T> col(static_cast<std::size_t>(kk) * p);
  for (int s = 0; s < n; ++s) {
    MapR<T>(col.data(), kk, p).noalias() = wm.transpose() * CMapR<T>(x.sample(s), in_, p);
    col2im(col.data(), out_, ho, wo, g, h, w, y.sample(s));
    T* ys = y.sample(s);
    for (int o = 0; o < out_; ++o) {
      T* plane = ys + static_cast<std::size_t>(o) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) plane[i] += bias_.value[o];
    }
  }
  if (train) x_ = x;
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const Tensor<T>& dy, bool need_dx) {
  if (x_.empty()) fail(ErrorKind::kContract, "ConvTranspose2d::backward without forward");
  const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int ho = dy.dim(2), wo = dy.dim(3);
  const ConvGeometry g{k_, k_, stride_, stride_, pad_, pad_, 1, 1};
  const int kk = out_ * k_ * k_;
  const int p = h * w;
  CMapR<T> wm(weight_.value.data(), in_, kk);
  MapR<T> dw(weight_.grad.data(), in_, kk);
  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>::nchw(n, in_, h, w);
  AlignedVector<T> dcol(static_cast<std::size_t>(kk) * p);
  for (int s = 0; s < n; ++s) {
    im2col(dy.sample(s), out_, ho, wo, g, h, w, dcol.data());
    CMapR<T> dcolm(dcol.data(), kk, p);
    dw.noalias() += CMapR<T>(x_.sample(s), in_, p) * dcolm.transpose();
    const T* dys = dy.sample(s);
    for (int o = 0; o < out_; ++o) {
      const T* plane = dys + static_cast<std::size_t>(o) * ho * wo;
      T acc = T(0);
      for (int i = 0; i < ho * wo; ++i) acc += plane[i];
      bias_.grad[o] += acc;
    }
    if (need_dx) MapR<T>(dx.sample(s), in_, p).noalias() = wm * dcolm;
  }
  x_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// DownsamplerBlock

template <typename T>
DownsamplerBlock<T>::DownsamplerBlock(int in, int out)
    : in_(in), out_(out), conv_(in, out - in, ConvGeometry{3, 3, 2, 2, 1, 1, 1, 1}) {
  if (out <= in) fail(ErrorKind::kConfig, "downsampler must widen the channel count");
}

template <typename T>
void DownsamplerBlock<T>::init(Rng& rng) {
  conv_.init(rng);
}

template <typename T>
void DownsamplerBlock<T>::collect(const std::string& prefix, ParamList<T>& out) {
  conv_.collect(prefix + ".conv", out);
}

template <typename T>
Tensor<T> DownsamplerBlock<T>::forward(const Tensor<T>& x, bool train) {
  require_nchw(x.shape(), in_, "DownsamplerBlock");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    fail(ErrorKind::kShape, "DownsamplerBlock: spatial dims must be even, got " +
                                x.shape_string());
  }
  const int ho = h / 2, wo = w / 2;
  Tensor<T> c = conv_.forward(x, train);
  Tensor<T> y = Tensor<T>::nchw(n, out_, ho, wo);
  const int conv_ch = out_ - in_;
  if (train) argmax_.assign(static_cast<std::size_t>(n) * in_ * ho * wo, 0);
  for (int s = 0; s < n; ++s) {
    std::copy(c.sample(s), c.sample(s) + c.sample_size(), y.sample(s));
    for (int ch = 0; ch < in_; ++ch) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int iy = 2 * oy + dy, ix = 2 * ox + dx;
              const T v = x.at(s, ch, iy, ix);
              if (v > best) {
                best = v;
                best_idx = iy * w + ix;
              }
            }
          }
          y.at(s, conv_ch + ch, oy, ox) = best;
          if (train) {
            argmax_[((static_cast<std::size_t>(s) * in_ + ch) * ho + oy) * wo + ox] = best_idx;
          }
        }
      }
    }
  }
  relu_inplace(y);
  if (train) {
    y_ = y;
    x_shape_ = x.shape();
  }
  return y;
}

template <typename T>
Tensor<T> DownsamplerBlock<T>::backward(const Tensor<T>& dy, bool need_dx) {
  const Tensor<T> dz = relu_backward(dy, y_);
  const int n = dz.dim(0), ho = dz.dim(2), wo = dz.dim(3);
  const int conv_ch = out_ - in_;
  Tensor<T> dconv = Tensor<T>::nchw(n, conv_ch, ho, wo);
  for (int s = 0; s < n; ++s) {
    std::copy(dz.sample(s), dz.sample(s) + dconv.sample_size(), dconv.sample(s));
  }
  Tensor<T> dx = conv_.backward(dconv, need_dx);
  if (need_dx) {
    const int w = x_shape_[3];
    for (int s = 0; s < n; ++s) {
      for (int ch = 0; ch < in_; ++ch) {
        T* plane = dx.sample(s) + static_cast<std::size_t>(ch) * x_shape_[2] * w;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const int idx =
                argmax_[((static_cast<std::size_t>(s) * in_ + ch) * ho + oy) * wo + ox];
            plane[idx] += dz.at(s, conv_ch + ch, oy, ox);
          }
        }
      }
    }
  }
  y_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// NonBottleneck1D

template <typename T>
NonBottleneck1D<T>::NonBottleneck1D(int channels, int dilation)
    : channels_(channels),
      c1_(channels, channels, ConvGeometry{3, 1, 1, 1, 1, 0, 1, 1}),
      c2_(channels, channels, ConvGeometry{1, 3, 1, 1, 0, 1, 1, 1}),
      c3_(channels, channels, ConvGeometry{3, 1, 1, 1, dilation, 0, dilation, 1}),
      // Smaller init on the last conv keeps the residual sum near identity
      // at start without normalization layers.
      c4_(channels, channels, ConvGeometry{1, 3, 1, 1, 0, dilation, 1, dilation}, 0.5) {
  if (dilation < 1) fail(ErrorKind::kConfig, "dilation must be >= 1");
}

template <typename T>
void NonBottleneck1D<T>::init(Rng& rng) {
  c1_.init(rng);
  c2_.init(rng);
  c3_.init(rng);
  c4_.init(rng);
}

template <typename T>
void NonBottleneck1D<T>::collect(const std::string& prefix, ParamList<T>& out) {
  c1_.collect(prefix + ".conv3x1_1", out);
  c2_.collect(prefix + ".conv1x3_1", out);
  c3_.collect(prefix + ".conv3x1_2", out);
  c4_.collect(prefix + ".conv1x3_2", out);
}

template <typename T>
Tensor<T> NonBottleneck1D<T>::forward(const Tensor<T>& x, bool train) {
  Tensor<T> a1 = c1_.forward(x, train);
  relu_inplace(a1);
  Tensor<T> a2 = c2_.forward(a1, train);
  relu_inplace(a2);
  Tensor<T> a3 = c3_.forward(a2, train);
  relu_inplace(a3);
  Tensor<T> y = c4_.forward(a3, train);
  y += x;
  relu_inplace(y);
  if (train) {
    a1_ = std::move(a1);
    a2_ = std::move(a2);
    a3_ = std::move(a3);
    y_ = y;
  }
  return y;
}

template <typename T>
Tensor<T> NonBottleneck1D<T>::backward(const Tensor<T>& dy, bool need_dx) {
  const Tensor<T> d = relu_backward(dy, y_);
  Tensor<T> g = c4_.backward(d, true);
  g = c3_.backward(relu_backward(g, a3_), true);
  g = c2_.backward(relu_backward(g, a2_), true);
  Tensor<T> dx = c1_.backward(relu_backward(g, a1_), need_dx);
  if (need_dx) dx += d;
  a1_ = a2_ = a3_ = y_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// UpsamplerBlock

template <typename T>
UpsamplerBlock<T>::UpsamplerBlock(int in, int out) : out_(out), deconv_(in, out, 3, 2, 1, 1) {}

template <typename T>
void UpsamplerBlock<T>::init(Rng& rng) {
  deconv_.init(rng);
}

template <typename T>
void UpsamplerBlock<T>::collect(const std::string& prefix, ParamList<T>& out) {
  deconv_.collect(prefix + ".deconv", out);
}

template <typename T>
Tensor<T> UpsamplerBlock<T>::forward(const Tensor<T>& x, bool train) {
  Tensor<T> y = deconv_.forward(x, train);
  relu_inplace(y);
  if (train) y_ = y;
  return y;
}

template <typename T>
Tensor<T> UpsamplerBlock<T>::backward(const Tensor<T>& dy, bool need_dx) {
  Tensor<T> dx = deconv_.backward(relu_backward(dy, y_), need_dx);
  y_ = Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// Spatial feature pooling

template <typename T>
SpatialFeaturePooling<T>::SpatialFeaturePooling(int channels, std::vector<int> scales,
                                                int branch_channels, bool identity_projection)
    : channels_(channels),
      scales_(std::move(scales)),
      branch_channels_(identity_projection ? channels : branch_channels),
      identity_(identity_projection) {
  if (scales_.empty()) fail(ErrorKind::kConfig, "spatial feature pooling needs >= 1 scale");
  for (int s : scales_) {
    if (s < 1) fail(ErrorKind::kConfig, "pooling scales must be >= 1");
  }
  if (branch_channels_ < 1) fail(ErrorKind::kConfig, "pooling branch width must be >= 1");
  if (!identity_) {
    for (std::size_t i = 0; i < scales_.size(); ++i) {
      proj_.push_back(std::make_unique<Conv2d<T>>(channels, branch_channels_,
                                                  ConvGeometry{1, 1, 1, 1, 0, 0, 1, 1}));
    }
  }
}

template <typename T>
int SpatialFeaturePooling<T>::out_channels() const {
  return channels_ + static_cast<int>(scales_.size()) * branch_channels_;
}

template <typename T>
void SpatialFeaturePooling<T>::init(Rng& rng) {
  for (auto& p : proj_) p->init(rng);
}

template <typename T>
void SpatialFeaturePooling<T>::collect(const std::string& prefix, ParamList<T>& out) {
  for (std::size_t i = 0; i < proj_.size(); ++i) {
    proj_[i]->collect(prefix + ".branch" + std::to_string(scales_[i]) + ".proj", out);
  }
}

template <typename T>
Tensor<T> SpatialFeaturePooling<T>::forward(const Tensor<T>& x, bool train) {
  require_nchw(x.shape(), channels_, "SpatialFeaturePooling");
  const int h = x.dim(2), w = x.dim(3);
  for (int s : scales_) {
    if (s > h || s > w) {
      fail(ErrorKind::kShape, "pooling scale " + std::to_string(s) +
                                  " exceeds feature map " + std::to_string(h) + "x" +
                                  std::to_string(w));
    }
  }
  std::vector<Tensor<T>> branches;
  if (train) proj_out_.clear();
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    Tensor<T> pooled = adaptive_avg_pool(x, scales_[i], scales_[i]);
    if (!identity_) {
      pooled = proj_[i]->forward(pooled, train);
      relu_inplace(pooled);
      if (train) proj_out_.push_back(pooled);
    }
    branches.push_back(bilinear_resize(pooled, h, w));
  }
  std::vector<const Tensor<T>*> parts = {&x};
  for (const auto& b : branches) parts.push_back(&b);
  h_ = h;
  w_ = w;
  return concat_channels(parts);
}

template <typename T>
Tensor<T> SpatialFeaturePooling<T>::backward(const Tensor<T>& dy, bool need_dx) {
  const int n = dy.dim(0);
  const std::size_t plane = static_cast<std::size_t>(h_) * w_;
  Tensor<T> dx = Tensor<T>::nchw(n, channels_, h_, w_);
  for (int s = 0; s < n; ++s) {
    std::copy(dy.sample(s), dy.sample(s) + channels_ * plane, dx.sample(s));
  }
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    Tensor<T> db = Tensor<T>::nchw(n, branch_channels_, h_, w_);
    const std::size_t offset = (channels_ + i * branch_channels_) * plane;
    for (int s = 0; s < n; ++s) {
      std::copy(dy.sample(s) + offset, dy.sample(s) + offset + branch_channels_ * plane,
                db.sample(s));
    }
    Tensor<T> g = bilinear_resize_backward(db, scales_[i], scales_[i]);
    if (!identity_) g = proj_[i]->backward(relu_backward(g, proj_out_[i]), true);
    dx += adaptive_avg_pool_backward(g, h_, w_);
  }
  proj_out_.clear();
  if (!need_dx) return Tensor<T>();
  return dx;
}

// ---------------------------------------------------------------------------
// Free ops

namespace {
inline int bin_start(int i, int in, int out) { return (i * in) / out; }
inline int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

template <typename T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& x, int out_h, int out_w) {
  require_nchw(x.shape(), -1, "adaptive_avg_pool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y = Tensor<T>::nchw(n, c, out_h, out_w);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = bin_start(oy, h, out_h), y1 = bin_end(oy, h, out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = bin_start(ox, w, out_w), x1 = bin_end(ox, w, out_w);
          T acc = T(0);
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) acc += x.at(s, ch, iy, ix);
          }
          y.at(s, ch, oy, ox) = acc / static_cast<T>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> adaptive_avg_pool_backward(const Tensor<T>& dy, int in_h, int in_w) {
  const int n = dy.dim(0), c = dy.dim(1), out_h = dy.dim(2), out_w = dy.dim(3);
  Tensor<T> dx = Tensor<T>::nchw(n, c, in_h, in_w);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = bin_start(oy, in_h, out_h), y1 = bin_end(oy, in_h, out_h);
        for (int ox = 0; ox < out_w; ++ox) {
          const int x0 = bin_start(ox, in_w, out_w), x1 = bin_end(ox, in_w, out_w);
          const T g = dy.at(s, ch, oy, ox) / static_cast<T>((y1 - y0) * (x1 - x0));
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) dx.at(s, ch, iy, ix) += g;
          }
        }
      }
    }
  }
  return dx;
}

namespace {

// Half-pixel-centred source coordinate, clamped at the low edge.
struct Tap {
  int i0, i1;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(src);
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& x, int out_h, int out_w) {
  require_nchw(x.shape(), -1, "bilinear_resize");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ty = bilinear_taps(h, out_h);
  const auto tx = bilinear_taps(w, out_w);
  Tensor<T> y = Tensor<T>::nchw(n, c, out_h, out_w);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < out_h; ++oy) {
        const T fy = static_cast<T>(ty[oy].frac);
        for (int ox = 0; ox < out_w; ++ox) {
          const T fx = static_cast<T>(tx[ox].frac);
          const T top = x.at(s, ch, ty[oy].i0, tx[ox].i0) * (T(1) - fx) +
                        x.at(s, ch, ty[oy].i0, tx[ox].i1) * fx;
          const T bottom = x.at(s, ch, ty[oy].i1, tx[ox].i0) * (T(1) - fx) +
                           x.at(s, ch, ty[oy].i1, tx[ox].i1) * fx;
          y.at(s, ch, oy, ox) = top * (T(1) - fy) + bottom * fy;
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> bilinear_resize_backward(const Tensor<T>& dy, int in_h, int in_w) {
  const int n = dy.dim(0), c = dy.dim(1), out_h = dy.dim(2), out_w = dy.dim(3);
  const auto ty = bilinear_taps(in_h, out_h);
  const auto tx = bilinear_taps(in_w, out_w);
  Tensor<T> dx = Tensor<T>::nchw(n, c, in_h, in_w);
  for (int s = 0; s < n; ++s) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < out_h; ++oy) {
        const T fy = static_cast<T>(ty[oy].frac);
        for (int ox = 0; ox < out_w; ++ox) {
          const T fx = static_cast<T>(tx[ox].frac);
          const T g = dy.at(s, ch, oy, ox);
          dx.at(s, ch, ty[oy].i0, tx[ox].i0) += g * (T(1) - fy) * (T(1) - fx);
          dx.at(s, ch, ty[oy].i0, tx[ox].i1) += g * (T(1) - fy) * fx;
          dx.at(s, ch, ty[oy].i1, tx[ox].i0) += g * fy * (T(1) - fx);
          dx.at(s, ch, ty[oy].i1, tx[ox].i1) += g * fy * fx;
        }
      }
    }
  }
  return dx;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
  if (parts.empty()) fail(ErrorKind::kShape, "concat_channels: no inputs");
  const auto& first = *parts.front();
  require_nchw(first.shape(), -1, "concat_channels");
  const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
  int c = 0;
  for (const auto* p : parts) {
    if (p->rank() != 4 || p->dim(0) != n || p->dim(2) != h || p->dim(3) != w) {
      fail(ErrorKind::kShape, "concat_channels: incompatible shapes");
    }
    c += p->dim(1);
  }
  Tensor<T> y = Tensor<T>::nchw(n, c, h, w);
  for (int s = 0; s < n; ++s) {
    T* dst = y.sample(s);
    for (const auto* p : parts) {
      dst = std::copy(p->sample(s), p->sample(s) + p->sample_size(), dst);
    }
  }
  return y;
}

#define ROADAUDIT_INSTANTIATE(T)                                                     \
  template class Conv2d<T>;                                                          \
  template class ConvTranspose2d<T>;                                                 \
  template class DownsamplerBlock<T>;                                                \
  template class NonBottleneck1D<T>;                                                 \
  template class UpsamplerBlock<T>;                                                  \
  template class SpatialFeaturePooling<T>;                                           \
  template Tensor<T> adaptive_avg_pool(const Tensor<T>&, int, int);                  \
  template Tensor<T> adaptive_avg_pool_backward(const Tensor<T>&, int, int);         \
  template Tensor<T> bilinear_resize(const Tensor<T>&, int, int);                    \
  template Tensor<T> bilinear_resize_backward(const Tensor<T>&, int, int);           \
  template Tensor<T> concat_channels(const std::vector<const Tensor<T>*>&);

ROADAUDIT_INSTANTIATE(float)
ROADAUDIT_INSTANTIATE(double)

#undef ROADAUDIT_INSTANTIATE

}  // namespace roadaudit::nn
