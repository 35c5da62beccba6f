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

#ifndef ROADAUDIT_GRID_HPP_
#define ROADAUDIT_GRID_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roadaudit/error.hpp"

namespace roadaudit {

// Row-major 2-D grid of values.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width) {
    if (height < 0 || width < 0) {
      fail(ErrorKind::kShape, "grid dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int y, int x) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Per-pixel label ids. The level (class, category or root) is implied by
// context.
using Mask = Grid<std::uint8_t>;

// Interleaved 8-bit RGB image.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}

  std::uint8_t& at(int y, int x, int ch) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  std::uint8_t at(int y, int x, int ch) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline void require_same_shape(const Mask& a, const Mask& b, const std::string& what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::kShape,
         what + ": shape mismatch " + std::to_string(a.height()) + "x" +
             std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
             "x" + std::to_string(b.width()));
  }
}

}  // namespace roadaudit

#endif  // ROADAUDIT_GRID_HPP_
