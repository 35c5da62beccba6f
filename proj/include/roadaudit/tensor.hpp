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

#ifndef ROADAUDIT_TENSOR_HPP_
#define ROADAUDIT_TENSOR_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "roadaudit/error.hpp"

namespace roadaudit {

// Fixed 64-byte alignment. Vectorized reductions otherwise change their
// summation order with the heap address, and training stops being repeatable.
// Plain malloc plus an offset: glibc's memalign leaves split chunks behind
// that fragment the heap when a long audit interleaves small allocations.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::size_t kAlign = 64;
  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* raw = std::malloc(n * sizeof(T) + kAlign + sizeof(void*));
    if (!raw) throw std::bad_alloc();
    auto addr = reinterpret_cast<std::uintptr_t>(raw) + sizeof(void*);
    addr = (addr + kAlign - 1) & ~(kAlign - 1);
    reinterpret_cast<void**>(addr)[-1] = raw;
    return reinterpret_cast<T*>(addr);
  }
  void deallocate(T* p, std::size_t) noexcept {
    if (p) std::free(reinterpret_cast<void**>(p)[-1]);
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

// Dense row-major tensor. Activations use NCHW layout.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (int d : shape_) {
      if (d < 0) fail(ErrorKind::kShape, "negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, fill);
  }

  static Tensor nchw(int n, int c, int h, int w, T fill = T(0)) {
    return Tensor({n, c, h, w}, fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors.
  T& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  // Pointer to the start of sample n (rank >= 1).
  T* sample(int n) { return data_.data() + static_cast<std::size_t>(n) * sample_size(); }
  const T* sample(int n) const {
    return data_.data() + static_cast<std::size_t>(n) * sample_size();
  }
  std::size_t sample_size() const { return shape_.empty() || shape_[0] == 0 ? 0 : size() / shape_[0]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o)) fail(ErrorKind::kShape, "tensor += shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  AlignedVector<T> data_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.shape());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<To>(src[i]);
  return out;
}

}  // namespace roadaudit

#endif  // ROADAUDIT_TENSOR_HPP_
