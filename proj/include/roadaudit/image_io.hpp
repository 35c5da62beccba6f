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

#ifndef ROADAUDIT_IMAGE_IO_HPP_
#define ROADAUDIT_IMAGE_IO_HPP_

#include <filesystem>

#include "roadaudit/grid.hpp"

namespace roadaudit {

// Lossless PNG codecs. Masks are stored as 8-bit grayscale, images as 8-bit
// RGB. Errors surface as ErrorKind::kIo.
void write_png_rgb(const std::filesystem::path& path, const Image& image);
void write_png_gray(const std::filesystem::path& path, const Mask& mask);
Image read_png_rgb(const std::filesystem::path& path);
Mask read_png_gray(const std::filesystem::path& path);

}  // namespace roadaudit

#endif  // ROADAUDIT_IMAGE_IO_HPP_
