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

#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "roadaudit/segnet.hpp"

namespace roadaudit {
namespace {

constexpr char kMagic[8] = {'R', 'D', 'A', 'U', 'D', 'C', 'K', 'P'};

template <typename V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename V>
V get(std::istream& in, const std::string& path) {
  V v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!in) fail(ErrorKind::kData, "truncated checkpoint '" + path + "'");
  return v;
}

std::string get_string(std::istream& in, const std::string& path) {
  const auto len = get<std::uint32_t>(in, path);
  if (len > (1u << 26)) fail(ErrorKind::kData, "corrupt checkpoint '" + path + "'");
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) fail(ErrorKind::kData, "truncated checkpoint '" + path + "'");
  return s;
}

}  // namespace

void save_checkpoint(SegModel<float>& model, const std::filesystem::path& path,
                     const std::string& extra_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, model_config_to_json(model.config()));
  put_string(out, extra_json);
  const auto params = model.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_string(out, p->name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
    for (int d : p->value.shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!out) fail(ErrorKind::kIo, "failed writing checkpoint '" + path.string() + "'");
}

std::unique_ptr<SegModel<float>> load_checkpoint(const std::filesystem::path& path,
                                                 std::string* extra_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kData, "cannot open checkpoint '" + path.string() + "'");
  const std::string p = path.string();
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorKind::kData, "'" + p + "' is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, p);
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kData, "checkpoint version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  auto model = std::make_unique<SegModel<float>>(model_config_from_json(get_string(in, p)));
  const std::string extra = get_string(in, p);
  if (extra_json) *extra_json = extra;

  std::map<std::string, nn::Parameter<float>*> by_name;
  for (auto* param : model->parameters()) by_name[param->name] = param;
  const auto count = get<std::uint32_t>(in, p);
  if (count != by_name.size()) {
    fail(ErrorKind::kData, "checkpoint holds " + std::to_string(count) +
                               " tensors but the model defines " + std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = get_string(in, p);
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::kData, "unexpected tensor '" + name + "'");
    const auto rank = get<std::uint32_t>(in, p);
    std::vector<int> shape(rank);
    for (auto& d : shape) d = get<std::int32_t>(in, p);
    auto& value = it->second->value;
    if (shape != value.shape()) {
      fail(ErrorKind::kData, "tensor '" + name + "' has shape " + Tensor<float>(shape).shape_string() +
                                 ", model expects " + value.shape_string());
    }
    in.read(reinterpret_cast<char*>(value.data()),
            static_cast<std::streamsize>(value.size() * sizeof(float)));
    if (!in) fail(ErrorKind::kData, "truncated checkpoint '" + p + "'");
    by_name.erase(it);
  }
  return model;
}

}  // namespace roadaudit
