// Copyright 2026 The Bundlerec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "bundlerec/neural.hpp"
#include "json.hpp"

namespace bundlerec {

// Versioned binary container: a JSON manifest plus named float64 arrays.
//
// Layout (little-endian):
//   "BRCKPT\0\0" | u32 version | u64 manifest_len | manifest (JSON text)
//   u64 array_count | { u32 name_len | name | u64 rows | u64 cols |
//                       rows*cols doubles, column-major }*
// Arrays are written in name order, so identical contents serialize to
// identical bytes.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json manifest = nlohmann::json::object();

  void put(const std::string& name, const nn::Matrix& value);
  const nn::Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::map<std::string, nn::Matrix>& arrays() const { return arrays_; }

  // Stores/loads every parameter under `prefix` + parameter name.
  void put_params(const nn::ParamRefs& params, const std::string& prefix = "");
  void get_params(const nn::ParamRefs& params,
                  const std::string& prefix = "") const;

  std::string serialize() const;
  static Checkpoint deserialize(std::string_view bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  std::uint64_t hash() const;

 private:
  std::map<std::string, nn::Matrix> arrays_;
};

std::string hex64(std::uint64_t v);

}  // namespace bundlerec
