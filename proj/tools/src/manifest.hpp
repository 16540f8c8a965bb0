// Copyright 2026 The mcn Authors.
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
#include <string>

#include <nlohmann/json.hpp>

namespace mcn::cli {

// Written to <out>/manifest.json before a command does any work. `config`
// holds every resolved setting, so `mcn rerun` needs nothing else.
struct RunManifest {
  std::string tool = "mcn";
  std::string version;
  std::string command;
  std::uint64_t seed = 0;
  std::string out;
  bool strict = false;
  nlohmann::json config = nlohmann::json::object();
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

inline constexpr const char* kManifestFile = "manifest.json";

void write_manifest(const RunManifest& m, const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& path);

const char* tool_version();

}  // namespace mcn::cli
