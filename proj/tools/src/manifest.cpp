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

#include "manifest.hpp"

#include <fstream>

#include "mcn/error.hpp"

#ifndef MCN_VERSION
#define MCN_VERSION "0.0.0"
#endif

namespace mcn::cli {

const char* tool_version() { return MCN_VERSION; }

void to_json(nlohmann::json& j, const RunManifest& m) {
  j = {{"tool", m.tool},     {"version", m.version}, {"command", m.command}, {"seed", m.seed},
       {"out", m.out},       {"strict", m.strict},   {"config", m.config}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
  m.tool = j.at("tool").get<std::string>();
  m.version = j.at("version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.out = j.at("out").get<std::string>();
  m.strict = j.at("strict").get<bool>();
  m.config = j.at("config");
}

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / kManifestFile;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << nlohmann::json(m).dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open manifest " + path.string());
  try {
    return nlohmann::json::parse(f).get<RunManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace mcn::cli
