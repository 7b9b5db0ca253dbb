// Copyright 2026 The uhdiqa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uhdiqa/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "uhdiqa/error.hpp"

namespace uhdiqa {

namespace {

constexpr char kMagic[8] = {'U', 'H', 'D', 'I', 'Q', 'A', '1', '\n'};

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

}  // namespace

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, rec] : archive.tensors) {
    header["tensors"].push_back(
        {{"name", name}, {"shape", rec.shape}, {"offset", offset}, {"count", rec.values.size()}});
    offset += rec.values.size();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  const std::uint64_t length = text.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, rec] : archive.tensors) {
    out.write(reinterpret_cast<const char*>(rec.values.data()),
              static_cast<std::streamsize>(rec.values.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kWeightsLoad, "cannot open " + path.string());
  char magic[8];
  std::uint64_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0 || length > (1ULL << 32)) {
    throw Error(ErrorKind::kWeightsLoad, path.string() + " is not a uhdiqa archive");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error(ErrorKind::kWeightsLoad, "truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kWeightsLoad, "bad archive header: " + std::string(e.what()));
  }
  Archive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  std::vector<double> payload;
  {
    const auto start = in.tellg();
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg() - start);
    in.seekg(start);
    payload.resize(bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  }
  for (const auto& t : header.at("tensors")) {
    TensorRecord rec;
    rec.shape = t.at("shape").get<std::vector<int>>();
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto count = t.at("count").get<std::uint64_t>();
    if (offset + count > payload.size()) {
      throw Error(ErrorKind::kWeightsLoad, "tensor " + t.at("name").get<std::string>() +
                                               " exceeds payload in " + path.string());
    }
    rec.values.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                      payload.begin() + static_cast<std::ptrdiff_t>(offset + count));
    archive.tensors.emplace(t.at("name").get<std::string>(), std::move(rec));
  }
  return archive;
}

}  // namespace uhdiqa
