/* Copyright 2026 The Sf3CNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "sf3cnn/sten.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "sf3cnn/error.hpp"

namespace sf3cnn::sten {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode(const Tensor& t) {
  if (t.rank() > std::numeric_limits<std::uint8_t>::max()) {
    throw IoError("STEN rank limited to 255");
  }
  std::vector<std::uint8_t> out;
  out.reserve(7 + 4 * t.rank() + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion);
  out.push_back(kDtypeF32);
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.dims()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw IoError("STEN extent exceeds uint32");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError("not a STEN tensor (bad magic)");
  }
  if (bytes[4] != kVersion) throw IoError("unsupported STEN version " + std::to_string(bytes[4]));
  if (bytes[5] != kDtypeF32) throw IoError("unsupported STEN dtype " + std::to_string(bytes[5]));
  const std::size_t rank = bytes[6];
  if (rank == 0) throw IoError("STEN rank must be >= 1");
  if (bytes.size() < 7 + 4 * rank) throw IoError("truncated STEN header");
  Shape dims(rank);
  std::size_t numel = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    dims[i] = get_u32(bytes.data() + 7 + 4 * i);
    if (dims[i] == 0) throw IoError("STEN extent of zero");
    numel *= dims[i];
  }
  const std::size_t offset = 7 + 4 * rank;
  if (bytes.size() != offset + 4 * numel) {
    throw IoError("STEN payload holds " + std::to_string(bytes.size() - offset) +
                  " bytes, expected " + std::to_string(4 * numel));
  }
  std::vector<float> values(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes.data() + offset + 4 * i));
  }
  return Tensor(std::move(dims), std::move(values));
}

void write(const std::filesystem::path& path, const Tensor& t) {
  const std::vector<std::uint8_t> bytes = encode(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

Tensor read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace sf3cnn::sten
