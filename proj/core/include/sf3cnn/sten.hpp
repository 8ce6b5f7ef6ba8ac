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

// STEN: little-endian binary tensor files.
//
//   offset  size        field
//   0       4           magic "STEN"
//   4       1           version, 0x01
//   5       1           dtype, 0x01 = IEEE-754 binary32
//   6       1           rank r
//   7       4 * r       extents, uint32 little-endian
//   7 + 4r  4 * numel   payload, row-major, binary32 little-endian
//
// Used for videos (.vten), embeddings and checkpoint parameter blobs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sf3cnn/tensor.hpp"

namespace sf3cnn::sten {

inline constexpr char kMagic[4] = {'S', 'T', 'E', 'N'};
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::uint8_t kDtypeF32 = 0x01;

std::vector<std::uint8_t> encode(const Tensor& t);
// IoError on any malformed header or truncated payload.
Tensor decode(const std::vector<std::uint8_t>& bytes);

void write(const std::filesystem::path& path, const Tensor& t);
Tensor read(const std::filesystem::path& path);

}  // namespace sf3cnn::sten
