// Copyright 2026 The Facefit Authors
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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facefit/ad/tensor.hpp"

// Raw little-endian array files: 32-bit IEEE floats (.f32) or 32-bit signed
// integers (.i32), row-major, one array per file. Shapes and checksums live
// in the manifest that references them.

namespace facefit::io {

void write_f32(const std::filesystem::path& path, const ad::ArrayXd& data);
ad::ArrayXd read_f32(const std::filesystem::path& path);

void write_i32(const std::filesystem::path& path, const std::vector<std::int32_t>& data);
std::vector<std::int32_t> read_i32(const std::filesystem::path& path);

/// FNV-1a 64-bit hash of a file's bytes, as a fixed-width hex string.
std::string file_checksum(const std::filesystem::path& path);
std::string bytes_checksum(const void* data, std::size_t len);

} // namespace facefit::io
