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

#include "facefit/io/array_store.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "facefit/core/require.hpp"

namespace facefit::io {

namespace {
std::vector<char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open ", path.string());
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<char> buf(static_cast<std::size_t>(len));
    in.read(buf.data(), len);
    require(in.good(), "short read on ", path.string());
    return buf;
}

void write_all(const std::filesystem::path& path, const void* data, std::size_t len) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), "cannot open ", path.string(), " for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    require(out.good(), "short write on ", path.string());
}
} // namespace

void write_f32(const std::filesystem::path& path, const ad::ArrayXd& data) {
    std::vector<float> f(static_cast<std::size_t>(data.size()));
    for (ad::Index i = 0; i < data.size(); ++i)
        f[static_cast<std::size_t>(i)] = static_cast<float>(data[i]);
    write_all(path, f.data(), f.size() * sizeof(float));
}

ad::ArrayXd read_f32(const std::filesystem::path& path) {
    const std::vector<char> buf = read_all(path);
    require(buf.size() % sizeof(float) == 0, path.string(), ": size not a multiple of 4");
    const std::size_t n = buf.size() / sizeof(float);
    ad::ArrayXd out(static_cast<ad::Index>(n));
    const float* f = reinterpret_cast<const float*>(buf.data());
    for (std::size_t i = 0; i < n; ++i) out[static_cast<ad::Index>(i)] = static_cast<double>(f[i]);
    return out;
}

void write_i32(const std::filesystem::path& path, const std::vector<std::int32_t>& data) {
    write_all(path, data.data(), data.size() * sizeof(std::int32_t));
}

std::vector<std::int32_t> read_i32(const std::filesystem::path& path) {
    const std::vector<char> buf = read_all(path);
    require(buf.size() % sizeof(std::int32_t) == 0, path.string(), ": size not a multiple of 4");
    std::vector<std::int32_t> out(buf.size() / sizeof(std::int32_t));
    std::memcpy(out.data(), buf.data(), buf.size());
    return out;
}

std::string bytes_checksum(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << h;
    return os.str();
}

std::string file_checksum(const std::filesystem::path& path) {
    const std::vector<char> buf = read_all(path);
    return bytes_checksum(buf.data(), buf.size());
}

} // namespace facefit::io
