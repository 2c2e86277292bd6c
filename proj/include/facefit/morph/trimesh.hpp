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

#include <array>
#include <vector>

#include "facefit/ad/tensor.hpp"

namespace facefit::morph {

/// Triangle mesh with per-vertex UV coordinates and landmark metadata.
/// Vertices are in millimeters; triangles wind counter-clockwise seen from
/// outside.
struct TriMesh {
    ad::Tensor vertices;  // [N,3]
    std::vector<std::array<ad::Index, 3>> triangles;
    ad::Tensor uv;        // [N,2] in [0,1]^2
    std::vector<ad::Index> landmarks;  // vertex ids, distinct
    ad::Index nose_tip = -1;           // vertex id used as the crop center

    ad::Index num_vertices() const { return vertices.shape.empty() ? 0 : vertices.shape[0]; }
    ad::Index num_triangles() const { return static_cast<ad::Index>(triangles.size()); }

    void validate() const;

    /// Area-weighted per-vertex normals of the stored vertex positions
    /// (plain math, no tape).
    ad::Tensor vertex_normals() const;
};

} // namespace facefit::morph
