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

#include "facefit/morph/bundle.hpp"

namespace facefit::morph {

/// Knobs for the synthetic model-bundle generator.
struct GenOptions {
    std::uint64_t seed = 1;
    ad::Index n_template = 2562;  // minimum vertex count; rounded up to an
                                  // icosphere subdivision level
    ad::Index n_s = 40;
    ad::Index n_e = 10;
    ad::Index h_uv = 64;
    ad::Index n_landmarks = 68;
    ad::Index corpus_size = 500;
    ad::Index n_t = 64;  // texture PCA components
};

/// Generates a complete desk-scale model bundle: a deformed icosphere "head"
/// template (radius ~100 mm) with a cylindrical UV unwrap, orthonormal
/// eigenvalue-scaled shape/expression bases from smooth random displacement
/// fields, a procedural texture corpus, a PCA texture model of that corpus,
/// and scene defaults. Deterministic given the seed.
ModelBundle gen_synthetic_bundle(const GenOptions& opts);

} // namespace facefit::morph
