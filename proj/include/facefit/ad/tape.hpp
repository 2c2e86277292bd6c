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

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "facefit/ad/tensor.hpp"

namespace facefit::ad {

class Tape;

/// Handle to a node on a tape: the recorded value plus enough identity to
/// route gradients. Cheap to copy; does not own anything.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    int id() const { return id_; }
    Tape& tape() const { return *tape_; }

    const Tensor& value() const;
    const ArrayXd& data() const { return value().data; }
    const Shape& shape() const { return value().shape; }
    Index numel() const { return value().numel(); }
    /// Scalar read; contract-checked.
    double item() const;

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Per-node gradient accumulator used during the backward sweep.
class Gradients {
public:
    explicit Gradients(std::size_t n) : grads_(n) {}

    void add(int id, const ArrayXd& g) {
        auto& slot = grads_[static_cast<std::size_t>(id)];
        if (slot)
            *slot += g;
        else
            slot = g;
    }
    bool has(int id) const { return grads_[static_cast<std::size_t>(id)].has_value(); }
    const ArrayXd& at(int id) const { return *grads_[static_cast<std::size_t>(id)]; }

private:
    std::vector<std::optional<ArrayXd>> grads_;
};

/// Result of a backward sweep. Leaves unreachable from the loss report a
/// zero gradient of the leaf's shape.
class BackwardResult {
public:
    BackwardResult(const Tape* tape, Gradients grads) : tape_(tape), grads_(std::move(grads)) {}

    Tensor grad(const Var& v) const;
    Tensor grad(const std::string& leaf_name) const;
    std::map<std::string, Tensor> leaf_grads() const;

private:
    const Tape* tape_;
    Gradients grads_;
};

/// Append-only reverse-mode differentiation graph (define-by-run). One tape
/// per job; nodes are created in topological order by construction, and a
/// single backward sweep visits them in reverse.
class Tape {
public:
    using BackwardFn = std::function<void(const ArrayXd& gout, Gradients& sink)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers a named parameter leaf. Gradients for every registered leaf
    /// are reported by backward(), zero if unreachable.
    Var leaf(const std::string& name, Tensor value);

    /// Records a value with no gradient (inputs, frozen buffers).
    Var constant(Tensor value);
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    /// Records an op result. `parents` lists the input node ids; `backward`
    /// receives d(loss)/d(result) and must accumulate into the parents.
    Var emit(Tensor value, std::vector<int> parents, BackwardFn backward);

    const Tensor& value_of(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t size() const { return nodes_.size(); }
    const std::map<std::string, int>& leaves() const { return leaves_; }

    /// Reverse sweep from a scalar loss.
    BackwardResult backward(const Var& loss) const;

private:
    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;
    };

    // Deque keeps node addresses stable; backward closures capture pointers
    // into node values.
    std::deque<Node> nodes_;
    std::map<std::string, int> leaves_;

    friend class Var;
};

inline const Tensor& Var::value() const { return tape_->value_of(id_); }

/// Throws if any entry of v is NaN/Inf; `what` names the quantity.
void check_finite(const Var& v, const char* what);

} // namespace facefit::ad
