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

#include "facefit/ad/tape.hpp"

#include <sstream>

namespace facefit::ad {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(same_shape(a.shape, b.shape), op, ": shape mismatch ", shape_str(a.shape), " vs ",
            shape_str(b.shape));
}

double Var::item() const {
    require(numel() == 1, "item(): tensor has ", numel(), " elements, expected a scalar");
    return data()[0];
}

Var Tape::leaf(const std::string& name, Tensor value) {
    require(!leaves_.contains(name), "leaf '", name, "' already registered");
    nodes_.push_back(Node{std::move(value), {}, nullptr});
    const int id = static_cast<int>(nodes_.size()) - 1;
    leaves_.emplace(name, id);
    return Var(this, id);
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::emit(Tensor value, std::vector<int> parents, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward)});
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

BackwardResult Tape::backward(const Var& loss) const {
    require(loss.valid() && &loss.tape() == this, "backward: loss is not on this tape");
    require(loss.numel() == 1, "backward: loss must be scalar, got ",
            shape_str(loss.shape()));

    Gradients grads(nodes_.size());
    grads.add(loss.id(), ArrayXd::Constant(1, 1.0));
    for (int id = loss.id(); id >= 0; --id) {
        if (!grads.has(id)) continue;
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.backward) node.backward(grads.at(id), grads);
    }
    return BackwardResult(this, std::move(grads));
}

Tensor BackwardResult::grad(const Var& v) const {
    const Tensor& val = tape_->value_of(v.id());
    if (!grads_.has(v.id())) return Tensor::zeros(val.shape);
    return Tensor(val.shape, grads_.at(v.id()));
}

Tensor BackwardResult::grad(const std::string& leaf_name) const {
    const auto& leaves = tape_->leaves();
    auto it = leaves.find(leaf_name);
    require(it != leaves.end(), "no leaf named '", leaf_name, "'");
    return grad(Var(const_cast<Tape*>(tape_), it->second));
}

std::map<std::string, Tensor> BackwardResult::leaf_grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : tape_->leaves()) {
        out.emplace(name, grad(Var(const_cast<Tape*>(tape_), id)));
    }
    return out;
}

void check_finite(const Var& v, const char* what) {
    if (!v.value().all_finite()) {
        throw MathDomainError(format_msg(what, ": non-finite values detected"));
    }
}

} // namespace facefit::ad
