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

#include <sstream>
#include <stdexcept>
#include <string>

namespace facefit {

/// Contract violation (bad argument shapes, dimension mismatches, broken
/// preconditions). All public entry points throw this rather than asserting.
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Domain error for math outside an operation's domain (log/sqrt of negatives).
class MathDomainError : public std::domain_error {
public:
    explicit MathDomainError(const std::string& msg) : std::domain_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    format_into(os, rest...);
}
} // namespace detail

template <typename... Args>
std::string format_msg(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    return os.str();
}

template <typename... Args>
void require(bool cond, const Args&... args) {
    if (!cond) {
        throw ContractError(format_msg(args...));
    }
}

template <typename... Args>
void require_domain(bool cond, const Args&... args) {
    if (!cond) {
        throw MathDomainError(format_msg(args...));
    }
}

} // namespace facefit
