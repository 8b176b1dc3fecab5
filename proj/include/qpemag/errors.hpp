// Copyright 2026 The qpemag Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qpemag {

/// The posterior carries no first-harmonic information (b_{-1} == 0), so no
/// phase estimate exists.
struct NoInformationError : std::domain_error {
    using std::domain_error::domain_error;
};

/// An internal numerical consistency check failed (e.g. a density that should
/// be real picked up an imaginary part, or a probability left [0, 1]).
struct ConsistencyError : std::logic_error {
    using std::logic_error::logic_error;
};

/// A configuration document was malformed. `key_path` names the offending
/// entry, e.g. "M_K_F[1][0]"; it is empty for document-level problems.
struct ConfigError : std::runtime_error {
    ConfigError(std::string key_path, const std::string &what)
        : std::runtime_error(key_path.empty() ? what : key_path + ": " + what), key_path(std::move(key_path)) {
    }
    std::string key_path;
};

}  // namespace qpemag
