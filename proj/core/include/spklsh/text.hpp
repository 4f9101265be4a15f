// Copyright 2026 The spklsh Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spklsh {

/// Shortest round-trippable decimal representation of a double,
/// locale-independent ('.' decimal separator always).
std::string format_double(double value);

/// Parses a full string as a double. Returns false on trailing garbage,
/// empty input or out-of-range values.
bool parse_double(std::string_view text, double& out);

/// Splits on a single-character delimiter; keeps empty fields.
std::vector<std::string_view> split(std::string_view line, char delim);

/// Strips one trailing '\r' (CRLF input tolerance).
std::string_view strip_cr(std::string_view line);

}  // namespace spklsh
