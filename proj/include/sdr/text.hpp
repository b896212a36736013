/*******************************************************************************
* Copyright 2026 The SDR Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdr {

// Locale-independent number/text helpers built on std::to_chars/from_chars so
// every emitted byte is reproducible across runs and machines.

/// Fixed-point rendering with `digits` decimals (log and report fields).
std::string format_fixed(double v, int digits);

/// Shortest representation that round-trips the exact double (17 significant
/// digits when needed); used by csv export.
std::string format_roundtrip(double v);

std::string format_u64(unsigned long long v);

/// Strict full-string parse; rejects NaN/Inf and trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<unsigned long long> parse_u64(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

} // namespace sdr
