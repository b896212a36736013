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

#include <stdexcept>
#include <string>

namespace sdr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension or shape disagreement between tensors/parameters.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (csv, split file, config text).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Eval-mode forward requested without calibrated BN statistics.
class CalibrationError : public Error {
public:
    using Error::Error;
};

/// A cluster ended up with no samples.
class EmptyClusterError : public Error {
public:
    using Error::Error;
};

/// File-level I/O failure, bad magic/checksum, truncated stream.
class IoError : public Error {
public:
    using Error::Error;
};

/// backward() called with a cache from an outdated forward pass.
class StaleCacheError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage is missing an artifact a prior stage produces.
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

} // namespace sdr

#define SDR_CHECK(cond, msg)                                                   \
    do {                                                                       \
        if (!(cond)) throw ::sdr::Error(std::string(msg));                     \
    } while (0)

#define SDR_CHECK_SHAPE(cond, msg)                                             \
    do {                                                                       \
        if (!(cond)) throw ::sdr::ShapeError(std::string(msg));                \
    } while (0)
