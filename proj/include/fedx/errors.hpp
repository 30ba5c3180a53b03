/*
 * Copyright 2026 The fedx Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDX_ERRORS_HPP
#define FEDX_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ZeroNormVector : public Error {
public:
    explicit ZeroNormVector(std::size_t index)
        : Error("decoder " + std::to_string(index) + " has zero norm"), index_(index) {}
    explicit ZeroNormVector(const std::string& what)
        : Error(what) {}

    /// Offending decoder position, when known.
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_ = static_cast<std::size_t>(-1);
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class NonFiniteValue : public Error {
public:
    using Error::Error;
};

class InvalidWeights : public Error {
public:
    using Error::Error;
};

class ManifestMismatch : public Error {
public:
    using Error::Error;
};

class OverlappingClusters : public Error {
public:
    using Error::Error;
};

class TooFewDecoders : public Error {
public:
    using Error::Error;
};

class InvalidAssignment : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

class MismatchedSeeds : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Wraps an error raised inside a protocol round with the round number.
class RoundError : public Error {
public:
    RoundError(int round, const std::string& what)
        : Error("round " + std::to_string(round) + ": " + what), round_(round) {}

    int round() const noexcept { return round_; }

private:
    int round_;
};

}  // namespace fedx

#endif  // FEDX_ERRORS_HPP
