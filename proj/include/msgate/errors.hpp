// Copyright 2026 The msgate Authors
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

namespace msgate {

/// Operator dimension exceeds the configured maximum.
struct SizeError : std::length_error {
    using std::length_error::length_error;
};

/// Argument outside the domain of an operation (t outside a pulse, eps = 0, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Fock truncation too small for the requested displacement.
struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid caller-supplied data (non-Hermitian observable, probabilities outside [0,1]).
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Numerical integration failed. `stiffness()` distinguishes step underflow from norm drift.
class IntegrationError : public std::runtime_error {
  public:
    enum class Kind { StepUnderflow, NormDrift };

    IntegrationError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }
    bool stiffness() const noexcept { return kind_ == Kind::StepUnderflow; }

  private:
    Kind kind_;
};

/// A least-squares fit could not produce a trustworthy answer.
class FitError : public std::runtime_error {
  public:
    FitError(const std::string &what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

/// Scenario file rejected by the schema. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string key, const std::string &what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string &key() const noexcept { return key_; }

  private:
    std::string key_;
};

}  // namespace msgate
