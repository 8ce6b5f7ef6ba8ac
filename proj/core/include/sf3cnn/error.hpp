/* Copyright 2026 The Sf3CNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <stdexcept>
#include <string>

namespace sf3cnn {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete kind onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents disagree or a derived extent is non-positive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, preset, or hyperparameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad user-provided data: empty videos, empty splits, invalid labels.
class InputError : public Error {
 public:
  using Error::Error;
};

// A feature or weight row with zero norm reached the angular head.
class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

// NaN or Inf encountered in a loss, gradient, or input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Filesystem or format failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint written for a different configuration.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace sf3cnn
