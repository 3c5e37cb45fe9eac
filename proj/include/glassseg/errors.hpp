/* Copyright 2026 The glassseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef GLASSSEG_ERRORS_HPP_
#define GLASSSEG_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace glassseg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or map shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input values outside an operation's domain (non-binary masks, bad ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in activations or losses.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or out-of-range configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and codec failures. The message always names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public IoError {
 public:
  using IoError::IoError;
};

/// Image and mask (or auxiliary maps) disagree in spatial size.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Command-line misuse; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace glassseg

#endif  // GLASSSEG_ERRORS_HPP_
