// Copyright 2026 The imgprov Authors
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

namespace imgprov {

// Base of everything the library throws. The CLI maps DataError and
// PreconditionError to exit code 2 and NumericError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (bad files, unknown labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// An operation was called outside its documented domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Non-convergence or divergence of an iterative method.
class NumericError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& message) {
  if (!cond) throw PreconditionError(message);
}

}  // namespace imgprov
