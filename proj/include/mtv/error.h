// Copyright 2026 The mtverify Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MTV_ERROR_H_
#define MTV_ERROR_H_

#include <stdexcept>
#include <string>

namespace mtv {

// Root of every exception thrown by the library. Callers that only need to
// distinguish "our" failures from foreign ones catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (bad shape, bad permutation, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Text input could not be parsed.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Binary input has the wrong framing.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a domain invariant (label range, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An optimizer failed to converge or diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Non-finite values surfaced during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Plan or suite description is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Reads a whole file; throws IoError when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace mtv

#endif  // MTV_ERROR_H_
