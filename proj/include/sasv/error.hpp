// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SASV_ERROR_HPP_
#define SASV_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sasv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric core.
class ShapeError : public Error { using Error::Error; };
class DegenerateMaskError : public Error { using Error::Error; };
class TrackingError : public Error { using Error::Error; };

// Back-end model.
class EmptyEnrollmentError : public Error { using Error::Error; };
class DegenerateEnrollmentError : public Error { using Error::Error; };
class NormError : public Error { using Error::Error; };
class CheckpointError : public Error { using Error::Error; };

// Sampling and training.
class PoolExhaustedError : public Error { using Error::Error; };
class NonFiniteError : public Error { using Error::Error; };

// Evaluation.
class EmptyClassError : public Error { using Error::Error; };

// File ingestion.
class IoError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class DimensionError : public ParseError { using ParseError::ParseError; };
class DuplicateIdError : public ParseError { using ParseError::ParseError; };
class BadLabelError : public ParseError { using ParseError::ParseError; };
class UnresolvedIdError : public Error { using Error::Error; };

// Generator configuration that cannot produce the requested trials.
class ConfigError : public Error { using Error::Error; };

}  // namespace sasv

#endif  // SASV_ERROR_HPP_
