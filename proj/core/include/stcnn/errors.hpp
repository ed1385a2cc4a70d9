#pragma once

#include <stdexcept>
#include <string>

namespace stcnn {

/// Base of every error raised by the library. `category()` is a stable,
/// machine-parsable token used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

#define STCNN_DEFINE_ERROR(Name, token)                          \
  class Name : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
    const char* category() const noexcept override { return token; } \
  };

STCNN_DEFINE_ERROR(NotFound, "not_found")
STCNN_DEFINE_ERROR(FormatError, "format")
STCNN_DEFINE_ERROR(EmptySequence, "empty_sequence")
STCNN_DEFINE_ERROR(ArgumentError, "argument")
STCNN_DEFINE_ERROR(ShapeError, "shape")
STCNN_DEFINE_ERROR(DataError, "data")
STCNN_DEFINE_ERROR(ConfigError, "config")

#undef STCNN_DEFINE_ERROR

}  // namespace stcnn
