#pragma once

#include <stdexcept>
#include <string>

namespace labelshift {

// Base class for every error raised by the library. The CLI maps
// validation_error subtypes to exit code 2 and numerical_error to 3.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

class validation_error : public error {
 public:
  using error::error;
};

// Non-finite, negative, off-simplex or otherwise malformed values.
class invalid_input_error : public validation_error {
 public:
  using validation_error::validation_error;
};

// A sample row with zero likelihood under every candidate mixture.
class degenerate_sample_error : public validation_error {
 public:
  degenerate_sample_error(const std::string& what, std::size_t row)
      : validation_error(what), row_index(row) {}
  std::size_t row_index;
};

class unsupported_size_error : public validation_error {
 public:
  using validation_error::validation_error;
};

class configuration_error : public validation_error {
 public:
  using validation_error::validation_error;
};

// A stated precondition of an operation does not hold for the inputs.
class precondition_error : public validation_error {
 public:
  using validation_error::validation_error;
};

class numerical_error : public error {
 public:
  using error::error;
};

class singular_matrix_error : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

}  // namespace labelshift
