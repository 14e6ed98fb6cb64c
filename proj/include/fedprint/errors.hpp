#pragma once

#include <stdexcept>
#include <string>

namespace fedprint {

// Error categories map onto the CLI exit codes:
//   config_error -> 2, io_error -> 3, everything below data_error -> 4.

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/parameter dimensions.
struct shape_error : data_error {
  using data_error::data_error;
};

// Broken sequencing between federation stages (missing models, bad round).
struct protocol_error : data_error {
  using data_error::data_error;
};

// Cosine similarity of a footprint whose norm is below 1e-12.
struct undefined_similarity : data_error {
  using data_error::data_error;
};

}  // namespace fedprint
