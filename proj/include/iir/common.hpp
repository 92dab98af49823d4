#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace iir {

/// Raised for malformed inputs, contract violations and numerical failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using TermId = std::uint32_t;
using DocIndex = std::uint32_t;

}  // namespace iir
