#pragma once

#include <stdexcept>
#include <string>

namespace hrt {

enum class Errc {
  // market data
  missing_ticker,
  malformed_row,
  empty_intersection,
  invalid_spec,
  last_day,
  // networks / optimizers
  shape_mismatch,
  non_finite_gradient,
  architecture_mismatch,
  // environment
  frame_too_short,
  non_finite_sizes,
  // agents
  buffer_too_small,
  non_finite_loss,
  // analytics
  zero_volatility,
  unmapped_ticker,
  dimension_mismatch,
  // persistence
  checksum_error,
  version_error,
  io_error,
  // configuration
  config_error,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace hrt
