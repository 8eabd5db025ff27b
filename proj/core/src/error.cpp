#include "hrt/error.hpp"

namespace hrt {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::missing_ticker: return "MissingTicker";
    case Errc::malformed_row: return "MalformedRow";
    case Errc::empty_intersection: return "EmptyIntersection";
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::last_day: return "LastDay";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::non_finite_gradient: return "NonFiniteGradient";
    case Errc::architecture_mismatch: return "ArchitectureMismatch";
    case Errc::frame_too_short: return "FrameTooShort";
    case Errc::non_finite_sizes: return "NonFiniteSizes";
    case Errc::buffer_too_small: return "BufferTooSmall";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::zero_volatility: return "ZeroVolatility";
    case Errc::unmapped_ticker: return "UnmappedTicker";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::checksum_error: return "ChecksumError";
    case Errc::version_error: return "VersionError";
    case Errc::io_error: return "IoError";
    case Errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace hrt
