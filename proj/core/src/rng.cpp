#include "hrt/rng.hpp"

#include <sstream>

#include "hrt/error.hpp"

namespace hrt {

std::string Rng::serialize() const {
  std::ostringstream oss;
  oss << engine_;
  return oss.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng;
  std::istringstream iss(text);
  iss >> rng.engine_;
  if (iss.fail()) throw Error(Errc::io_error, "bad RNG state string");
  return rng;
}

}  // namespace hrt
