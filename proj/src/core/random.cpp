#include "sept/core/random.hpp"

#include <sstream>
#include <stdexcept>

namespace sept {

std::string save_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng load_rng(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (!is) throw std::runtime_error("load_rng: malformed engine state");
  return rng;
}

}  // namespace sept
