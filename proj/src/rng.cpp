#include "norb/rng.hpp"

namespace norb {

std::uint64_t fnv1a64_str(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace norb
