#include "egap/parallel.hpp"

#include <cstdlib>
#include <string>

namespace egap {

std::size_t worker_count() {
  const char* env = std::getenv("EGAP_WORKERS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    const long value = std::stol(env);
    return value > 0 ? static_cast<std::size_t>(value) : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace egap
