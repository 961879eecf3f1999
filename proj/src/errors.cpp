#include "dfscan/errors.hpp"

#include <cerrno>
#include <cstring>

namespace dfscan {

std::string errno_message(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

}  // namespace dfscan
