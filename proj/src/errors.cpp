#include "sstempo/errors.hpp"

#include <cerrno>
#include <cstring>

namespace sstempo {

void throw_io_error(const std::string& what, const std::string& path) {
  const int err = errno;
  std::string msg = what + ": " + path;
  if (err != 0) msg += " (" + std::string(std::strerror(err)) + ")";
  throw DataError(msg);
}

}  // namespace sstempo
