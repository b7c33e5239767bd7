#pragma once

#include <stdexcept>
#include <string>

namespace wips {

/// Exception type used throughout the library. The code is mapped onto the C
/// API status values and the CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Code {
    kConfig,           ///< malformed or out-of-range configuration
    kInvalidArgument,  ///< precondition violated by a caller
    kModeMismatch,     ///< operation not valid for the edge mode
    kNumerical,        ///< non-finite state or singular system
    kIo,               ///< file could not be read or written
  };

  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

[[noreturn]] inline void fail(Error::Code code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Error::Code code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace wips
