#pragma once

#include <stdexcept>
#include <string>

namespace dfscan {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An input source could not be opened or read.
class IoError : public Error {
 public:
  using Error::Error;
};

// Input was readable but is not the documented format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A listener could not be started (port in use, bind failure).
class StartupError : public Error {
 public:
  using Error::Error;
};

// The target guard refused a connection before it was opened.
class TargetRefused : public Error {
 public:
  using Error::Error;
};

std::string errno_message(const std::string& what);

}  // namespace dfscan
