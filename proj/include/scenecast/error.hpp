#pragma once

#include <stdexcept>
#include <string>

namespace scenecast {

/// Base error for every pipeline stage. The message is what the CLI prints.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace scenecast
