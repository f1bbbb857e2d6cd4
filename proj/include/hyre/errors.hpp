#pragma once

#include <stdexcept>
#include <string>

namespace hyre {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// invalid_argument -> 2 (config), format/io -> 3 (data), numeric -> 4.

class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

class budget_exhausted : public std::runtime_error {
 public:
  explicit budget_exhausted(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hyre
