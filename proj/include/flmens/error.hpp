#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flmens {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A problem with an input file. `line` is 1-based; 0 means the whole file.
class DataError : public Error {
 public:
  DataError(std::string file, std::size_t line, const std::string& message)
      : Error(format(file, line, message)), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& file, std::size_t line,
                            const std::string& message) {
    if (line == 0) return file + ": " + message;
    return file + ":" + std::to_string(line) + ": " + message;
  }

  std::string file_;
  std::size_t line_;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace flmens
