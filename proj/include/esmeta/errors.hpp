#pragma once

#include <stdexcept>
#include <string>

namespace esmeta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Power box and sample box do not intersect at some hour, or a repair could
// not stay inside the sample box.
class InfeasibleBoxError : public Error {
 public:
  InfeasibleBoxError(int hour, const std::string& what)
      : Error(what), hour_(hour) {}
  int hour() const { return hour_; }

 private:
  int hour_;
};

class MalformedFileError : public Error {
 public:
  MalformedFileError(const std::string& path, long line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, long step, const std::string& what)
      : Error(what), epoch_(epoch), step_(step) {}
  int epoch() const { return epoch_; }
  long step() const { return step_; }

 private:
  int epoch_;
  long step_;
};

class AllStartsFailedError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; `field()` is a dotted path such as "storage.eta_ch".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace esmeta
