#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "casebench/linalg.hpp"

namespace casebench {

inline constexpr int kModelFormatVersion = 1;

/// Line-oriented text container. Every field is written as
///   name value...
/// with reals in hexadecimal floating point so reading restores them bitwise.
class ModelWriter {
 public:
  ModelWriter(std::ostream& out, std::string_view kind);

  void text(std::string_view name, std::string_view value);
  void integer(std::string_view name, std::int64_t value);
  void real(std::string_view name, double value);
  void vector(std::string_view name, const Eigen::VectorXd& v);
  void matrix(std::string_view name, const Eigen::MatrixXd& m);  // rows cols, then row-major values

 private:
  void begin(std::string_view name);
  std::ostream& out_;
};

/// Reads fields back in the order they were written; any mismatch is a DataError.
class ModelReader {
 public:
  explicit ModelReader(std::istream& in);

  const std::string& kind() const { return kind_; }
  std::string text(std::string_view name);
  std::int64_t integer(std::string_view name);
  double real(std::string_view name);
  Eigen::VectorXd vector(std::string_view name);
  Eigen::MatrixXd matrix(std::string_view name);

 private:
  void expect(std::string_view name);
  std::string token(std::string_view what);
  double parse_real(std::string_view what);
  std::int64_t parse_integer(std::string_view what);

  std::istream& in_;
  std::string kind_;
};

}  // namespace casebench
