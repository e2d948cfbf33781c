#include "casebench/model_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "casebench/errors.hpp"

namespace casebench {

namespace {

constexpr std::string_view kMagic = "casebench-model";

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

}  // namespace

ModelWriter::ModelWriter(std::ostream& out, std::string_view kind) : out_(out) {
  out_ << kMagic << ' ' << kModelFormatVersion << '\n';
  text("kind", kind);
}

void ModelWriter::begin(std::string_view name) { out_ << name; }

void ModelWriter::text(std::string_view name, std::string_view value) {
  begin(name);
  out_ << ' ' << value << '\n';
}

void ModelWriter::integer(std::string_view name, std::int64_t value) {
  begin(name);
  out_ << ' ' << value << '\n';
}

void ModelWriter::real(std::string_view name, double value) {
  begin(name);
  out_ << ' ' << format_real(value) << '\n';
}

void ModelWriter::vector(std::string_view name, const Eigen::VectorXd& v) {
  begin(name);
  out_ << ' ' << v.size();
  for (Index i = 0; i < v.size(); ++i) out_ << ' ' << format_real(v[i]);
  out_ << '\n';
}

void ModelWriter::matrix(std::string_view name, const Eigen::MatrixXd& m) {
  begin(name);
  out_ << ' ' << m.rows() << ' ' << m.cols();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) out_ << ' ' << format_real(m(r, c));
  out_ << '\n';
}

ModelReader::ModelReader(std::istream& in) : in_(in) {
  const std::string magic = token("format header");
  if (magic != kMagic) throw DataError("not a casebench model file");
  const std::int64_t version = parse_integer("format version");
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  kind_ = text("kind");
}

std::string ModelReader::token(std::string_view what) {
  std::string t;
  if (!(in_ >> t)) throw DataError("model file truncated while reading " + std::string(what));
  return t;
}

void ModelReader::expect(std::string_view name) {
  const std::string got = token(name);
  if (got != name) throw DataError("model file: expected field '" + std::string(name) + "', found '" + got + "'");
}

double ModelReader::parse_real(std::string_view what) {
  const std::string t = token(what);
  double v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw DataError("model file: bad real '" + t + "' in " + std::string(what));
  }
  return v;
}

std::int64_t ModelReader::parse_integer(std::string_view what) {
  const std::string t = token(what);
  std::int64_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw DataError("model file: bad integer '" + t + "' in " + std::string(what));
  }
  return v;
}

std::string ModelReader::text(std::string_view name) {
  expect(name);
  return token(name);
}

std::int64_t ModelReader::integer(std::string_view name) {
  expect(name);
  return parse_integer(name);
}

double ModelReader::real(std::string_view name) {
  expect(name);
  return parse_real(name);
}

Eigen::VectorXd ModelReader::vector(std::string_view name) {
  expect(name);
  const std::int64_t n = parse_integer(name);
  if (n < 0) throw DataError("model file: negative size in " + std::string(name));
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = parse_real(name);
  return v;
}

Eigen::MatrixXd ModelReader::matrix(std::string_view name) {
  expect(name);
  const std::int64_t rows = parse_integer(name), cols = parse_integer(name);
  if (rows < 0 || cols < 0) throw DataError("model file: negative size in " + std::string(name));
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = parse_real(name);
  return m;
}

}  // namespace casebench
