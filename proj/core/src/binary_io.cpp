#include "fbee/binary_io.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fbee {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian hosts");

namespace {
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;
}

void BinaryWriter::raw(const void* data, std::size_t size) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out_) throw std::runtime_error("checkpoint write failed");
}

void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::i64(std::int64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::string(const std::string& s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryWriter::ints(const std::vector<int>& values) {
  u64(values.size());
  for (int v : values) i64(v);
}

void BinaryReader::raw(void* data, std::size_t size) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (!in_) throw std::runtime_error("checkpoint truncated");
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v;
  raw(&v, sizeof v);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v;
  raw(&v, sizeof v);
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v;
  raw(&v, sizeof v);
  return v;
}

double BinaryReader::f64() {
  double v;
  raw(&v, sizeof v);
  return v;
}

std::string BinaryReader::string() {
  const auto n = u64();
  if (n > kMaxElements) throw std::runtime_error("checkpoint string too long");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

Eigen::MatrixXd BinaryReader::matrix() {
  const auto rows = u64();
  const auto cols = u64();
  if (rows * cols > kMaxElements) throw std::runtime_error("checkpoint matrix too large");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f64();
  }
  return m;
}

Eigen::VectorXd BinaryReader::vector() {
  const auto n = u64();
  if (n > kMaxElements) throw std::runtime_error("checkpoint vector too large");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
  return v;
}

std::vector<int> BinaryReader::ints() {
  const auto n = u64();
  if (n > kMaxElements) throw std::runtime_error("checkpoint int list too long");
  std::vector<int> values(n);
  for (auto& v : values) v = static_cast<int>(i64());
  return values;
}

void BinaryReader::expect_tag(std::uint32_t expected, const char* what) {
  if (u32() != expected) throw std::runtime_error(std::string("checkpoint: bad section tag for ") + what);
}

}  // namespace fbee
