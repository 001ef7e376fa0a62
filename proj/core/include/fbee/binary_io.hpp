#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fbee {

/// Little-endian binary primitives for checkpoint sections. Matrices are
/// written as (rows, cols) followed by row-major 64-bit floats.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void string(const std::string& s);
  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);
  void ints(const std::vector<int>& values);

 private:
  void raw(const void* data, std::size_t size);
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string string();
  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();
  std::vector<int> ints();

  /// Reads a u32 tag and throws unless it equals `expected`.
  void expect_tag(std::uint32_t expected, const char* what);

 private:
  void raw(void* data, std::size_t size);
  std::istream& in_;
};

}  // namespace fbee
