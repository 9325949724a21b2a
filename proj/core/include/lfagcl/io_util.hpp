#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "lfagcl/errors.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

// Little-endian binary writer over a stream. Multi-byte values are encoded
// byte by byte so files are identical on any host.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t len);
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void tag(const char (&t)[5]) { bytes(t, 4); }
  void str(const std::string& s);  // u64 length + raw bytes
  // Row-major doubles; the matrix type is row-major so this is its storage order.
  void matrix(const Matrix& m);

 private:
  std::ostream& out_;
};

// Matching reader. `section` names the region being read; truncation and
// stream errors raise IoError mentioning it.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in, std::string file_label = "")
      : in_(in), label_(std::move(file_label)) {}

  void section(const std::string& name) { section_ = name; }
  const std::string& section() const { return section_; }

  void bytes(void* data, std::size_t len);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string tag4();
  std::string str();
  Matrix matrix(Eigen::Index rows, Eigen::Index cols);
  // True when the stream is exactly at end-of-file.
  bool at_eof();

  void expect_tag(const char (&t)[5]);

 private:
  [[noreturn]] void fail(const std::string& what) const;
  std::istream& in_;
  std::string label_;
  std::string section_ = "header";
};

std::uint64_t hash_file(const std::string& path);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace lfagcl
