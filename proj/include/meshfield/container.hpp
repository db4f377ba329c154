#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace meshfield {

// Self-describing binary container: magic line, then named dimensioned arrays
// with little-endian payloads. Backing format for head assets and checkpoints.
enum class Dtype : uint8_t { f32 = 0, f64 = 1, i32 = 2 };

size_t dtype_size(Dtype t);

struct NamedArray {
  std::string name;
  Dtype dtype = Dtype::f32;
  std::vector<uint32_t> dims;
  std::vector<unsigned char> payload;  // little-endian

  size_t element_count() const;
  std::vector<float> as_f32() const;
  std::vector<double> as_f64() const;
  std::vector<int32_t> as_i32() const;
};

struct Container {
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
  // Missing name or wrong dtype raises a parse/mismatch error naming the entry.
  const NamedArray& require(const std::string& name, Dtype dtype) const;

  void put_f32(const std::string& name, std::vector<uint32_t> dims, const float* data);
  void put_f64(const std::string& name, std::vector<uint32_t> dims, const double* data);
  void put_i32(const std::string& name, std::vector<uint32_t> dims, const int32_t* data);
};

Container read_container(const std::string& path, const std::string& expected_magic);
void write_container(const Container& c, const std::string& path, const std::string& magic);

}  // namespace meshfield
