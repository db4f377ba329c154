#include "meshfield/container.hpp"

#include <cstring>
#include <fstream>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

void store_u16(std::string& out, uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}

void store_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& path;
  const std::string& bytes;
  size_t pos = 0;

  [[noreturn]] void truncated(const std::string& what) {
    fail(ErrorKind::parse, path + ": truncated at byte " + std::to_string(pos) + " reading " + what);
  }
  uint8_t u8(const std::string& what) {
    if (pos + 1 > bytes.size()) truncated(what);
    return uint8_t(bytes[pos++]);
  }
  uint16_t u16(const std::string& what) {
    if (pos + 2 > bytes.size()) truncated(what);
    uint16_t v = uint16_t(uint8_t(bytes[pos])) | uint16_t(uint8_t(bytes[pos + 1])) << 8;
    pos += 2;
    return v;
  }
  uint32_t u32(const std::string& what) {
    if (pos + 4 > bytes.size()) truncated(what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(bytes[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
};

template <typename T>
std::vector<T> decode_le(const std::vector<unsigned char>& payload) {
  std::vector<T> out(payload.size() / sizeof(T));
  // Host is assumed little-endian for the payload blit; asserted at startup in
  // read/write below for exotic platforms.
  std::memcpy(out.data(), payload.data(), out.size() * sizeof(T));
  return out;
}

template <typename T>
std::vector<unsigned char> encode_le(const T* data, size_t n) {
  std::vector<unsigned char> out(n * sizeof(T));
  std::memcpy(out.data(), data, out.size());
  return out;
}

void assert_little_endian() {
  uint32_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) fail(ErrorKind::unsupported, "big-endian hosts are not supported");
}

}  // namespace

size_t dtype_size(Dtype t) {
  switch (t) {
    case Dtype::f32: return 4;
    case Dtype::f64: return 8;
    case Dtype::i32: return 4;
  }
  return 0;
}

size_t NamedArray::element_count() const {
  size_t n = 1;
  for (uint32_t d : dims) n *= d;
  return dims.empty() ? 0 : n;
}

std::vector<float> NamedArray::as_f32() const { return decode_le<float>(payload); }
std::vector<double> NamedArray::as_f64() const { return decode_le<double>(payload); }
std::vector<int32_t> NamedArray::as_i32() const { return decode_le<int32_t>(payload); }

const NamedArray* Container::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

const NamedArray& Container::require(const std::string& name, Dtype dtype) const {
  const NamedArray* a = find(name);
  if (!a) fail(ErrorKind::parse, "missing array '" + name + "'");
  if (a->dtype != dtype) fail(ErrorKind::parse, "array '" + name + "' has unexpected dtype");
  return *a;
}

void Container::put_f32(const std::string& name, std::vector<uint32_t> dims, const float* data) {
  NamedArray a{name, Dtype::f32, std::move(dims), {}};
  a.payload = encode_le(data, a.element_count());
  arrays.push_back(std::move(a));
}

void Container::put_f64(const std::string& name, std::vector<uint32_t> dims, const double* data) {
  NamedArray a{name, Dtype::f64, std::move(dims), {}};
  a.payload = encode_le(data, a.element_count());
  arrays.push_back(std::move(a));
}

void Container::put_i32(const std::string& name, std::vector<uint32_t> dims, const int32_t* data) {
  NamedArray a{name, Dtype::i32, std::move(dims), {}};
  a.payload = encode_le(data, a.element_count());
  arrays.push_back(std::move(a));
}

Container read_container(const std::string& path, const std::string& expected_magic) {
  assert_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_file, path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::string magic_line = expected_magic + "\n";
  if (bytes.size() < magic_line.size() || bytes.compare(0, magic_line.size(), magic_line) != 0)
    fail(ErrorKind::parse, path + ": bad magic, expected '" + expected_magic + "'");

  Reader r{path, bytes, magic_line.size()};
  uint32_t count = r.u32("array count");
  Container c;
  for (uint32_t i = 0; i < count; ++i) {
    std::string ctx = "entry " + std::to_string(i);
    uint16_t name_len = r.u16(ctx + " name length");
    if (r.pos + name_len > bytes.size()) r.truncated(ctx + " name");
    NamedArray a;
    a.name.assign(bytes, r.pos, name_len);
    r.pos += name_len;
    ctx += " ('" + a.name + "')";
    uint8_t dtype = r.u8(ctx + " dtype");
    if (dtype > 2) fail(ErrorKind::parse, path + ": " + ctx + " has unknown dtype tag");
    a.dtype = Dtype(dtype);
    uint8_t ndim = r.u8(ctx + " rank");
    for (int d = 0; d < ndim; ++d) a.dims.push_back(r.u32(ctx + " dims"));
    size_t payload_size = a.element_count() * dtype_size(a.dtype);
    if (r.pos + payload_size > bytes.size()) r.truncated(ctx + " payload");
    a.payload.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + payload_size);
    r.pos += payload_size;
    c.arrays.push_back(std::move(a));
  }
  if (r.pos != bytes.size())
    fail(ErrorKind::parse, path + ": " + std::to_string(bytes.size() - r.pos) + " trailing bytes");
  return c;
}

void write_container(const Container& c, const std::string& path, const std::string& magic) {
  assert_little_endian();
  std::string out = magic + "\n";
  store_u32(out, uint32_t(c.arrays.size()));
  for (const auto& a : c.arrays) {
    if (a.name.size() > 0xffff) fail(ErrorKind::validation, "array name too long: " + a.name);
    store_u16(out, uint16_t(a.name.size()));
    out += a.name;
    out.push_back(char(uint8_t(a.dtype)));
    out.push_back(char(uint8_t(a.dims.size())));
    for (uint32_t d : a.dims) store_u32(out, d);
    out.append(reinterpret_cast<const char*>(a.payload.data()), a.payload.size());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::missing_file, "cannot open for write: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) fail(ErrorKind::validation, "short write: " + path);
}

}  // namespace meshfield
