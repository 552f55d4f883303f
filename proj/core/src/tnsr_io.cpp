#include "nimbus/tnsr_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace nimbus {

static_assert(std::endian::native == std::endian::little,
              "TNSR1 I/O assumes a little-endian host");

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw IoError("truncated TNSR1 record");
  return v;
}

}  // namespace

void write_tnsr(std::ostream& out, const Tensor& t, Dtype dtype) {
  out.write("TNSR", 4);
  const unsigned char version = 1;
  const unsigned char dt = static_cast<unsigned char>(dtype);
  const unsigned char rank = static_cast<unsigned char>(t.rank());
  out.put(static_cast<char>(version));
  out.put(static_cast<char>(dt));
  out.put(static_cast<char>(rank));
  for (int i = 0; i < t.rank(); ++i) put_u32(out, static_cast<std::uint32_t>(t.dim(i)));
  if (dtype == Dtype::F64) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size()) * 8);
  } else {
    std::vector<float> narrow(static_cast<std::size_t>(t.size()));
    for (std::int64_t i = 0; i < t.size(); ++i)
      narrow[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    out.write(reinterpret_cast<const char*>(narrow.data()),
              static_cast<std::streamsize>(narrow.size()) * 4);
  }
  if (!out) throw IoError("TNSR1 write failed");
}

bool try_read_tnsr(std::istream& in, Tensor* out) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() == 0 && in.eof()) return false;
  if (in.gcount() != 4 || std::memcmp(magic, "TNSR", 4) != 0)
    throw IoError("bad TNSR1 magic");
  const int version = in.get();
  const int dt = in.get();
  const int rank = in.get();
  if (!in) throw IoError("truncated TNSR1 header");
  if (version != 1) throw IoError("unsupported TNSR1 version " + std::to_string(version));
  if (dt != 0 && dt != 1) throw IoError("unsupported TNSR1 dtype " + std::to_string(dt));
  Shape shape(static_cast<std::size_t>(rank));
  for (int i = 0; i < rank; ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(get_u32(in));
  Tensor t(shape);
  if (dt == 1) {
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size()) * 8);
  } else {
    std::vector<float> narrow(static_cast<std::size_t>(t.size()));
    in.read(reinterpret_cast<char*>(narrow.data()),
            static_cast<std::streamsize>(narrow.size()) * 4);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = narrow[static_cast<std::size_t>(i)];
  }
  if (!in) throw IoError("truncated TNSR1 payload");
  *out = std::move(t);
  return true;
}

Tensor read_tnsr(std::istream& in) {
  Tensor t;
  if (!try_read_tnsr(in, &t)) throw IoError("expected a TNSR1 record, found EOF");
  return t;
}

void save_tnsr(const std::string& path, const Tensor& t, Dtype dtype) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  write_tnsr(f, t, dtype);
}

Tensor load_tnsr(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  return read_tnsr(f);
}

void save_tnsr_records(const std::string& path, const std::vector<Tensor>& ts, Dtype dtype) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  for (const Tensor& t : ts) write_tnsr(f, t, dtype);
}

std::vector<Tensor> load_tnsr_records(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<Tensor> out;
  Tensor t;
  while (try_read_tnsr(f, &t)) out.push_back(std::move(t));
  return out;
}

}  // namespace nimbus
