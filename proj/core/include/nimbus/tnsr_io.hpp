#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nimbus/tensor.hpp"

namespace nimbus {

enum class Dtype : unsigned char { F32 = 0, F64 = 1 };

// TNSR1 record: magic "TNSR", version u8 = 1, dtype u8 (0 = f32, 1 = f64),
// rank u8, extents as little-endian u32, then raw little-endian values
// row-major. A file may hold a sequence of records.
void write_tnsr(std::ostream& out, const Tensor& t, Dtype dtype = Dtype::F64);
Tensor read_tnsr(std::istream& in);
bool try_read_tnsr(std::istream& in, Tensor* out);  // false at clean EOF

void save_tnsr(const std::string& path, const Tensor& t, Dtype dtype = Dtype::F64);
Tensor load_tnsr(const std::string& path);

void save_tnsr_records(const std::string& path, const std::vector<Tensor>& ts,
                       Dtype dtype = Dtype::F64);
std::vector<Tensor> load_tnsr_records(const std::string& path);

}  // namespace nimbus
