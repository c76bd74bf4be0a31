#pragma once

#include <iosfwd>
#include <string>

#include "sactc/common.h"

namespace sactc::cli {

// "SALM" | u32 version = 1 | u32 T | u32 V | T*V float64, all little-endian,
// frame-major.
inline constexpr char kLogitMagic[4] = {'S', 'A', 'L', 'M'};
inline constexpr std::uint32_t kLogitVersion = 1;

// Throws InvalidArgument on a bad header or a payload of the wrong length.
LogitGrid read_logit_file(std::istream& in);
LogitGrid read_logit_file(const std::string& path);

void write_logit_file(std::ostream& out, const Matrix& values);
void write_logit_file(const std::string& path, const Matrix& values);

}  // namespace sactc::cli
