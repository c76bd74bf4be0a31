#include "cli/logit_file.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <vector>

namespace sactc::cli {
namespace {

static_assert(std::endian::native == std::endian::little,
              "logit files are read with native little-endian layout");

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char bytes[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

}  // namespace

LogitGrid read_logit_file(std::istream& in) {
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader) throw InvalidArgument("logit file shorter than its header");
  if (std::memcmp(bytes.data(), kLogitMagic, 4) != 0) {
    throw InvalidArgument("logit file has bad magic (expected SALM)");
  }
  const std::uint32_t version = read_u32(bytes.data() + 4);
  if (version != kLogitVersion) {
    throw InvalidArgument("unsupported logit file version " + std::to_string(version));
  }
  const std::uint64_t frames = read_u32(bytes.data() + 8);
  const std::uint64_t vocab = read_u32(bytes.data() + 12);
  if (frames == 0 || vocab == 0) throw InvalidArgument("logit file declares an empty grid");
  const std::uint64_t expected = kHeader + frames * vocab * sizeof(double);
  if (bytes.size() != expected) {
    throw InvalidArgument("logit file payload is " + std::to_string(bytes.size() - kHeader) +
                          " bytes, header declares " + std::to_string(expected - kHeader));
  }
  Matrix values(frames, vocab);
  std::memcpy(values.data().data(), bytes.data() + kHeader, frames * vocab * sizeof(double));
  return LogitGrid(std::move(values));
}

LogitGrid read_logit_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open logit file '" + path + "'");
  return read_logit_file(in);
}

void write_logit_file(std::ostream& out, const Matrix& values) {
  out.write(kLogitMagic, 4);
  write_u32(out, kLogitVersion);
  write_u32(out, static_cast<std::uint32_t>(values.rows()));
  write_u32(out, static_cast<std::uint32_t>(values.cols()));
  out.write(reinterpret_cast<const char*>(values.data().data()),
            static_cast<std::streamsize>(values.data().size() * sizeof(double)));
}

void write_logit_file(const std::string& path, const Matrix& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write logit file '" + path + "'");
  write_logit_file(out, values);
}

}  // namespace sactc::cli
