#include "ssc/grid_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace ssc {

namespace {

constexpr std::uint64_t kMaxElements = 1ull << 31;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u32(out, static_cast<std::uint32_t>(bits & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(bits >> 32));
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::invalid_argument("cannot open for writing: " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::invalid_argument("write failed: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

// Cursor over a byte buffer that reports the offset of whatever failed.
struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::uint64_t pos = 0;

  void need(std::uint64_t n, const char* what) const {
    if (pos + n > bytes.size()) {
      throw FormatError(std::string("truncated file while reading ") + what, pos);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) |
                      (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
    pos += 4;
    return v;
  }

  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t lo = u32(what);
    std::uint64_t hi = u32(what);
    std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  void magic(const char* expect) {
    need(4, "magic");
    if (std::memcmp(bytes.data() + pos, expect, 4) != 0) {
      throw FormatError(std::string("bad magic, expected ") + expect, pos);
    }
    pos += 4;
  }

  std::uint32_t dim(const char* what) {
    std::uint64_t at = pos;
    std::uint32_t v = u32(what);
    if (v == 0) throw FormatError(std::string("zero dimension ") + what, at);
    return v;
  }

  void finish() const {
    if (pos != bytes.size()) {
      throw FormatError("trailing bytes after payload", pos);
    }
  }
};

void check_elements(std::uint64_t n, std::uint64_t at) {
  if (n > kMaxElements) throw FormatError("dimension product overflows", at);
}

}  // namespace

void write_grid(const std::string& path, const VoxelGrid& grid) {
  if (grid.dims.count() == 0 || grid.feature_dim < 1) {
    throw std::invalid_argument("cannot write empty grid");
  }
  std::string out;
  out.reserve(52 + grid.data.size() * 4);
  out += "VXG1";
  put_u32(out, static_cast<std::uint32_t>(grid.dims.h));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.w));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.z));
  put_u32(out, static_cast<std::uint32_t>(grid.feature_dim));
  put_f64(out, grid.voxel_size);
  put_f64(out, grid.origin[0]);
  put_f64(out, grid.origin[1]);
  put_f64(out, grid.origin[2]);
  for (double v : grid.data) put_f32(out, static_cast<float>(v));
  write_file(path, out);
}

void write_grid(const std::string& path, const OccupancyGrid& grid) {
  if (grid.dims.count() == 0) throw std::invalid_argument("cannot write empty grid");
  std::string out;
  out.reserve(16 + grid.data.size());
  out += "VXO1";
  put_u32(out, static_cast<std::uint32_t>(grid.dims.h));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.w));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.z));
  for (std::uint8_t v : grid.data) out.push_back(static_cast<char>(v));
  write_file(path, out);
}

void write_grid(const std::string& path, const SemanticGrid& grid) {
  if (grid.dims.count() == 0) throw std::invalid_argument("cannot write empty grid");
  std::string out;
  out.reserve(20 + grid.labels.size());
  out += "VXL1";
  put_u32(out, static_cast<std::uint32_t>(grid.dims.h));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.w));
  put_u32(out, static_cast<std::uint32_t>(grid.dims.z));
  put_u32(out, static_cast<std::uint32_t>(grid.num_classes));
  for (std::uint8_t v : grid.labels) out.push_back(static_cast<char>(v));
  write_file(path, out);
}

VoxelGrid read_voxel_grid(const std::string& path) {
  auto bytes = read_file(path);
  Reader r{bytes};
  r.magic("VXG1");
  std::uint64_t dim_at = r.pos;
  std::uint32_t h = r.dim("h");
  std::uint32_t w = r.dim("w");
  std::uint32_t z = r.dim("z");
  std::uint32_t d = r.dim("d");
  std::uint64_t n = static_cast<std::uint64_t>(h) * w * z * d;
  check_elements(n, dim_at);
  double voxel_size = r.f64("voxel_size");
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw FormatError("voxel_size must be positive and finite", r.pos - 8);
  }
  std::array<double, 3> origin;
  for (int a = 0; a < 3; ++a) {
    origin[a] = r.f64("origin");
    if (!std::isfinite(origin[a])) throw FormatError("non-finite origin", r.pos - 8);
  }
  VoxelGrid grid(Dims{static_cast<int>(h), static_cast<int>(w), static_cast<int>(z)},
                 static_cast<int>(d), 0.0, voxel_size, origin);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint64_t at = r.pos;
    float v = r.f32("payload");
    if (!std::isfinite(v)) throw FormatError("non-finite payload value", at);
    grid.data[i] = v;
  }
  r.finish();
  return grid;
}

OccupancyGrid read_occupancy_grid(const std::string& path) {
  auto bytes = read_file(path);
  Reader r{bytes};
  r.magic("VXO1");
  std::uint64_t dim_at = r.pos;
  std::uint32_t h = r.dim("h");
  std::uint32_t w = r.dim("w");
  std::uint32_t z = r.dim("z");
  std::uint64_t n = static_cast<std::uint64_t>(h) * w * z;
  check_elements(n, dim_at);
  OccupancyGrid grid(Dims{static_cast<int>(h), static_cast<int>(w), static_cast<int>(z)});
  r.need(n, "payload");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint8_t v = bytes[r.pos];
    if (v > 1) throw FormatError("occupancy byte must be 0 or 1", r.pos);
    grid.data[i] = v;
    ++r.pos;
  }
  r.finish();
  return grid;
}

SemanticGrid read_semantic_grid(const std::string& path) {
  auto bytes = read_file(path);
  Reader r{bytes};
  r.magic("VXL1");
  std::uint64_t dim_at = r.pos;
  std::uint32_t h = r.dim("h");
  std::uint32_t w = r.dim("w");
  std::uint32_t z = r.dim("z");
  std::uint32_t num_classes = r.dim("num_classes");
  if (num_classes > 255) throw FormatError("num_classes must fit in a byte", r.pos - 4);
  std::uint64_t n = static_cast<std::uint64_t>(h) * w * z;
  check_elements(n, dim_at);
  SemanticGrid grid(Dims{static_cast<int>(h), static_cast<int>(w), static_cast<int>(z)},
                    static_cast<int>(num_classes));
  r.need(n, "payload");
  for (std::uint64_t i = 0; i < n; ++i) {
    std::uint8_t v = bytes[r.pos];
    if (v != SemanticGrid::kIgnore && v >= num_classes) {
      throw FormatError("label out of range", r.pos);
    }
    grid.labels[i] = v;
    ++r.pos;
  }
  r.finish();
  return grid;
}

std::string peek_magic(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open for reading: " + path);
  char m[4];
  f.read(m, 4);
  if (f.gcount() != 4) throw FormatError("file shorter than magic", 0);
  return std::string(m, 4);
}

}  // namespace ssc
