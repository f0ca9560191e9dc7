#include "topolidar/range/io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "topolidar/common/error.hpp"

namespace topolidar::range {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void dump(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

template <class U>
U load_le(std::string_view b, std::size_t off) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

template <class U>
void store_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

PointCloud parse_kitti_bin(std::string_view bytes) {
  constexpr std::size_t kRecord = 16;
  if (bytes.size() % kRecord != 0)
    throw FormatError("kitti .bin: truncated record at byte offset " +
                      std::to_string(bytes.size() - bytes.size() % kRecord) + " (file length " +
                      std::to_string(bytes.size()) + " is not a multiple of 16)");
  PointCloud pc;
  const std::size_t n = bytes.size() / kRecord;
  pc.points.reserve(n);
  pc.intensity.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float f[4];
    for (int j = 0; j < 4; ++j) f[j] = std::bit_cast<float>(load_le<std::uint32_t>(bytes, i * kRecord + 4 * j));
    pc.points.push_back({f[0], f[1], f[2]});
    pc.intensity.push_back(f[3]);
  }
  return pc;
}

PointCloud read_kitti_bin(const std::filesystem::path& path) { return parse_kitti_bin(slurp(path)); }

void write_kitti_bin(const std::filesystem::path& path, const PointCloud& pc) {
  std::string out;
  out.reserve(pc.size() * 16);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const float rec[4] = {static_cast<float>(pc.points[i][0]), static_cast<float>(pc.points[i][1]),
                          static_cast<float>(pc.points[i][2]),
                          pc.intensity.empty() ? 0.0f : static_cast<float>(pc.intensity[i])};
    for (float f : rec) store_le(out, std::bit_cast<std::uint32_t>(f));
  }
  dump(path, out);
}

std::string encode_range_image(const RangeImage& img) {
  std::string out = "TLRI";
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.height));
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.width));
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.channels));
  for (double v : img.values.data()) store_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

RangeImage decode_range_image(std::string_view bytes, const ProjectionConfig& cfg) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != "TLRI") throw FormatError("not a TLRI range image (bad magic)");
  const auto h = load_le<std::uint32_t>(bytes, 4);
  const auto w = load_le<std::uint32_t>(bytes, 8);
  const auto c = load_le<std::uint32_t>(bytes, 12);
  const std::size_t n = static_cast<std::size_t>(h) * w * c;
  if (n == 0) throw FormatError("TLRI image with a zero dimension");
  if (bytes.size() != 16 + 8 * n)
    throw FormatError("TLRI payload size mismatch: expected " + std::to_string(16 + 8 * n) + " bytes, got " +
                      std::to_string(bytes.size()));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(load_le<std::uint64_t>(bytes, 16 + 8 * i));
  return RangeImage{h, w, c, num::Tensor::from({h, w, c}, std::move(v)), cfg};
}

void write_range_image(const std::filesystem::path& path, const RangeImage& img) {
  dump(path, encode_range_image(img));
}

RangeImage read_range_image(const std::filesystem::path& path, const ProjectionConfig& cfg) {
  return decode_range_image(slurp(path), cfg);
}

void write_ply(const std::filesystem::path& path, const PointCloud& pc) {
  std::ostringstream os;
  const bool with_i = !pc.intensity.empty();
  os << "ply\nformat ascii 1.0\nelement vertex " << pc.size() << "\nproperty double x\nproperty double y\n"
     << "property double z\n";
  if (with_i) os << "property double intensity\n";
  os << "end_header\n" << std::setprecision(17);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    os << pc.points[i][0] << ' ' << pc.points[i][1] << ' ' << pc.points[i][2];
    if (with_i) os << ' ' << pc.intensity[i];
    os << '\n';
  }
  dump(path, os.str());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::istringstream is(slurp(path));
  std::string line;
  std::size_t count = 0;
  std::size_t props = 0;
  if (!std::getline(is, line) || line != "ply") throw FormatError(path.string() + ": not a PLY file");
  while (std::getline(is, line)) {
    if (line.rfind("format", 0) == 0 && line.find("ascii") == std::string::npos)
      throw FormatError(path.string() + ": only ASCII PLY is supported");
    if (line.rfind("element vertex", 0) == 0) count = std::stoul(line.substr(15));
    if (line.rfind("property", 0) == 0) ++props;
    if (line == "end_header") break;
  }
  if (props < 3) throw FormatError(path.string() + ": PLY vertices need x, y, z");
  PointCloud pc;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> vals(props);
    for (auto& v : vals)
      if (!(is >> v)) throw FormatError(path.string() + ": truncated vertex list at vertex " + std::to_string(i));
    pc.points.push_back({vals[0], vals[1], vals[2]});
    if (props >= 4) pc.intensity.push_back(vals[3]);
  }
  return pc;
}

}  // namespace topolidar::range
