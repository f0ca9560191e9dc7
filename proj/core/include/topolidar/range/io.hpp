#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "topolidar/range/point_cloud.hpp"
#include "topolidar/range/projection.hpp"

namespace topolidar::range {

/// KITTI velodyne scans: packed little-endian float32 records (x, y, z, intensity).
PointCloud read_kitti_bin(const std::filesystem::path& path);
PointCloud parse_kitti_bin(std::string_view bytes);
void write_kitti_bin(const std::filesystem::path& path, const PointCloud& pc);

/// "TLRI" | u32 H | u32 W | u32 C | f64 payload (row-major H x W x C).
/// Projection metadata is not part of the file; callers supply it on read.
void write_range_image(const std::filesystem::path& path, const RangeImage& img);
RangeImage read_range_image(const std::filesystem::path& path, const ProjectionConfig& cfg = {});
std::string encode_range_image(const RangeImage& img);
RangeImage decode_range_image(std::string_view bytes, const ProjectionConfig& cfg = {});

/// ASCII PLY with x, y, z (and intensity when present).
void write_ply(const std::filesystem::path& path, const PointCloud& pc);
PointCloud read_ply(const std::filesystem::path& path);

}  // namespace topolidar::range
