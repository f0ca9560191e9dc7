#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::num {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered name -> tensor collection, the unit of checkpointing.
class TensorBundle {
 public:
  void put(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;  // FormatError when absent
  std::optional<Tensor> find(std::string_view name) const;
  const std::vector<NamedTensor>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }

 private:
  std::vector<NamedTensor> items_;
};

// Binary layout, all integers little-endian:
//   "TLDM" | u32 version | u32 count |
//   count x { u32 name_len | name (UTF-8) | u32 rank | u64 dims[rank] | f64 payload }
void write_checkpoint(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle read_checkpoint(const std::filesystem::path& path);

std::string encode_checkpoint(const TensorBundle& bundle);
TensorBundle decode_checkpoint(std::string_view bytes);

}  // namespace topolidar::num
