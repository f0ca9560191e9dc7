#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "topolidar/num/tensor.hpp"

namespace topolidar::ldm {

/// Fixed text embedder: lower-cased whitespace tokens are hashed to seeds of
/// unit-variance random vectors, which are averaged. Empty text (or text of
/// only whitespace) maps to the zero vector.
class ConditionEmbedder {
 public:
  explicit ConditionEmbedder(std::size_t dim = 32) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  num::Tensor embed(std::string_view text) const;  // shape [dim]
  static std::vector<std::string> tokenize(std::string_view text);

 private:
  std::size_t dim_;
};

}  // namespace topolidar::ldm
