#include "topolidar/ldm/condition.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

#include "topolidar/common/rng.hpp"

namespace topolidar::ldm {

std::vector<std::string> ConditionEmbedder::tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

num::Tensor ConditionEmbedder::embed(std::string_view text) const {
  std::vector<double> acc(dim_, 0.0);
  const auto tokens = tokenize(text);
  for (const auto& tok : tokens) {
    std::uint64_t state = fnv1a(tok);
    auto uniform = [&state] {
      state = splitmix64(state);
      return (static_cast<double>(state >> 11) + 0.5) * 0x1.0p-53;
    };
    for (std::size_t i = 0; i < dim_; i += 2) {
      // Box-Muller: two unit normals per pair of uniforms.
      const double r = std::sqrt(-2.0 * std::log(uniform()));
      const double a = 2.0 * std::numbers::pi * uniform();
      acc[i] += r * std::cos(a);
      if (i + 1 < dim_) acc[i + 1] += r * std::sin(a);
    }
  }
  if (!tokens.empty())
    for (auto& v : acc) v /= static_cast<double>(tokens.size());
  return num::Tensor::from({dim_}, std::move(acc));
}

}  // namespace topolidar::ldm
