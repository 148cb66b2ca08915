#include "evote/pattern.hpp"

namespace evote {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_angle(std::string_view token) {
  for (int a : {0, 90, 180, 270}) {
    if (token == std::to_string(a)) return a;
  }
  throw ParseError("pattern: angle '" + std::string(token) + "' is not one of 0, 90, 180, 270",
                   std::string(token));
}

}  // namespace

bool is_allowed_angle(int angle) noexcept {
  return angle == 0 || angle == 90 || angle == 180 || angle == 270;
}

RotationPattern::RotationPattern(std::vector<int> angles) : angles_(std::move(angles)) {
  if (angles_.empty()) throw ValidationError("pattern: at least one image is required");
  for (int a : angles_) {
    if (!is_allowed_angle(a)) {
      throw ValidationError("pattern: angle " + std::to_string(a) +
                            " is not one of 0, 90, 180, 270");
    }
  }
}

std::string RotationPattern::image_name(std::size_t index_one_based) {
  return std::string(kPatternImagePrefix) + std::to_string(index_one_based);
}

std::string serialize_pattern(const RotationPattern& p) {
  std::string out;
  for (std::size_t i = 0; i < p.image_count(); ++i) {
    if (i) out += '_';
    out += RotationPattern::image_name(i + 1);
    out += '_';
    out += std::to_string(p.angles()[i]);
  }
  return out;
}

RotationPattern parse_pattern(std::string_view s, int image_count) {
  if (image_count < 1) throw ValidationError("pattern: image count must be at least 1");
  auto tokens = split(s, '_');
  std::vector<int> angles;
  const auto n = static_cast<std::size_t>(image_count);
  for (std::size_t i = 0; i < n; ++i) {
    const auto name_at = 2 * i;
    if (name_at >= tokens.size()) {
      throw ParseError("pattern: missing entry for " + RotationPattern::image_name(i + 1), "");
    }
    auto name = tokens[name_at];
    if (name != RotationPattern::image_name(i + 1)) {
      throw ParseError("pattern: expected '" + RotationPattern::image_name(i + 1) + "', got '" +
                           std::string(name) + "'",
                       std::string(name));
    }
    if (name_at + 1 >= tokens.size()) {
      throw ParseError("pattern: missing angle after '" + std::string(name) + "'", "");
    }
    angles.push_back(parse_angle(tokens[name_at + 1]));
  }
  if (tokens.size() != 2 * n) {
    auto extra = tokens[2 * n];
    throw ParseError("pattern: unexpected trailing token '" + std::string(extra) + "'",
                     std::string(extra));
  }
  return RotationPattern(std::move(angles));
}

Digest256 hash_pattern(const RotationPattern& p) { return sha256(serialize_pattern(p)); }

}  // namespace evote
