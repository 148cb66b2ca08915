#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "evote/hashing.hpp"

namespace evote {

inline constexpr int kDefaultPatternImageCount = 4;
inline constexpr std::string_view kPatternImagePrefix = "PhotoWall";

/// True for 0, 90, 180 and 270.
bool is_allowed_angle(int angle) noexcept;

/// The picture-rotation secret: the final angle of each image PhotoWall1..N, in order.
///
/// The secret space is 4^N; the default N = 4 gives only 256 patterns, so the
/// pattern is never sufficient on its own and is always paired with the
/// document and fingerprint factors.
class RotationPattern {
 public:
  /// Throws ValidationError if `angles` is empty or holds a disallowed angle.
  explicit RotationPattern(std::vector<int> angles);

  std::size_t image_count() const noexcept { return angles_.size(); }
  const std::vector<int>& angles() const noexcept { return angles_; }
  static std::string image_name(std::size_t index_one_based);

  friend bool operator==(const RotationPattern&, const RotationPattern&) = default;

 private:
  std::vector<int> angles_;
};

/// "PhotoWall1_<a1>_PhotoWall2_<a2>_..." with no prefix or suffix.
std::string serialize_pattern(const RotationPattern& p);

/// Strict inverse of serialize_pattern for exactly `image_count` images.
/// Throws ParseError naming the first offending token.
RotationPattern parse_pattern(std::string_view s, int image_count);

/// sha256 of the serialized pattern's ASCII bytes.
Digest256 hash_pattern(const RotationPattern& p);

}  // namespace evote
