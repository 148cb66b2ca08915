#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evote/hashing.hpp"
#include "evote/pattern.hpp"
#include "json.hpp"

namespace evote {

enum class IdKind { kAadhaar, kDrivingLicense };

std::string to_string(IdKind kind);
/// Accepts "AADHAAR" and "DRIVING_LICENSE".
IdKind parse_id_kind(std::string_view s);

/// An uploaded government document. Only the bytes are hashed; `kind` is registry metadata.
struct GovernmentId {
  IdKind kind = IdKind::kAadhaar;
  Bytes document;
};

enum class MinutiaKind { kRidgeEnding, kBifurcation };

struct MinutiaPoint {
  int x = 0;      // 0..65535
  int y = 0;      // 0..65535
  int theta = 0;  // degrees, 0..359
  MinutiaKind kind = MinutiaKind::kRidgeEnding;

  friend auto operator<=>(const MinutiaPoint&, const MinutiaPoint&) = default;
};

inline constexpr std::size_t kMaxMinutiae = 512;

/// A validated, canonically ordered set of minutiae (1..512 distinct points).
class MinutiaeTemplate {
 public:
  /// Sorts by (x, y, theta, kind). Throws ValidationError on range violations,
  /// an empty or oversized set, or duplicate points.
  explicit MinutiaeTemplate(std::vector<MinutiaPoint> points);

  const std::vector<MinutiaPoint>& points() const noexcept { return points_; }

  friend bool operator==(const MinutiaeTemplate&, const MinutiaeTemplate&) = default;

 private:
  std::vector<MinutiaPoint> points_;
};

/// {"points":[{"x":..,"y":..,"theta":..,"kind":"E"|"B"},...]}
nlohmann::json minutiae_to_json(const MinutiaeTemplate& t);
MinutiaeTemplate minutiae_from_json(const nlohmann::json& j);

/// Turns raw fingerprint capture bytes into a template.
class MinutiaeExtractor {
 public:
  virtual ~MinutiaeExtractor() = default;
  virtual MinutiaeTemplate extract(ByteView capture) const = 0;
};

/// Deterministic stand-in for a real extractor: every non-overlapping 4-byte
/// window b0..b3 becomes one point with x = b0<<8|b1, y = b1<<8|b2,
/// theta = (b2<<8|b3) mod 360, kind = bifurcation iff b3 is odd.
/// Duplicates are dropped and at most 512 windows are read.
class ToyMinutiaeExtractor final : public MinutiaeExtractor {
 public:
  MinutiaeTemplate extract(ByteView capture) const override;
};

struct DigitalIdentity {
  Digest512 h_identity;
  Digest256 h_fingerprint;
  Digest256 h_pattern;
  Digest256 b_identity;

  friend bool operator==(const DigitalIdentity&, const DigitalIdentity&) = default;
};

Digest512 hash_identity_document(const GovernmentId& id);

/// "n=<count>;x:y:theta:E|B;..." over the canonical order.
std::string encode_minutiae(const MinutiaeTemplate& t);

Digest256 hash_fingerprint(const MinutiaeTemplate& t);

/// sha256 over h_identity.hex + h_fingerprint.hex + h_pattern.hex (256 ASCII chars).
Digest256 compose_identity(const Digest512& h_identity, const Digest256& h_fingerprint,
                           const Digest256& h_pattern);

DigitalIdentity make_identity(const GovernmentId& id, const MinutiaeTemplate& t,
                              const RotationPattern& p);

/// All three factors must match; there is no partial acceptance.
bool verify_login(const DigitalIdentity& stored, const GovernmentId& id,
                  const MinutiaeTemplate& t, const RotationPattern& p);

}  // namespace evote
