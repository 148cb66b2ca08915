#include "evote/identity.hpp"

#include <algorithm>
#include <set>

namespace evote {

std::string to_string(IdKind kind) {
  return kind == IdKind::kAadhaar ? "AADHAAR" : "DRIVING_LICENSE";
}

IdKind parse_id_kind(std::string_view s) {
  if (s == "AADHAAR") return IdKind::kAadhaar;
  if (s == "DRIVING_LICENSE") return IdKind::kDrivingLicense;
  throw ValidationError("unknown id kind '" + std::string(s) + "'");
}

MinutiaeTemplate::MinutiaeTemplate(std::vector<MinutiaPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw ValidationError("minutiae template is empty");
  if (points_.size() > kMaxMinutiae) {
    throw ValidationError("minutiae template has more than 512 points");
  }
  for (const auto& p : points_) {
    if (p.x < 0 || p.x > 65535 || p.y < 0 || p.y > 65535) {
      throw ValidationError("minutia coordinate out of range 0..65535");
    }
    if (p.theta < 0 || p.theta > 359) throw ValidationError("minutia theta out of range 0..359");
  }
  std::sort(points_.begin(), points_.end());
  if (std::adjacent_find(points_.begin(), points_.end()) != points_.end()) {
    throw ValidationError("minutiae template contains duplicate points");
  }
}

nlohmann::json minutiae_to_json(const MinutiaeTemplate& t) {
  auto points = nlohmann::json::array();
  for (const auto& p : t.points()) {
    points.push_back({{"x", p.x},
                      {"y", p.y},
                      {"theta", p.theta},
                      {"kind", p.kind == MinutiaKind::kRidgeEnding ? "E" : "B"}});
  }
  return {{"points", points}};
}

MinutiaeTemplate minutiae_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array()) {
    throw ValidationError("minutiae template JSON needs a \"points\" array");
  }
  std::vector<MinutiaPoint> points;
  for (const auto& e : j["points"]) {
    if (!e.is_object()) throw ValidationError("minutia must be an object");
    for (const char* key : {"x", "y", "theta"}) {
      if (!e.contains(key) || !e[key].is_number_integer()) {
        throw ValidationError(std::string("minutia field '") + key + "' must be an integer");
      }
    }
    if (!e.contains("kind") || !e["kind"].is_string()) {
      throw ValidationError("minutia field 'kind' must be \"E\" or \"B\"");
    }
    const auto kind = e["kind"].get<std::string>();
    if (kind != "E" && kind != "B") {
      throw ValidationError("minutia field 'kind' must be \"E\" or \"B\"");
    }
    const auto x = e["x"].get<long long>();
    const auto y = e["y"].get<long long>();
    const auto theta = e["theta"].get<long long>();
    if (x < 0 || x > 65535 || y < 0 || y > 65535 || theta < 0 || theta > 359) {
      throw ValidationError("minutia field out of range");
    }
    points.push_back({static_cast<int>(x), static_cast<int>(y), static_cast<int>(theta),
                      kind == "E" ? MinutiaKind::kRidgeEnding : MinutiaKind::kBifurcation});
  }
  return MinutiaeTemplate(std::move(points));
}

MinutiaeTemplate ToyMinutiaeExtractor::extract(ByteView capture) const {
  std::set<MinutiaPoint> unique;
  const std::size_t windows = std::min(capture.size() / 4, kMaxMinutiae);
  for (std::size_t w = 0; w < windows; ++w) {
    const auto* b = capture.data() + 4 * w;
    MinutiaPoint p;
    p.x = (b[0] << 8) | b[1];
    p.y = (b[1] << 8) | b[2];
    p.theta = ((b[2] << 8) | b[3]) % 360;
    p.kind = (b[3] & 1) ? MinutiaKind::kBifurcation : MinutiaKind::kRidgeEnding;
    unique.insert(p);
  }
  if (unique.empty()) throw ValidationError("fingerprint capture too short to extract minutiae");
  return MinutiaeTemplate({unique.begin(), unique.end()});
}

Digest512 hash_identity_document(const GovernmentId& id) {
  if (id.document.empty()) throw ValidationError("identity document is empty");
  return blake2b512(ByteView(id.document));
}

std::string encode_minutiae(const MinutiaeTemplate& t) {
  std::string out = "n=" + std::to_string(t.points().size()) + ";";
  bool first = true;
  for (const auto& p : t.points()) {
    if (!first) out += ';';
    first = false;
    out += std::to_string(p.x) + ':' + std::to_string(p.y) + ':' + std::to_string(p.theta) + ':' +
           (p.kind == MinutiaKind::kRidgeEnding ? 'E' : 'B');
  }
  return out;
}

Digest256 hash_fingerprint(const MinutiaeTemplate& t) { return sha256(encode_minutiae(t)); }

Digest256 compose_identity(const Digest512& h_identity, const Digest256& h_fingerprint,
                           const Digest256& h_pattern) {
  return sha256(h_identity.hex() + h_fingerprint.hex() + h_pattern.hex());
}

DigitalIdentity make_identity(const GovernmentId& id, const MinutiaeTemplate& t,
                              const RotationPattern& p) {
  DigitalIdentity d;
  d.h_identity = hash_identity_document(id);
  d.h_fingerprint = hash_fingerprint(t);
  d.h_pattern = hash_pattern(p);
  d.b_identity = compose_identity(d.h_identity, d.h_fingerprint, d.h_pattern);
  return d;
}

bool verify_login(const DigitalIdentity& stored, const GovernmentId& id, const MinutiaeTemplate& t,
                  const RotationPattern& p) {
  const bool document_ok = hash_identity_document(id) == stored.h_identity;
  const bool fingerprint_ok = hash_fingerprint(t) == stored.h_fingerprint;
  const bool pattern_ok = hash_pattern(p) == stored.h_pattern;
  return document_ok && fingerprint_ok && pattern_ok;
}

}  // namespace evote
