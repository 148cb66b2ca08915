#pragma once

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evote/identity.hpp"
#include "evote/ledger.hpp"
#include "evote/pattern.hpp"
#include "evote/store.hpp"


namespace testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "evote-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct Factors {
  evote::GovernmentId id;
  evote::MinutiaeTemplate fingerprint;
  evote::RotationPattern pattern;
};

inline evote::RotationPattern pattern_from_code(unsigned code, int images = 4) {
  std::vector<int> angles;
  for (int i = 0; i < images; ++i) {
    angles.push_back(static_cast<int>(code % 4) * 90);
    code /= 4;
  }
  return evote::RotationPattern(angles);
}

/// Deterministic, distinct factor triples for voter `i`.
inline Factors voter(unsigned i, int images = 4) {
  evote::GovernmentId id{evote::IdKind::kAadhaar, evote::to_bytes("aadhaar-scan-" + std::to_string(i))};
  std::vector<evote::MinutiaPoint> pts;
  for (int k = 0; k < 12; ++k) {
    pts.push_back({static_cast<int>((i * 37 + k * 101) % 65536), static_cast<int>((i * 11 + k * 7) % 65536),
                   static_cast<int>((i + k * 30) % 360),
                   k % 2 ? evote::MinutiaKind::kBifurcation : evote::MinutiaKind::kRidgeEnding});
  }
  return {std::move(id), evote::MinutiaeTemplate(std::move(pts)), pattern_from_code(i * 7 + 3, images)};
}

/// Random factor triples drawn from `rng`.
inline Factors random_voter(std::mt19937_64& rng, int images = 4) {
  std::uniform_int_distribution<int> byte(0, 255), coord(0, 65535), angle(0, 359), npts(1, 40);
  evote::Bytes doc(64);
  for (auto& b : doc) b = static_cast<std::uint8_t>(byte(rng));
  std::vector<evote::MinutiaPoint> pts;
  const int n = npts(rng);
  for (int k = 0; k < n; ++k) {
    pts.push_back({coord(rng), coord(rng), angle(rng),
                   byte(rng) % 2 ? evote::MinutiaKind::kBifurcation : evote::MinutiaKind::kRidgeEnding});
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return {evote::GovernmentId{evote::IdKind::kAadhaar, std::move(doc)}, evote::MinutiaeTemplate(std::move(pts)),
          pattern_from_code(static_cast<unsigned>(rng()), images)};
}

inline std::vector<evote::Candidate> two_candidates() { return {{"alice", "Alice"}, {"bob", "Bob"}}; }

inline evote::SystemState fresh_state(const std::string& election_id = "general-2026", int n_validators = 4,
                                      std::vector<evote::Candidate> candidates = two_candidates()) {
  evote::ElectionConfig config;
  config.election_id = election_id;
  config.n_validators = n_validators;
  config.admin_token = "admin-secret";
  return evote::SystemState::fresh(config, std::move(candidates));
}

/// A registration chain of `n` blocks built from voter(0..n-1).
inline evote::Chain registration_chain(std::size_t n, unsigned first_voter = 0) {
  evote::Chain chain;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = voter(first_voter + static_cast<unsigned>(i));
    const auto id = evote::make_identity(f.id, f.fingerprint, f.pattern);
    chain.blocks.push_back(evote::next_block(
        chain, evote::RegistrationPayload{id.h_identity, id.h_fingerprint, evote::serialize_pattern(f.pattern)}));
  }
  return chain;
}

/// Replaces the character at `pos` with a different one from `alphabet`.
inline std::string change_char(std::string s, std::size_t pos, std::string_view alphabet, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  char c;
  do {
    c = alphabet[pick(rng)];
  } while (c == s[pos]);
  s[pos] = c;
  return s;
}

struct Mutation {
  std::size_t block = 0;
  std::string field;
};

/// Changes exactly one character of one stored field of one registration block,
/// keeping the block well-formed so only hash and link checks can catch it.
inline Mutation mutate_one_char(evote::Chain& chain, std::mt19937_64& rng) {
  constexpr std::string_view kHex = "0123456789abcdef";
  constexpr std::string_view kPrintable = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_";
  std::uniform_int_distribution<std::size_t> pick_block(0, chain.size() - 1);
  std::uniform_int_distribution<int> pick_field(0, 4);
  Mutation m{pick_block(rng), ""};
  auto& b = chain.blocks[m.block];
  auto& p = std::get<evote::RegistrationPayload>(b.payload);
  auto pos_in = [&](const std::string& s) { return std::uniform_int_distribution<std::size_t>(0, s.size() - 1)(rng); };
  switch (pick_field(rng)) {
    case 0:
      m.field = "aadhaar_hash";
      p.aadhaar_hash = evote::Digest512::from_hex(change_char(p.aadhaar_hash.hex(), pos_in(p.aadhaar_hash.hex()), kHex, rng));
      break;
    case 1:
      m.field = "fingerprint_hash";
      p.fingerprint_hash =
          evote::Digest256::from_hex(change_char(p.fingerprint_hash.hex(), pos_in(p.fingerprint_hash.hex()), kHex, rng));
      break;
    case 2:
      m.field = "photo_rotation_pattern";
      p.photo_rotation_pattern =
          change_char(p.photo_rotation_pattern, pos_in(p.photo_rotation_pattern), kPrintable, rng);
      break;
    case 3:
      m.field = "previous_hash";
      b.previous_hash = change_char(b.previous_hash, pos_in(b.previous_hash), kHex, rng);
      break;
    default:
      m.field = "block_hash";
      b.block_hash = evote::Digest256::from_hex(change_char(b.block_hash.hex(), pos_in(b.block_hash.hex()), kHex, rng));
      break;
  }
  return m;
}

}  // namespace testing
