#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evote/hashing.hpp"
#include "evote/ledger.hpp"
#include "json.hpp"

namespace evote {

inline constexpr std::size_t kMaxCandidateIdLength = 64;

struct Candidate {
  std::string candidate_id;
  std::string display_name;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// Throws ValidationError naming the offending id on an empty, oversized,
/// non-printable-ASCII or repeated candidate_id, and on an empty list.
void validate_candidates(std::span<const Candidate> candidates);

/// Parses a JSON array of {candidate_id, display_name} and validates it.
std::vector<Candidate> candidates_from_json(const nlohmann::json& j);
nlohmann::json candidates_to_json(std::span<const Candidate> candidates);

bool has_candidate(std::span<const Candidate> candidates, std::string_view candidate_id);

/// Election parameters frozen into the vote chain's sentinel genesis block.
struct ElectionManifest {
  std::string election_id;
  std::vector<Candidate> candidates;
  int n_validators = 4;
  int pattern_image_count = 4;

  nlohmann::json to_json() const;
};

/// Registration-shaped payload committing to the manifest: blake2b512 and
/// sha256 of the manifest's canonical JSON plus the all-zero rotation pattern.
RegistrationPayload manifest_payload(const ElectionManifest& manifest);

Chain make_vote_chain(const ElectionManifest& manifest);

/// sha256(b_identity.hex + candidate_id)
Digest256 bind_vote(const Digest256& b_identity, std::string_view candidate_id);

/// As above, but rejects a candidate_id absent from `candidates` with ValidationError.
Digest256 bind_vote(const Digest256& b_identity, std::string_view candidate_id,
                    std::span<const Candidate> candidates);

struct Receipt {
  Digest256 b_vote;
  std::uint64_t block_index = 0;
  std::string election_id;

  nlohmann::json to_json() const;
  static Receipt from_json(const nlohmann::json& j);

  friend bool operator==(const Receipt&, const Receipt&) = default;
};

struct Tally {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;

  nlohmann::json to_json() const;
  friend bool operator==(const Tally&, const Tally&) = default;
};

/// Counts vote blocks (index >= 1) of a valid vote chain. Every configured
/// candidate appears, with zero if unvoted. Throws IntegrityError if the chain
/// is invalid or holds a block that is not a vote for a configured candidate.
Tally tally(const Chain& vote_chain, std::span<const Candidate> candidates);

bool verify_receipt(const Digest256& b_identity, std::string_view candidate_id,
                    const Receipt& receipt, const Chain& vote_chain);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_utc(std::chrono::system_clock::time_point t);
bool is_utc_timestamp(std::string_view s);

}  // namespace evote
