#include "evote/election.hpp"

#include <ctime>
#include <set>

#include "evote/pattern.hpp"

namespace evote {

void validate_candidates(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ValidationError("at least one candidate is required");
  std::set<std::string> seen;
  for (const auto& c : candidates) {
    if (c.candidate_id.empty()) throw ValidationError("candidate_id must not be empty");
    if (c.candidate_id.size() > kMaxCandidateIdLength) {
      throw ValidationError("candidate_id '" + c.candidate_id + "' is longer than 64 characters");
    }
    for (unsigned char ch : c.candidate_id) {
      if (ch < 0x21 || ch > 0x7e) {
        throw ValidationError("candidate_id '" + c.candidate_id + "' must be printable ASCII");
      }
    }
    if (!seen.insert(c.candidate_id).second) {
      throw ValidationError("duplicate candidate_id '" + c.candidate_id + "'");
    }
  }
}

std::vector<Candidate> candidates_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("candidates must be a JSON array");
  std::vector<Candidate> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("candidate_id") || !e["candidate_id"].is_string()) {
      throw ValidationError("each candidate needs a string candidate_id");
    }
    Candidate c;
    c.candidate_id = e["candidate_id"].get<std::string>();
    if (e.contains("display_name")) {
      if (!e["display_name"].is_string()) throw ValidationError("display_name must be a string");
      c.display_name = e["display_name"].get<std::string>();
    } else {
      c.display_name = c.candidate_id;
    }
    out.push_back(std::move(c));
  }
  validate_candidates(out);
  return out;
}

nlohmann::json candidates_to_json(std::span<const Candidate> candidates) {
  auto arr = nlohmann::json::array();
  for (const auto& c : candidates) {
    arr.push_back({{"candidate_id", c.candidate_id}, {"display_name", c.display_name}});
  }
  return arr;
}

bool has_candidate(std::span<const Candidate> candidates, std::string_view candidate_id) {
  for (const auto& c : candidates) {
    if (c.candidate_id == candidate_id) return true;
  }
  return false;
}

nlohmann::json ElectionManifest::to_json() const {
  return {{"candidates", candidates_to_json(candidates)},
          {"election_id", election_id},
          {"n_validators", n_validators},
          {"pattern_image_count", pattern_image_count}};
}

RegistrationPayload manifest_payload(const ElectionManifest& manifest) {
  const auto text = manifest.to_json().dump();
  return RegistrationPayload{
      blake2b512(text), sha256(text),
      serialize_pattern(RotationPattern(std::vector<int>(manifest.pattern_image_count, 0)))};
}

Chain make_vote_chain(const ElectionManifest& manifest) {
  Chain chain;
  chain.blocks.push_back(make_genesis(manifest_payload(manifest)));
  return chain;
}

Digest256 bind_vote(const Digest256& b_identity, std::string_view candidate_id) {
  std::string preimage = b_identity.hex();
  preimage += candidate_id;
  return sha256(preimage);
}

Digest256 bind_vote(const Digest256& b_identity, std::string_view candidate_id,
                    std::span<const Candidate> candidates) {
  if (!has_candidate(candidates, candidate_id)) {
    throw ValidationError("unknown candidate '" + std::string(candidate_id) + "'");
  }
  return bind_vote(b_identity, candidate_id);
}

nlohmann::json Receipt::to_json() const {
  return {{"b_vote", b_vote.hex()}, {"block_index", block_index}, {"election_id", election_id}};
}

Receipt Receipt::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("b_vote") || !j.contains("block_index") ||
      !j.contains("election_id") || !j["b_vote"].is_string() ||
      !j["block_index"].is_number_unsigned() || !j["election_id"].is_string()) {
    throw ValidationError("receipt needs b_vote, block_index and election_id");
  }
  return Receipt{Digest256::from_hex(j["b_vote"].get<std::string>()),
                 j["block_index"].get<std::uint64_t>(), j["election_id"].get<std::string>()};
}

nlohmann::json Tally::to_json() const {
  nlohmann::json c = nlohmann::json::object();
  for (const auto& [id, n] : counts) c[id] = n;
  return {{"counts", c}, {"total", total}};
}

Tally tally(const Chain& vote_chain, std::span<const Candidate> candidates) {
  auto report = verify_chain(vote_chain);
  if (!report.ok) throw IntegrityError("cannot tally an invalid vote chain: " + report.detail);
  Tally t;
  for (const auto& c : candidates) t.counts[c.candidate_id] = 0;
  for (std::size_t i = 1; i < vote_chain.size(); ++i) {
    const auto* vote = std::get_if<VotePayload>(&vote_chain.blocks[i].payload);
    if (!vote) throw IntegrityError("vote chain block " + std::to_string(i) + " is not a vote");
    auto it = t.counts.find(vote->candidate_id);
    if (it == t.counts.end()) {
      throw IntegrityError("vote chain block " + std::to_string(i) + " names unknown candidate '" +
                           vote->candidate_id + "'");
    }
    ++it->second;
    ++t.total;
  }
  return t;
}

bool verify_receipt(const Digest256& b_identity, std::string_view candidate_id,
                    const Receipt& receipt, const Chain& vote_chain) {
  if (bind_vote(b_identity, candidate_id) != receipt.b_vote) return false;
  if (receipt.block_index == 0 || receipt.block_index >= vote_chain.size()) return false;
  const auto* vote = std::get_if<VotePayload>(&vote_chain.blocks[receipt.block_index].payload);
  if (!vote || vote->b_vote != receipt.b_vote || vote->candidate_id != candidate_id ||
      vote->election_id != receipt.election_id) {
    return false;
  }
  return verify_chain(vote_chain).ok;
}

std::string format_utc(std::chrono::system_clock::time_point t) {
  const std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool is_utc_timestamp(std::string_view s) {
  static constexpr std::string_view kShape = "dddd-dd-ddTdd:dd:ddZ";
  if (s.size() != kShape.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (kShape[i] == 'd') {
      if (s[i] < '0' || s[i] > '9') return false;
    } else if (s[i] != kShape[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace evote
