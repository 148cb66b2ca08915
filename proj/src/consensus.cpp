#include "evote/consensus.hpp"

#include <algorithm>
#include <future>

#include "evote/election.hpp"
#include "evote/identity.hpp"
#include "evote/pattern.hpp"

namespace evote {
namespace {

ValidatorVerdict accept(int id) { return {id, Decision::kAccept, {}}; }
ValidatorVerdict reject(int id, std::string reason) {
  return {id, Decision::kReject, std::move(reason)};
}

// Empty string means the payload satisfies the replica's rules.
std::string check_registration(const ReplicaState& replica, const Proposal& p,
                               const RegistrationPayload& reg) {
  RotationPattern pattern({0});
  try {
    pattern = parse_pattern(reg.photo_rotation_pattern, replica.pattern_image_count);
  } catch (const ValidationError&) {
    return "malformed rotation pattern";
  }
  if (compose_identity(reg.aadhaar_hash, reg.fingerprint_hash, hash_pattern(pattern)) != p.subject) {
    return "identity does not recompose";
  }
  if (replica.registered.contains(p.subject.hex())) return "already registered";
  return {};
}

std::string check_vote(const ReplicaState& replica, const Proposal& p, const VotePayload& vote) {
  if (vote.election_id != replica.election_id) return "wrong election";
  if (!replica.candidates.contains(vote.candidate_id)) return "unknown candidate";
  if (!is_utc_timestamp(vote.cast_at)) return "malformed timestamp";
  if (!replica.registered.contains(p.subject.hex())) return "unregistered identity";
  if (replica.voted.contains(p.subject.hex())) return "duplicate vote";
  if (bind_vote(p.subject, vote.candidate_id) != vote.b_vote) return "vote binding mismatch";
  return {};
}

std::string check_link(const Chain& snapshot, const Block& block, bool corrupt) {
  std::string expected_prev =
      snapshot.empty() ? std::string(kGenesisPreviousHash) : snapshot.head().block_hash.hex();
  if (corrupt) expected_prev[0] = expected_prev[0] == 'f' ? 'e' : 'f';
  if (block.index != snapshot.size() || block.previous_hash != expected_prev) {
    return "link mismatch";
  }
  if (compute_block_hash(block.payload, block.previous_hash) != block.block_hash) {
    return "hash mismatch";
  }
  return {};
}

}  // namespace

QuorumConfig QuorumConfig::with_validators(int n) {
  if (n < 1) throw ValidationError("quorum needs at least one validator");
  return QuorumConfig{n};
}

std::string to_string(Decision d) { return d == Decision::kAccept ? "ACCEPT" : "REJECT"; }
std::string to_string(Outcome o) { return o == Outcome::kCommit ? "COMMIT" : "ABORT"; }
std::string to_string(ChainKind k) { return k == ChainKind::kRegistry ? "registry" : "votes"; }

std::string to_string(FaultProfile f) {
  switch (f) {
    case FaultProfile::kHonest: return "HONEST";
    case FaultProfile::kCrash: return "CRASH";
    case FaultProfile::kAlwaysReject: return "ALWAYS_REJECT";
    case FaultProfile::kCorruptHash: return "CORRUPT_HASH";
  }
  return "UNKNOWN";
}

void ReplicaState::observe_commit(const Proposal& committed) {
  if (committed.chain == ChainKind::kRegistry) {
    registered.insert(committed.subject.hex());
  } else {
    voted.insert(committed.subject.hex());
  }
}

std::optional<ValidatorVerdict> validate_proposal(const Validator& validator, const Chain& snapshot,
                                                  const Proposal& proposal) {
  const int id = validator.id;
  switch (validator.fault) {
    case FaultProfile::kCrash: return std::nullopt;
    case FaultProfile::kAlwaysReject: return reject(id, "injected fault");
    case FaultProfile::kHonest:
    case FaultProfile::kCorruptHash: break;
  }

  std::string problem;
  if (proposal.chain == ChainKind::kRegistry) {
    const auto* reg = std::get_if<RegistrationPayload>(&proposal.block.payload);
    problem = reg ? check_registration(validator.replica, proposal, *reg)
                  : "payload schema does not match registry chain";
  } else {
    const auto* vote = std::get_if<VotePayload>(&proposal.block.payload);
    problem = vote ? check_vote(validator.replica, proposal, *vote)
                   : "payload schema does not match vote chain";
  }
  if (problem.empty()) {
    problem = check_link(snapshot, proposal.block, validator.fault == FaultProfile::kCorruptHash);
  }
  if (!problem.empty()) return reject(id, std::move(problem));
  return accept(id);
}

Outcome decide(std::span<const ValidatorVerdict> verdicts, const QuorumConfig& config) {
  if (verdicts.size() > static_cast<std::size_t>(config.n_validators)) {
    throw ValidationError("more verdicts than validators");
  }
  std::set<int> ids;
  int accepts = 0;
  for (const auto& v : verdicts) {
    if (!ids.insert(v.validator_id).second) {
      throw ValidationError("duplicate verdict from validator " + std::to_string(v.validator_id));
    }
    if (v.decision == Decision::kAccept) ++accepts;
  }
  return accepts >= config.threshold() ? Outcome::kCommit : Outcome::kAbort;
}

std::vector<std::string> RoundResult::rejection_reasons() const {
  std::vector<std::string> reasons;
  for (const auto& v : verdicts) {
    if (v.decision == Decision::kReject) {
      reasons.push_back("validator " + std::to_string(v.validator_id) + ": " + v.reason);
    }
  }
  for (int id : silent) reasons.push_back("validator " + std::to_string(id) + ": no verdict");
  return reasons;
}

RoundResult run_round(Chain& chain, const Proposal& proposal, std::span<Validator> validators,
                      const QuorumConfig& config, const CommitSink& sink,
                      std::chrono::milliseconds verdict_bound) {
  if (validators.size() != static_cast<std::size_t>(config.n_validators)) {
    throw ValidationError("validator count does not match quorum configuration");
  }
  const Chain& snapshot = chain;
  std::vector<std::future<std::optional<ValidatorVerdict>>> pending;
  pending.reserve(validators.size());
  for (const auto& v : validators) {
    pending.push_back(std::async(std::launch::async, [&v, &snapshot, &proposal] {
      return validate_proposal(v, snapshot, proposal);
    }));
  }

  RoundResult result;
  const auto deadline = std::chrono::steady_clock::now() + verdict_bound;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    std::optional<ValidatorVerdict> verdict;
    if (pending[i].wait_until(deadline) == std::future_status::ready) verdict = pending[i].get();
    if (verdict) {
      result.verdicts.push_back(std::move(*verdict));
    } else {
      result.silent.push_back(validators[i].id);
    }
  }
  std::sort(result.verdicts.begin(), result.verdicts.end(),
            [](const auto& a, const auto& b) { return a.validator_id < b.validator_id; });
  std::sort(result.silent.begin(), result.silent.end());

  result.outcome = decide(result.verdicts, config);
  if (result.outcome == Outcome::kCommit) {
    check_links_to_head(chain, proposal.block);
    if (sink) sink(proposal.block);
    commit_block(chain, proposal.block);
    for (auto& v : validators) v.replica.observe_commit(proposal);
    result.committed = proposal.block;
  }
  return result;
}

nlohmann::json round_trace(std::uint64_t round_id, const Proposal& proposal,
                           const RoundResult& result) {
  auto verdicts = nlohmann::json::array();
  for (const auto& v : result.verdicts) {
    verdicts.push_back(
        {{"validator_id", v.validator_id}, {"decision", to_string(v.decision)}, {"reason", v.reason}});
  }
  nlohmann::json j{{"round", round_id},
                   {"chain", to_string(proposal.chain)},
                   {"payload_hash", sha256(canonical_json(proposal.block.payload)).hex()},
                   {"verdicts", verdicts},
                   {"silent", result.silent},
                   {"outcome", to_string(result.outcome)}};
  j["block_index"] = result.committed ? nlohmann::json(result.committed->index) : nlohmann::json();
  return j;
}

}  // namespace evote
