#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "evote/analysis.hpp"
#include "evote/consensus.hpp"
#include "evote/election.hpp"
#include "evote/identity.hpp"
#include "evote/ledger.hpp"
#include "evote/store.hpp"
#include "json.hpp"

namespace evote {

struct ChainAudit {
  VerificationReport report;
  std::size_t length = 0;
  std::optional<Digest256> combined_hash;  // absent for an empty or invalid chain
};

struct AuditReport {
  ChainAudit registry;
  ChainAudit votes;

  bool ok() const noexcept { return registry.report.ok && votes.report.ok; }
  nlohmann::json to_json() const;
};

/// Verification of both chains; the one code path behind `evote verify` and GET /api/verify.
AuditReport audit_state(const Chain& registry_chain, const Chain& vote_chain);

struct AuthorityOptions {
  /// One profile per validator; empty means all honest.
  std::vector<FaultProfile> faults;
  std::function<std::chrono::system_clock::time_point()> clock = [] {
    return std::chrono::system_clock::now();
  };
  std::chrono::milliseconds verdict_bound = kDefaultVerdictBound;
};

struct Registration {
  DigitalIdentity identity;
  std::uint64_t block_index = 0;
};

/// The committing authority for one election: owns both chains and the
/// registry, runs every mutation through a quorum round inside a single-writer
/// section, and persists each commit before acknowledging it. Reads take
/// shared snapshots.
class Authority {
 public:
  /// `store` may be null for a purely in-memory authority.
  /// Throws ValidationError if the state is not initialized or faults mismatch n_validators.
  Authority(SystemState state, std::shared_ptr<Store> store = nullptr, AuthorityOptions options = {});

  /// Throws ValidationError, AlreadyRegisteredError, RejectedError or StorageError.
  Registration register_voter(const GovernmentId& id, const MinutiaeTemplate& fingerprint,
                              const RotationPattern& pattern);

  /// The stored identity iff all three factors match a registration.
  std::optional<DigitalIdentity> authenticate(const GovernmentId& id,
                                              const MinutiaeTemplate& fingerprint,
                                              const RotationPattern& pattern) const;

  /// Throws AuthorizationError (unregistered), DuplicateVoteError, ValidationError
  /// (unknown candidate), RejectedError (quorum abort) or StorageError.
  Receipt cast_vote(const Digest256& b_identity, std::string_view candidate_id);

  SystemState snapshot() const;
  Chain registry_chain() const;
  Chain vote_chain() const;
  AuditReport audit() const;
  Tally current_tally() const;
  bool has_voted(const Digest256& b_identity) const;

  const ElectionConfig& config() const noexcept { return config_; }
  const std::vector<Candidate>& candidates() const noexcept { return candidates_; }

 private:
  /// Runs a round; on commit writes the registry intent, then the block.
  RoundResult propose(Proposal& proposal, Chain& chain, const std::function<void()>& record_intent);
  void record_round(const Proposal& proposal, const RoundResult& result);

  const ElectionConfig config_;
  const std::vector<Candidate> candidates_;
  std::shared_ptr<Store> store_;
  AuthorityOptions options_;
  QuorumConfig quorum_;

  mutable std::shared_mutex mutex_;
  SystemState state_;
  std::vector<Validator> validators_;
  bool store_failed_ = false;
};

}  // namespace evote
