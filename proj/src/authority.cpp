#include "evote/authority.hpp"

#include <mutex>

namespace evote {
namespace {

nlohmann::json chain_audit_json(const ChainAudit& a) {
  nlohmann::json j{{"ok", a.report.ok}, {"length", a.length}};
  j["first_bad_index"] = a.report.first_bad_index ? nlohmann::json(*a.report.first_bad_index) : nlohmann::json();
  j["fault"] = to_string(a.report.fault);
  j["detail"] = a.report.detail;
  j["combined_hash"] = a.combined_hash ? nlohmann::json(a.combined_hash->hex()) : nlohmann::json();
  return j;
}

ChainAudit audit_chain(const Chain& chain) {
  ChainAudit a;
  a.report = verify_chain(chain);
  a.length = chain.size();
  if (a.report.ok && !chain.empty()) a.combined_hash = combined_hash(chain);
  return a;
}

}  // namespace

nlohmann::json AuditReport::to_json() const {
  auto hash_or_null = [](const ChainAudit& a) {
    return a.combined_hash ? nlohmann::json(a.combined_hash->hex()) : nlohmann::json();
  };
  return {{"ok", ok()},
          {"registry", chain_audit_json(registry)},
          {"votes", chain_audit_json(votes)},
          {"registry_combined_hash", hash_or_null(registry)},
          {"votes_combined_hash", hash_or_null(votes)}};
}

AuditReport audit_state(const Chain& registry_chain, const Chain& vote_chain) {
  return AuditReport{audit_chain(registry_chain), audit_chain(vote_chain)};
}

Authority::Authority(SystemState state, std::shared_ptr<Store> store, AuthorityOptions options)
    : config_(state.config),
      candidates_(state.candidates),
      store_(std::move(store)),
      options_(std::move(options)),
      quorum_(QuorumConfig::with_validators(state.config.n_validators)),
      state_(std::move(state)) {
  if (!state_.initialized()) throw ValidationError("election is not initialized");
  if (options_.faults.empty()) {
    options_.faults.assign(static_cast<std::size_t>(quorum_.n_validators), FaultProfile::kHonest);
  }
  if (options_.faults.size() != static_cast<std::size_t>(quorum_.n_validators)) {
    throw ValidationError("one fault profile per validator is required");
  }

  ReplicaState replica;
  replica.election_id = config_.election_id;
  replica.pattern_image_count = config_.pattern_image_count;
  for (const auto& c : candidates_) replica.candidates.insert(c.candidate_id);
  for (const auto& [id, entry] : state_.registry) {
    replica.registered.insert(id);
    if (entry.elections_voted.contains(config_.election_id)) replica.voted.insert(id);
  }
  for (int i = 0; i < quorum_.n_validators; ++i) {
    validators_.push_back(Validator{i, options_.faults[static_cast<std::size_t>(i)], replica});
  }
}

RoundResult Authority::propose(Proposal& proposal, Chain& chain, const std::function<void()>& record_intent) {
  if (store_failed_) throw StorageError("an earlier write failed; restart to recover the data directory");
  CommitSink sink;
  if (store_) {
    sink = [&](const Block& b) {
      record_intent();
      try {
        store_->persist_block(proposal.chain, config_.election_id, b);
      } catch (const StorageError&) {
        // The intent line is now the file's last; further appends would bury it.
        store_failed_ = true;
        throw;
      }
    };
  }
  auto result = run_round(chain, proposal, validators_, quorum_, sink, options_.verdict_bound);
  if (result.outcome == Outcome::kAbort) {
    record_round(proposal, result);
    throw RejectedError("proposal rejected by quorum", result.rejection_reasons());
  }
  return result;
}

void Authority::record_round(const Proposal& proposal, const RoundResult& result) {
  const auto round_id = state_.audit_rounds++;
  if (store_) store_->append_audit(round_trace(round_id, proposal, result));
}

Registration Authority::register_voter(const GovernmentId& id, const MinutiaeTemplate& fingerprint,
                                       const RotationPattern& pattern) {
  if (pattern.image_count() != static_cast<std::size_t>(config_.pattern_image_count)) {
    throw ValidationError("pattern must cover exactly " + std::to_string(config_.pattern_image_count) +
                          " images");
  }
  const auto identity = make_identity(id, fingerprint, pattern);
  RegistrationPayload payload{identity.h_identity, identity.h_fingerprint, serialize_pattern(pattern)};

  std::unique_lock lock(mutex_);
  if (state_.registry.contains(identity.b_identity.hex())) {
    throw AlreadyRegisteredError("identity already registered");
  }
  Proposal proposal{ChainKind::kRegistry, next_block(state_.registry_chain, std::move(payload)),
                    identity.b_identity};
  RegistryEntry entry{identity.b_identity, proposal.block.index, id.kind, {}};
  auto result = propose(proposal, state_.registry_chain, [&] { store_->record_registration(entry); });

  state_.registry.emplace(identity.b_identity.hex(), entry);
  record_round(proposal, result);
  return Registration{identity, entry.registration_block};
}

std::optional<DigitalIdentity> Authority::authenticate(const GovernmentId& id,
                                                       const MinutiaeTemplate& fingerprint,
                                                       const RotationPattern& pattern) const {
  const auto presented = make_identity(id, fingerprint, pattern);
  std::shared_lock lock(mutex_);
  auto it = state_.registry.find(presented.b_identity.hex());
  if (it == state_.registry.end()) return std::nullopt;
  const auto& reg =
      std::get<RegistrationPayload>(state_.registry_chain.blocks[it->second.registration_block].payload);
  DigitalIdentity stored;
  stored.h_identity = reg.aadhaar_hash;
  stored.h_fingerprint = reg.fingerprint_hash;
  stored.h_pattern = sha256(reg.photo_rotation_pattern);
  stored.b_identity = it->second.b_identity;
  if (!verify_login(stored, id, fingerprint, pattern)) return std::nullopt;
  return stored;
}

Receipt Authority::cast_vote(const Digest256& b_identity, std::string_view candidate_id) {
  const auto b_vote = bind_vote(b_identity, candidate_id, candidates_);

  std::unique_lock lock(mutex_);
  auto it = state_.registry.find(b_identity.hex());
  if (it == state_.registry.end()) throw AuthorizationError("identity is not registered");
  if (it->second.elections_voted.contains(config_.election_id)) {
    throw DuplicateVoteError("identity has already voted in this election");
  }
  VotePayload payload{b_vote, std::string(candidate_id), config_.election_id,
                      format_utc(options_.clock())};
  Proposal proposal{ChainKind::kVotes, next_block(state_.vote_chain, std::move(payload)), b_identity};
  auto result =
      propose(proposal, state_.vote_chain, [&] { store_->record_vote(b_identity, config_.election_id); });

  it->second.elections_voted.insert(config_.election_id);
  record_round(proposal, result);
  return Receipt{b_vote, result.committed->index, config_.election_id};
}

SystemState Authority::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

Chain Authority::registry_chain() const {
  std::shared_lock lock(mutex_);
  return state_.registry_chain;
}

Chain Authority::vote_chain() const {
  std::shared_lock lock(mutex_);
  return state_.vote_chain;
}

AuditReport Authority::audit() const {
  std::shared_lock lock(mutex_);
  return audit_state(state_.registry_chain, state_.vote_chain);
}

Tally Authority::current_tally() const {
  std::shared_lock lock(mutex_);
  return tally(state_.vote_chain, candidates_);
}

bool Authority::has_voted(const Digest256& b_identity) const {
  std::shared_lock lock(mutex_);
  auto it = state_.registry.find(b_identity.hex());
  return it != state_.registry.end() && it->second.elections_voted.contains(config_.election_id);
}

}  // namespace evote
