#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evote/ledger.hpp"
#include "json.hpp"

namespace evote {

/// Strict-majority quorum over n validators.
struct QuorumConfig {
  int n_validators = 4;

  int threshold() const noexcept { return n_validators / 2 + 1; }
  /// Throws ValidationError unless n >= 1.
  static QuorumConfig with_validators(int n);
};

enum class Decision { kAccept, kReject };
enum class Outcome { kCommit, kAbort };
enum class FaultProfile { kHonest, kCrash, kAlwaysReject, kCorruptHash };
enum class ChainKind { kRegistry, kVotes };

std::string to_string(Decision d);
std::string to_string(Outcome o);
std::string to_string(FaultProfile f);
std::string to_string(ChainKind k);

struct ValidatorVerdict {
  int validator_id = 0;
  Decision decision = Decision::kAccept;
  std::string reason;  // empty on accept

  friend bool operator==(const ValidatorVerdict&, const ValidatorVerdict&) = default;
};

/// A block proposed for one chain. `subject` is the b_identity being
/// registered or voting; it travels with the proposal but is never written
/// into a vote block.
struct Proposal {
  ChainKind chain = ChainKind::kRegistry;
  Block block;
  Digest256 subject;
};

/// A validator's own copy of the off-chain facts it checks proposals against.
struct ReplicaState {
  std::string election_id;
  int pattern_image_count = 4;
  std::set<std::string> candidates;
  std::set<std::string> registered;
  std::set<std::string> voted;

  void observe_commit(const Proposal& committed);
};

struct Validator {
  int id = 0;
  FaultProfile fault = FaultProfile::kHonest;
  ReplicaState replica;
};

/// Verdict of one validator on a proposal against a read snapshot of the
/// target chain. A crashed validator returns nothing.
std::optional<ValidatorVerdict> validate_proposal(const Validator& validator,
                                                  const Chain& snapshot,
                                                  const Proposal& proposal);

/// COMMIT iff accepts >= threshold. Throws ValidationError on a repeated
/// validator id or more verdicts than validators.
Outcome decide(std::span<const ValidatorVerdict> verdicts, const QuorumConfig& config);

struct RoundResult {
  Outcome outcome = Outcome::kAbort;
  std::vector<ValidatorVerdict> verdicts;  // ordered by validator id
  std::vector<int> silent;                 // validators with no verdict in time
  std::optional<Block> committed;

  std::vector<std::string> rejection_reasons() const;
};

/// Durably records a block before it joins the in-memory chain. Throwing aborts the commit.
using CommitSink = std::function<void(const Block&)>;

inline constexpr std::chrono::milliseconds kDefaultVerdictBound{2000};

/// Gathers verdicts concurrently, decides, and on COMMIT persists through
/// `sink` then appends. Must run inside the chain's single-writer section.
RoundResult run_round(Chain& chain, const Proposal& proposal, std::span<Validator> validators,
                      const QuorumConfig& config, const CommitSink& sink = {},
                      std::chrono::milliseconds verdict_bound = kDefaultVerdictBound);

/// One audit-log line: round id, target chain, payload hash, verdicts, outcome.
nlohmann::json round_trace(std::uint64_t round_id, const Proposal& proposal,
                           const RoundResult& result);

}  // namespace evote
