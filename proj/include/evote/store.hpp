#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "evote/consensus.hpp"
#include "evote/election.hpp"
#include "evote/identity.hpp"
#include "evote/ledger.hpp"
#include "json.hpp"

namespace evote {

struct ElectionConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string election_id;
  int n_validators = 4;
  std::string admin_token;
  int session_ttl_seconds = 900;
  int pattern_image_count = kDefaultPatternImageCount;
  std::string cors_origin = "*";

  /// Throws ValidationError on out-of-range values.
  void validate() const;
  nlohmann::json to_json() const;
  static ElectionConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ElectionConfig&, const ElectionConfig&) = default;
};

/// Off-chain record linking a registered identity to its registration block.
struct RegistryEntry {
  Digest256 b_identity;
  std::uint64_t registration_block = 0;
  IdKind id_kind = IdKind::kAadhaar;
  std::set<std::string> elections_voted;

  friend bool operator==(const RegistryEntry&, const RegistryEntry&) = default;
};

using Registry = std::map<std::string, RegistryEntry>;

struct SystemState {
  ElectionConfig config;
  std::vector<Candidate> candidates;
  Chain registry_chain;
  Chain vote_chain;
  Registry registry;
  std::uint64_t audit_rounds = 0;

  bool initialized() const noexcept { return !vote_chain.empty(); }
  ElectionManifest manifest() const;

  /// A new election: config, candidates and the vote chain's manifest genesis.
  static SystemState fresh(ElectionConfig config, std::vector<Candidate> candidates);

  friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Durable, append-only persistence under one data directory:
///
///   config.json  candidates.json  registry.jsonl
///   chains/registry.jsonl  chains/votes-<election_id>.jsonl
///   audit/consensus.jsonl  lock
///
/// Every append is flushed to stable storage before it returns. Single writer per file.
class Store {
 public:
  explicit Store(std::filesystem::path data_dir);

  const std::filesystem::path& data_dir() const noexcept { return dir_; }
  std::filesystem::path config_path() const;
  std::filesystem::path candidates_path() const;
  std::filesystem::path registry_path() const;
  std::filesystem::path registry_chain_path() const;
  std::filesystem::path vote_chain_path(const std::string& election_id) const;
  std::filesystem::path audit_path() const;
  std::filesystem::path lock_path() const;

  bool initialized() const;

  /// Writes a fresh election into an empty or absent directory.
  /// Throws StorageError if the directory already holds files.
  void initialize(const SystemState& state);

  /// Appends one canonical-JSON block line to the named chain's file.
  void persist_block(ChainKind chain, const std::string& election_id, const Block& block);
  void record_registration(const RegistryEntry& entry);
  void record_vote(const Digest256& b_identity, const std::string& election_id);
  void append_audit(const nlohmann::json& trace);

  /// Replaces candidates.json and the vote chain's manifest genesis. Only valid
  /// while the vote chain holds nothing but its genesis.
  void rewrite_election(const SystemState& state);

  /// Reads and re-verifies everything. A directory without config.json yields
  /// an uninitialized state. Throws LoadError naming the file and line on any
  /// corruption or cross-check failure.
  SystemState load_state() const;

 private:
  std::filesystem::path dir_;
};

/// Parses a chain file block by block without verifying hashes or links.
/// Throws LoadError only for lines that are not well-formed blocks.
Chain read_chain_unverified(const std::filesystem::path& path);

/// Exclusive advisory lock on a data directory, held for the object's lifetime.
/// A lock left by a dead process is reclaimed.
class DataDirLock {
 public:
  explicit DataDirLock(const std::filesystem::path& data_dir);
  ~DataDirLock();
  DataDirLock(const DataDirLock&) = delete;
  DataDirLock& operator=(const DataDirLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct ReplicaStatus {
  std::filesystem::path replica;
  bool ok = false;
  std::string detail;
};

struct ReplicationReport {
  std::vector<ReplicaStatus> replicas;
  bool all_ok() const;
};

/// Copies every state file (not the lock) to each replica, then verifies byte equality.
ReplicationReport replicate(const std::filesystem::path& data_dir,
                            std::span<const std::filesystem::path> replica_dirs);

/// Byte-compares existing replicas against the primary without copying.
ReplicationReport verify_replicas(const std::filesystem::path& data_dir,
                                  std::span<const std::filesystem::path> replica_dirs);

}  // namespace evote
