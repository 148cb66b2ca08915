#include "evote/store.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evote/pattern.hpp"

namespace fs = std::filesystem;

namespace evote {
namespace {

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError("write " + path.string() + ": " + errno_text());
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Size of the file up to and including its last newline. A process killed
// mid-append can leave an unterminated fragment after it.
off_t terminated_size(int fd, off_t size, const fs::path& path) {
  char buf[4096];
  off_t end = size;
  while (end > 0) {
    const off_t start = std::max<off_t>(0, end - static_cast<off_t>(sizeof buf));
    const auto n = ::pread(fd, buf, static_cast<std::size_t>(end - start), start);
    if (n < 0) throw StorageError("read " + path.string() + ": " + errno_text());
    for (auto i = n; i > 0; --i) {
      if (buf[i - 1] == '\n') return start + i;
    }
    end = start;
  }
  return 0;
}

// Appends one line and fsyncs. An unterminated fragment left by an earlier
// crash is cut off first; on failure the file is truncated back to its prior size.
void append_line(const fs::path& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("open " + path.string() + ": " + errno_text());
  off_t size = 0;
  try {
    struct stat st {};
    if (::fstat(fd, &st) != 0) throw StorageError("stat " + path.string() + ": " + errno_text());
    size = terminated_size(fd, st.st_size, path);
    if (size != st.st_size && ::ftruncate(fd, size) != 0) {
      throw StorageError("truncate " + path.string() + ": " + errno_text());
    }
  } catch (...) {
    ::close(fd);
    throw;
  }
  try {
    write_all(fd, line + "\n", path);
    if (::fsync(fd) != 0) throw StorageError("fsync " + path.string() + ": " + errno_text());
  } catch (...) {
    if (::ftruncate(fd, size) != 0) {
      // The original error is more useful than the truncate failure.
    }
    ::close(fd);
    throw;
  }
  ::close(fd);
}

// Writes via a temporary file and rename so readers never see a partial file.
void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("open " + tmp.string() + ": " + errno_text());
  try {
    write_all(fd, content, tmp);
    if (::fsync(fd) != 0) throw StorageError("fsync " + tmp.string() + ": " + errno_text());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageError("rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, "cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
}

// Non-empty lines with their 1-based line numbers. A missing file has no lines.
// An unterminated final line is an append that never completed and is skipped.
std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const fs::path& path) {
  std::vector<std::pair<std::size_t, nlohmann::json>> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string(), 0, "cannot open");
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || in.eof()) continue;
    try {
      out.emplace_back(number, nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      throw LoadError(path.string(), number, "line is not valid JSON");
    }
  }
  return out;
}

Chain parse_chain(const fs::path& path, std::vector<std::size_t>& line_of) {
  Chain chain;
  for (auto& [number, j] : read_jsonl(path)) {
    try {
      chain.blocks.push_back(block_from_json(j));
    } catch (const ValidationError& e) {
      throw LoadError(path.string(), number, e.what());
    }
    line_of.push_back(number);
  }
  return chain;
}

Chain load_chain(const fs::path& path) {
  std::vector<std::size_t> line_of;
  Chain chain = parse_chain(path, line_of);
  const auto report = verify_chain(chain);
  if (!report.ok) {
    throw LoadError(path.string(), line_of[*report.first_bad_index],
                    to_string(report.fault) + " (" + report.detail + ")");
  }
  return chain;
}

// Registry events are written before the block they describe. A final event
// whose block never reached its chain is the trace of an interrupted commit
// that was never acknowledged.
bool is_dangling_intent(const std::vector<std::pair<std::size_t, nlohmann::json>>& events,
                        const SystemState& s) try {
  const auto& last = events.back().second;
  if (!last.is_object() || !last.contains("event") || !last["event"].is_string()) return false;
  const auto event = last["event"].get<std::string>();
  if (event == "registered") {
    return last.contains("registration_block") && last["registration_block"].is_number_unsigned() &&
           last["registration_block"].get<std::uint64_t>() == s.registry_chain.size();
  }
  if (event != "voted" || last.value("election_id", "") != s.config.election_id) return false;
  std::size_t voted = 0;
  for (const auto& [n, j] : events) {
    if (j.is_object() && j.value("event", "") == "voted" && j.value("election_id", "") == s.config.election_id) {
      ++voted;
    }
  }
  return voted == s.vote_chain.size();  // one more than the vote blocks after genesis
} catch (const nlohmann::json::exception&) {
  return false;
}

std::string canonical_line(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

}  // namespace

void ElectionConfig::validate() const {
  if (election_id.empty()) throw ValidationError("election_id must not be empty");
  for (unsigned char c : election_id) {
    if (!std::isalnum(c) && c != '-' && c != '_' && c != '.') {
      throw ValidationError("election_id may only contain letters, digits, '-', '_' and '.'");
    }
  }
  if (n_validators < 1) throw ValidationError("n_validators must be at least 1");
  if (pattern_image_count < 1) throw ValidationError("pattern_image_count must be at least 1");
  if (session_ttl_seconds < 1) throw ValidationError("session_ttl_seconds must be at least 1");
  if (port < 0 || port > 65535) throw ValidationError("port out of range");
}

nlohmann::json ElectionConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"election_id", election_id},
          {"n_validators", n_validators},
          {"admin_token", admin_token},
          {"session_ttl_seconds", session_ttl_seconds},
          {"pattern_image_count", pattern_image_count},
          {"cors_origin", cors_origin}};
}

ElectionConfig ElectionConfig::from_json(const nlohmann::json& j) {
  ElectionConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.election_id = j.at("election_id").get<std::string>();
    c.n_validators = j.value("n_validators", c.n_validators);
    c.admin_token = j.value("admin_token", c.admin_token);
    c.session_ttl_seconds = j.value("session_ttl_seconds", c.session_ttl_seconds);
    c.pattern_image_count = j.value("pattern_image_count", c.pattern_image_count);
    c.cors_origin = j.value("cors_origin", c.cors_origin);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ElectionManifest SystemState::manifest() const {
  return ElectionManifest{config.election_id, candidates, config.n_validators,
                          config.pattern_image_count};
}

SystemState SystemState::fresh(ElectionConfig config, std::vector<Candidate> candidates) {
  config.validate();
  validate_candidates(candidates);
  SystemState s;
  s.config = std::move(config);
  s.candidates = std::move(candidates);
  s.vote_chain = make_vote_chain(s.manifest());
  return s;
}

Store::Store(fs::path data_dir) : dir_(std::move(data_dir)) {}

fs::path Store::config_path() const { return dir_ / "config.json"; }
fs::path Store::candidates_path() const { return dir_ / "candidates.json"; }
fs::path Store::registry_path() const { return dir_ / "registry.jsonl"; }
fs::path Store::registry_chain_path() const { return dir_ / "chains" / "registry.jsonl"; }
fs::path Store::vote_chain_path(const std::string& election_id) const {
  return dir_ / "chains" / ("votes-" + election_id + ".jsonl");
}
fs::path Store::audit_path() const { return dir_ / "audit" / "consensus.jsonl"; }
fs::path Store::lock_path() const { return dir_ / "lock"; }

bool Store::initialized() const { return fs::exists(config_path()); }

void Store::initialize(const SystemState& state) {
  std::error_code ec;
  if (fs::exists(dir_) && !fs::is_empty(dir_)) {
    throw StorageError("data directory " + dir_.string() + " is not empty");
  }
  fs::create_directories(dir_ / "chains", ec);
  if (!ec) fs::create_directories(dir_ / "audit", ec);
  if (ec) throw StorageError("create " + dir_.string() + ": " + ec.message());

  write_file_atomic(config_path(), state.config.to_json().dump(2) + "\n");
  write_file_atomic(candidates_path(), candidates_to_json(state.candidates).dump(2) + "\n");
  for (const auto& path : {registry_path(), registry_chain_path(), audit_path()}) {
    write_file_atomic(path, "");
  }
  write_file_atomic(vote_chain_path(state.config.election_id), "");
  for (const auto& b : state.vote_chain.blocks) {
    persist_block(ChainKind::kVotes, state.config.election_id, b);
  }
}

void Store::persist_block(ChainKind chain, const std::string& election_id, const Block& block) {
  const auto path = chain == ChainKind::kRegistry ? registry_chain_path() : vote_chain_path(election_id);
  append_line(path, canonical_line(block_to_json(block)));
}

void Store::record_registration(const RegistryEntry& entry) {
  append_line(registry_path(), canonical_line({{"event", "registered"},
                                               {"b_identity", entry.b_identity.hex()},
                                               {"registration_block", entry.registration_block},
                                               {"id_kind", to_string(entry.id_kind)}}));
}

void Store::record_vote(const Digest256& b_identity, const std::string& election_id) {
  append_line(registry_path(), canonical_line({{"event", "voted"},
                                               {"b_identity", b_identity.hex()},
                                               {"election_id", election_id}}));
}

void Store::append_audit(const nlohmann::json& trace) { append_line(audit_path(), canonical_line(trace)); }

void Store::rewrite_election(const SystemState& state) {
  if (state.vote_chain.size() != 1) {
    throw StorageError("election parameters are frozen once votes exist");
  }
  write_file_atomic(candidates_path(), candidates_to_json(state.candidates).dump(2) + "\n");
  write_file_atomic(vote_chain_path(state.config.election_id),
                    canonical_line(block_to_json(state.vote_chain.blocks.front())) + "\n");
}

Chain read_chain_unverified(const fs::path& path) {
  std::vector<std::size_t> line_of;
  return parse_chain(path, line_of);
}

SystemState Store::load_state() const {
  SystemState s;
  if (!fs::is_directory(dir_)) throw LoadError(dir_.string(), 0, "data directory does not exist");
  if (!initialized()) return s;

  try {
    s.config = ElectionConfig::from_json(read_json_file(config_path()));
  } catch (const ValidationError& e) {
    throw LoadError(config_path().string(), 0, e.what());
  }
  try {
    s.candidates = candidates_from_json(read_json_file(candidates_path()));
  } catch (const ValidationError& e) {
    throw LoadError(candidates_path().string(), 0, e.what());
  }

  s.registry_chain = load_chain(registry_chain_path());
  const auto vote_path = vote_chain_path(s.config.election_id);
  s.vote_chain = load_chain(vote_path);

  // Vote chain: manifest genesis, then votes for configured candidates only.
  if (s.vote_chain.empty()) throw LoadError(vote_path.string(), 0, "vote chain has no genesis block");
  if (s.vote_chain.blocks.front().payload != Payload(manifest_payload(s.manifest()))) {
    throw LoadError(vote_path.string(), 1, "genesis does not match the election manifest");
  }
  for (std::size_t i = 1; i < s.vote_chain.size(); ++i) {
    const auto* vote = std::get_if<VotePayload>(&s.vote_chain.blocks[i].payload);
    if (!vote || vote->election_id != s.config.election_id ||
        !has_candidate(s.candidates, vote->candidate_id) || !is_utc_timestamp(vote->cast_at)) {
      throw LoadError(vote_path.string(), i + 1, "block is not a valid vote for this election");
    }
  }

  // Registry: each registration block has exactly one entry whose identity it recomposes to.
  std::set<std::uint64_t> claimed_blocks;
  std::size_t votes_this_election = 0;
  auto events = read_jsonl(registry_path());
  if (!events.empty() && is_dangling_intent(events, s)) events.pop_back();
  for (auto& [number, j] : events) {
    auto fail = [&, n = number](const std::string& what) {
      return LoadError(registry_path().string(), n, what);
    };
    try {
      const auto event = j.at("event").get<std::string>();
      auto id = Digest256::from_hex(j.at("b_identity").get<std::string>());
      if (event == "registered") {
        RegistryEntry e;
        e.b_identity = id;
        e.registration_block = j.at("registration_block").get<std::uint64_t>();
        e.id_kind = parse_id_kind(j.at("id_kind").get<std::string>());
        if (e.registration_block >= s.registry_chain.size()) {
          throw fail("registration block " + std::to_string(e.registration_block) + " does not exist");
        }
        const auto* reg =
            std::get_if<RegistrationPayload>(&s.registry_chain.blocks[e.registration_block].payload);
        if (!reg) throw fail("registration block is not a registration");
        const auto pattern = parse_pattern(reg->photo_rotation_pattern, s.config.pattern_image_count);
        if (compose_identity(reg->aadhaar_hash, reg->fingerprint_hash, hash_pattern(pattern)) != id) {
          throw fail("registration block does not recompose to the recorded identity");
        }
        if (!claimed_blocks.insert(e.registration_block).second || s.registry.contains(id.hex())) {
          throw fail("identity or registration block recorded twice");
        }
        s.registry.emplace(id.hex(), std::move(e));
      } else if (event == "voted") {
        auto it = s.registry.find(id.hex());
        if (it == s.registry.end()) throw fail("vote recorded for an unregistered identity");
        const auto election = j.at("election_id").get<std::string>();
        if (!it->second.elections_voted.insert(election).second) throw fail("vote recorded twice");
        if (election == s.config.election_id) ++votes_this_election;
      } else {
        throw fail("unknown registry event '" + event + "'");
      }
    } catch (const LoadError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(e.what());
    }
  }
  if (claimed_blocks.size() != s.registry_chain.size()) {
    throw LoadError(registry_path().string(), 0,
                    "registration chain holds blocks with no registry entry");
  }
  const std::size_t vote_blocks = s.vote_chain.size() - 1;
  if (votes_this_election > vote_blocks) {
    throw LoadError(registry_path().string(), 0, "registry claims a vote absent from the vote chain");
  }
  if (votes_this_election < vote_blocks) {
    throw LoadError(registry_path().string(), 0, "vote chain holds votes the registry does not record");
  }

  s.audit_rounds = read_jsonl(audit_path()).size();
  return s;
}

DataDirLock::DataDirLock(const fs::path& data_dir) : path_(data_dir / "lock") {
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd >= 0) {
      const auto pid = std::to_string(::getpid()) + "\n";
      write_all(fd, pid, path_);
      ::close(fd);
      return;
    }
    if (errno != EEXIST) throw StorageError("lock " + path_.string() + ": " + errno_text());
    long holder = 0;
    std::ifstream(path_) >> holder;
    if (holder > 0 && (::kill(static_cast<pid_t>(holder), 0) == 0 || errno == EPERM)) {
      throw StorageError("data directory is locked by process " + std::to_string(holder));
    }
    std::error_code ec;
    fs::remove(path_, ec);
  }
  throw StorageError("could not acquire " + path_.string());
}

DataDirLock::~DataDirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

bool ReplicationReport::all_ok() const {
  for (const auto& r : replicas) {
    if (!r.ok) return false;
  }
  return true;
}

namespace {

std::vector<fs::path> state_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), dir);
    if (rel == "lock" || rel.extension() == ".tmp") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

ReplicaStatus compare_replica(const fs::path& primary, const fs::path& replica) {
  ReplicaStatus status{replica, true, "ok"};
  for (const auto& rel : state_files(primary)) {
    const auto target = replica / rel;
    if (!fs::exists(target)) return {replica, false, "missing " + rel.string()};
    if (read_file(primary / rel) != read_file(target)) return {replica, false, "mismatch in " + rel.string()};
  }
  return status;
}

}  // namespace

ReplicationReport replicate(const fs::path& data_dir, std::span<const fs::path> replica_dirs) {
  ReplicationReport report;
  const auto files = state_files(data_dir);
  for (const auto& replica : replica_dirs) {
    try {
      for (const auto& rel : files) {
        fs::create_directories((replica / rel).parent_path());
        write_file_atomic(replica / rel, read_file(data_dir / rel));
      }
      report.replicas.push_back(compare_replica(data_dir, replica));
    } catch (const std::exception& e) {
      report.replicas.push_back({replica, false, e.what()});
    }
  }
  return report;
}

ReplicationReport verify_replicas(const fs::path& data_dir, std::span<const fs::path> replica_dirs) {
  ReplicationReport report;
  for (const auto& replica : replica_dirs) {
    try {
      report.replicas.push_back(compare_replica(data_dir, replica));
    } catch (const std::exception& e) {
      report.replicas.push_back({replica, false, e.what()});
    }
  }
  return report;
}

}  // namespace evote
