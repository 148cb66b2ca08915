#include "evote/cli.hpp"

#include <openssl/rand.h>
#include <pthread.h>

#include <algorithm>
#include <array>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "evote/analysis.hpp"
#include "evote/authority.hpp"
#include "evote/service.hpp"
#include "evote/store.hpp"

namespace evote::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Thrown for anything the operator can fix by changing the invocation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string data_dir;

  std::string election_id;
  std::string candidates_file;
  int validators = 4;
  int images = kDefaultPatternImageCount;
  std::string admin_token;
  std::string host = "127.0.0.1";
  int port = 8080;
  int session_ttl = 900;
  std::string cors_origin = "*";

  std::string candidate_id;
  std::string display_name;

  bool json_output = false;

  std::size_t trials = analysis::kDefaultAvalancheTrials;
  std::uint64_t seed = 0;
  std::string out;
  std::string chain = "registry";

  std::vector<std::string> replicas;
  bool verify_only = false;
};

std::string random_hex(std::size_t n) {
  std::vector<std::uint8_t> raw(n);
  if (RAND_bytes(raw.data(), static_cast<int>(n)) != 1) throw Error("secure random source unavailable");
  return to_hex(raw);
}

void require_data_dir(const Options& o) {
  if (!fs::is_directory(o.data_dir)) throw UsageError("data directory " + o.data_dir + " does not exist");
}

std::optional<DataDirLock> lock_data_dir(const Options& o) {
  try {
    return std::optional<DataDirLock>(std::in_place, o.data_dir);
  } catch (const StorageError& e) {
    throw UsageError(e.what());
  }
}

SystemState load_initialized(const Store& store) {
  auto state = store.load_state();
  if (!state.initialized()) throw UsageError(store.data_dir().string() + " holds no election; run init");
  return state;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f.flush()) throw StorageError("cannot write " + path.string());
}

int cmd_init(const Options& o, std::ostream& out) {
  json candidates_json;
  {
    std::ifstream in(o.candidates_file);
    if (!in) throw UsageError("cannot read candidates file " + o.candidates_file);
    try {
      candidates_json = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError("candidates file is not valid JSON: " + std::string(e.what()));
    }
  }
  ElectionConfig config;
  config.host = o.host;
  config.port = o.port;
  config.election_id = o.election_id;
  config.n_validators = o.validators;
  config.admin_token = o.admin_token.empty() ? random_hex(32) : o.admin_token;
  config.session_ttl_seconds = o.session_ttl;
  config.pattern_image_count = o.images;
  config.cors_origin = o.cors_origin;

  std::vector<Candidate> candidates;
  try {
    config.validate();
    candidates = candidates_from_json(candidates_json);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  Store store(o.data_dir);
  const auto state = SystemState::fresh(config, candidates);
  try {
    store.initialize(state);
  } catch (const StorageError& e) {
    throw UsageError(e.what());
  }
  out << "initialized election " << config.election_id << " in " << o.data_dir << "\n";
  out << "genesis " << state.vote_chain.head().block_hash.hex() << "\n";
  if (o.admin_token.empty()) out << "admin token " << config.admin_token << "\n";
  return kExitOk;
}

int cmd_candidate_add(const Options& o, std::ostream& out) {
  require_data_dir(o);
  auto lock = lock_data_dir(o);
  Store store(o.data_dir);
  auto state = load_initialized(store);
  if (state.vote_chain.size() != 1) throw UsageError("candidates are fixed once voting has started");
  state.candidates.push_back(Candidate{o.candidate_id, o.display_name.empty() ? o.candidate_id : o.display_name});
  try {
    validate_candidates(state.candidates);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  state.vote_chain = make_vote_chain(state.manifest());
  store.rewrite_election(state);
  out << "added " << o.candidate_id << "\n";
  out << "genesis " << state.vote_chain.head().block_hash.hex() << "\n";
  return kExitOk;
}

int cmd_candidate_list(const Options& o, std::ostream& out) {
  require_data_dir(o);
  const auto state = load_initialized(Store(o.data_dir));
  for (const auto& c : state.candidates) out << c.candidate_id << "\t" << c.display_name << "\n";
  return kExitOk;
}

void print_chain_audit(std::ostream& out, const char* name, const ChainAudit& a) {
  out << name << ": ";
  if (a.report.ok) {
    out << "ok length=" << a.length;
    if (a.combined_hash) out << " combined_hash=" << a.combined_hash->hex();
  } else {
    out << "FAILED length=" << a.length << " first_bad_index=" << *a.report.first_bad_index
        << " fault=" << to_string(a.report.fault) << " detail=" << a.report.detail;
  }
  out << "\n";
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  require_data_dir(o);
  Store store(o.data_dir);
  if (!store.initialized()) throw UsageError(o.data_dir + " holds no election; run init");
  ElectionConfig config;
  AuditReport report;
  try {
    std::ifstream in(store.config_path());
    config = ElectionConfig::from_json(json::parse(in));
    report = audit_state(read_chain_unverified(store.registry_chain_path()),
                         read_chain_unverified(store.vote_chain_path(config.election_id)));
  } catch (const std::exception& e) {
    err << "verify: " << e.what() << "\n";
    return kExitIntegrity;
  }
  if (o.json_output) {
    out << report.to_json().dump(2) << "\n";
  } else {
    print_chain_audit(out, "registry", report.registry);
    print_chain_audit(out, "votes", report.votes);
  }
  if (!report.ok()) return kExitIntegrity;
  // Chains are sound; the full load adds the registry and manifest cross-checks.
  try {
    store.load_state();
  } catch (const IntegrityError& e) {
    err << "verify: " << e.what() << "\n";
    return kExitIntegrity;
  }
  return kExitOk;
}

int cmd_tally(const Options& o, std::ostream& out) {
  require_data_dir(o);
  const auto state = load_initialized(Store(o.data_dir));
  const auto t = tally(state.vote_chain, state.candidates);
  if (o.json_output) {
    out << t.to_json().dump(2) << "\n";
    return kExitOk;
  }
  for (const auto& [id, n] : t.counts) out << id << "=" << n << "\n";
  out << "total=" << t.total << "\n";
  return kExitOk;
}

const Chain& select_chain(const SystemState& state, const std::string& name) {
  return name == "votes" ? state.vote_chain : state.registry_chain;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
  require_data_dir(o);
  const auto state = load_initialized(Store(o.data_dir));
  const auto& chain = select_chain(state, o.chain);
  if (chain.empty()) {
    err << "analyze: the " << o.chain << " chain is empty\n";
    return kExitIntegrity;
  }
  const auto report = analysis::full_report(chain, o.trials, o.seed);
  if (!o.out.empty()) {
    const fs::path path(o.out);
    write_text(path, report.to_json().dump(2) + "\n");
    auto sibling = [&](const std::string& suffix) {
      auto p = path;
      p.replace_extension();
      return fs::path(p.string() + suffix);
    };
    write_text(sibling(".char_frequency.csv"), report.char_frequency_csv());
    write_text(sibling(".bit_counts.csv"), report.bit_counts_csv());
  }
  out << report.headline();
  return kExitOk;
}

json chain_listing(const Chain& chain, const std::string& name) {
  auto blocks = json::array();
  for (const auto& b : chain.blocks) {
    blocks.push_back({{"index", b.index},
                      {"data", payload_to_json(b.payload)},
                      {"previous_hash", b.previous_hash},
                      {"block_hash", b.block_hash.hex()}});
  }
  return {{"chain", name}, {"length", chain.size()}, {"blocks", blocks}};
}

int cmd_export(const Options& o, std::ostream& out) {
  require_data_dir(o);
  const auto state = load_initialized(Store(o.data_dir));
  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "registry_chain.json", chain_listing(state.registry_chain, "registry").dump(2) + "\n");
  write_text(dir / "votes_chain.json", chain_listing(state.vote_chain, "votes").dump(2) + "\n");
  write_text(dir / "verify.json", audit_state(state.registry_chain, state.vote_chain).to_json().dump(2) + "\n");
  write_text(dir / "tally.json", tally(state.vote_chain, state.candidates).to_json().dump(2) + "\n");
  out << "exported to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_replicate(const Options& o, std::ostream& out) {
  require_data_dir(o);
  auto lock = lock_data_dir(o);
  load_initialized(Store(o.data_dir));
  std::vector<fs::path> targets(o.replicas.begin(), o.replicas.end());
  const auto report = o.verify_only ? verify_replicas(o.data_dir, targets) : replicate(o.data_dir, targets);
  for (const auto& r : report.replicas) {
    out << (r.ok ? "OK " : "MISMATCH ") << r.replica.string();
    if (!r.detail.empty()) out << ": " << r.detail;
    out << "\n";
  }
  return report.all_ok() ? kExitOk : kExitIntegrity;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  require_data_dir(o);
  auto lock = lock_data_dir(o);
  auto store = std::make_shared<Store>(o.data_dir);
  auto state = load_initialized(*store);
  const auto host = o.host.empty() ? state.config.host : o.host;
  const auto port = o.port > 0 ? o.port : state.config.port;

  auto authority = std::make_shared<Authority>(std::move(state), store);
  Service service(authority);
  if (!service.bind(host, port)) {
    err << "serve: cannot bind " << host << ":" << port << "\n";
    return kExitUsage;
  }

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  waiter.detach();

  out << "listening on http://" << host << ":" << port << std::endl;
  service.listen_after_bind();
  out << "stopped" << std::endl;
  return kExitOk;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Administer a hash-chain election: init, verify, tally, analyze, serve."};
  app.name("evote");
  app.require_subcommand(1);

  auto data_dir = [&](CLI::App* sub) {
    sub->add_option("-d,--data-dir", o.data_dir, "Election data directory")->required();
  };

  auto* init = app.add_subcommand("init", "Create a new election in an empty directory");
  data_dir(init);
  init->add_option("-e,--election-id", o.election_id, "Election identifier")->required();
  init->add_option("-c,--candidates", o.candidates_file, "JSON array of {candidate_id, display_name}")
      ->required();
  init->add_option("--validators", o.validators, "Number of simulated validators")->capture_default_str();
  init->add_option("--images", o.images, "Images in the rotation pattern")->capture_default_str();
  init->add_option("--admin-token", o.admin_token, "Bearer token for tally and analysis (random if omitted)");
  init->add_option("--host", o.host, "Default listen host")->capture_default_str();
  init->add_option("--port", o.port, "Default listen port")->capture_default_str();
  init->add_option("--session-ttl", o.session_ttl, "Session lifetime in seconds")->capture_default_str();
  init->add_option("--cors-origin", o.cors_origin, "Allowed browser origin")->capture_default_str();

  auto* candidate = app.add_subcommand("candidate", "Manage candidates");
  candidate->require_subcommand(1);
  auto* cand_add = candidate->add_subcommand("add", "Add a candidate before voting starts");
  data_dir(cand_add);
  cand_add->add_option("id", o.candidate_id, "Candidate id")->required();
  cand_add->add_option("-n,--name", o.display_name, "Display name");
  auto* cand_list = candidate->add_subcommand("list", "List candidates");
  data_dir(cand_list);

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  data_dir(serve);
  serve->add_option("--host", o.host, "Override the configured host");
  serve->add_option("--port", o.port, "Override the configured port");

  auto* verify = app.add_subcommand("verify", "Verify both chains and print combined hashes");
  data_dir(verify);
  verify->add_flag("--json", o.json_output, "Print the verification report as JSON");

  auto* tally_cmd = app.add_subcommand("tally", "Count votes");
  data_dir(tally_cmd);
  tally_cmd->add_flag("--json", o.json_output, "Print the tally as JSON");

  auto* analyze = app.add_subcommand("analyze", "Hash-quality metrics for a chain");
  data_dir(analyze);
  analyze->add_option("--trials", o.trials, "Avalanche trials")->capture_default_str()->check(CLI::Range(1, 1 << 20));
  analyze->add_option("--seed", o.seed, "Avalanche bit-selection seed")->capture_default_str();
  analyze->add_option("-o,--out", o.out, "Report JSON path; CSV histograms are written alongside");
  analyze->add_option("--chain", o.chain, "Chain to analyze")
      ->capture_default_str()
      ->check(CLI::IsMember({"registry", "votes"}));

  auto* export_cmd = app.add_subcommand("export", "Write chain listings, verification and tally as JSON");
  data_dir(export_cmd);
  export_cmd->add_option("-o,--out", o.out, "Output directory")->required();

  auto* replicate_cmd = app.add_subcommand("replicate", "Copy state to replica directories and compare");
  data_dir(replicate_cmd);
  replicate_cmd->add_option("--to", o.replicas, "Replica directory (repeatable)")->required();
  replicate_cmd->add_flag("--verify-only", o.verify_only, "Compare without copying");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  // serve falls back to the configured host and port.
  if (serve->parsed()) {
    if (!serve->count("--port")) o.port = 0;
    if (!serve->count("--host")) o.host.clear();
  }

  try {
    if (init->parsed()) return cmd_init(o, out);
    if (cand_add->parsed()) return cmd_candidate_add(o, out);
    if (cand_list->parsed()) return cmd_candidate_list(o, out);
    if (serve->parsed()) return cmd_serve(o, out, err);
    if (verify->parsed()) return cmd_verify(o, out, err);
    if (tally_cmd->parsed()) return cmd_tally(o, out);
    if (analyze->parsed()) return cmd_analyze(o, out, err);
    if (export_cmd->parsed()) return cmd_export(o, out);
    if (replicate_cmd->parsed()) return cmd_replicate(o, out);
  } catch (const UsageError& e) {
    err << "evote: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "evote: " << e.what() << "\n";
    return kExitIntegrity;
  }
  return kExitUsage;
}

}  // namespace evote::cli
