#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "evote/authority.hpp"
#include "evote/store.hpp"
#include "populate.hpp"

using namespace evote;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << "\n";
}

std::size_t load_error_line(const Store& s) {
  try {
    s.load_state();
  } catch (const LoadError& e) {
    return e.line();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("initialize writes the documented layout") {
    testing::TempDir dir;
    Store store(dir / "data");
    CHECK_FALSE(store.initialized());
    const auto state = testing::fresh_state("mayor-2026");
    store.initialize(state);
    for (const char* f : {"config.json", "candidates.json", "registry.jsonl", "chains/registry.jsonl",
                          "chains/votes-mayor-2026.jsonl", "audit/consensus.jsonl"}) {
      CHECK(fs::exists(dir / "data" / f));
    }
    CHECK(read_lines(store.vote_chain_path("mayor-2026")).size() == 1);
    CHECK(store.load_state() == state);
    CHECK_THROWS_AS(store.initialize(state), StorageError);
  }

  TEST_CASE("a missing directory fails, an empty one is uninitialized") {
    testing::TempDir dir;
    CHECK_THROWS_AS(Store(dir / "absent").load_state(), LoadError);
    CHECK_FALSE(Store(dir.path()).load_state().initialized());
  }

  TEST_CASE("config validation") {
    auto cfg = testing::fresh_state().config;
    CHECK(ElectionConfig::from_json(cfg.to_json()) == cfg);
    for (auto mutate : std::vector<std::function<void(ElectionConfig&)>>{
             [](ElectionConfig& c) { c.election_id = "../escape"; },
             [](ElectionConfig& c) { c.election_id = ""; },
             [](ElectionConfig& c) { c.n_validators = 0; },
             [](ElectionConfig& c) { c.pattern_image_count = 0; },
             [](ElectionConfig& c) { c.port = 70000; },
             [](ElectionConfig& c) { c.session_ttl_seconds = 0; }}) {
      auto c = cfg;
      mutate(c);
      CHECK_THROWS_AS(c.validate(), ValidationError);
    }
  }

  TEST_CASE("persisted state reloads identically") {
    testing::TempDir dir;
    auto authority = testing::persisted_authority(dir.path());
    testing::populate(*authority, 5, {"alice", "bob", "", "alice"});
    const auto reloaded = Store(dir.path()).load_state();
    CHECK(reloaded == authority->snapshot());
    CHECK(read_lines(Store(dir.path()).audit_path()).size() == 8);
  }

  TEST_CASE("tampered ledger lines are rejected with their line number") {
    testing::TempDir dir;
    testing::populate(*testing::persisted_authority(dir.path()), 4, {"alice", "bob", "alice"});
    Store store(dir.path());

    auto path = store.registry_chain_path();
    auto lines = read_lines(path);
    const auto original = lines;
    const auto pos = lines[2].find("PhotoWall2_") + 11;
    lines[2][pos] = lines[2][pos] == '0' ? '9' : '0';
    write_lines(path, lines);
    CHECK(load_error_line(store) == 3);

    write_lines(path, original);
    CHECK_NOTHROW(store.load_state());
    lines = original;
    lines[1] = "{not json";
    write_lines(path, lines);
    CHECK(load_error_line(store) == 2);

    write_lines(path, original);
    path = store.vote_chain_path("general-2026");
    lines = read_lines(path);
    std::swap(lines[1], lines[2]);
    write_lines(path, lines);
    CHECK(load_error_line(store) == 2);
  }

  TEST_CASE("changing the candidate list after the fact breaks the vote genesis") {
    testing::TempDir dir;
    testing::populate(*testing::persisted_authority(dir.path()), 1);
    Store store(dir.path());
    auto c = testing::two_candidates();
    c.push_back({"carol", "Carol"});
    std::ofstream(store.candidates_path(), std::ios::trunc) << candidates_to_json(c).dump();
    CHECK_THROWS_AS(store.load_state(), LoadError);
  }

  TEST_CASE("registry cross-checks") {
    testing::TempDir dir;
    testing::populate(*testing::persisted_authority(dir.path()), 3, {"alice", "bob"});
    Store store(dir.path());
    const auto original = read_lines(store.registry_path());
    REQUIRE(original.size() == 5);

    // Unclaimed registration block.
    auto lines = original;
    lines.erase(std::find_if(lines.begin(), lines.end(),
                             [](const std::string& l) { return l.find("\"registered\"") != std::string::npos; }));
    write_lines(store.registry_path(), lines);
    CHECK_THROWS_AS(store.load_state(), LoadError);

    // A vote claimed in the registry that the vote chain lacks.
    const auto f = testing::voter(2);
    const auto b = make_identity(f.id, f.fingerprint, f.pattern).b_identity.hex();
    const auto claim = R"({"b_identity":")" + b + R"(","election_id":"general-2026","event":"voted"})";
    const auto g = testing::voter(7);
    const auto gb = make_identity(g.id, g.fingerprint, g.pattern).b_identity.hex();
    const auto intent =
        R"({"b_identity":")" + gb + R"(","event":"registered","id_kind":"AADHAAR","registration_block":3})";

    // As the final line it is an interrupted commit and is dropped.
    lines = original;
    lines.push_back(claim);
    write_lines(store.registry_path(), lines);
    CHECK(store.load_state().registry.at(b).elections_voted.empty());

    // Likewise a registration intent for the next, never-written block.
    lines = original;
    lines.push_back(intent);
    write_lines(store.registry_path(), lines);
    CHECK_FALSE(store.load_state().registry.contains(gb));

    // Anywhere but last, either is corruption.
    lines = original;
    lines.push_back(claim);
    lines.push_back(intent);
    write_lines(store.registry_path(), lines);
    CHECK_THROWS_WITH_AS(store.load_state(), doctest::Contains("absent from the vote chain"), LoadError);
    lines = original;
    lines.push_back(intent);
    lines.push_back(claim);
    write_lines(store.registry_path(), lines);
    CHECK_THROWS_AS(store.load_state(), LoadError);

    // A torn final line is ignored, and the next append cuts it off.
    lines = original;
    write_lines(store.registry_path(), lines);
    std::ofstream(store.registry_path(), std::ios::app) << R"({"b_identity":"ab)";
    CHECK_NOTHROW(store.load_state());

    // A vote block the registry does not record.
    lines = original;
    lines.erase(std::find_if(lines.begin(), lines.end(),
                             [](const std::string& l) { return l.find("\"voted\"") != std::string::npos; }));
    write_lines(store.registry_path(), lines);
    CHECK_THROWS_AS(store.load_state(), LoadError);

    write_lines(store.registry_path(), original);
    CHECK_NOTHROW(store.load_state());
  }

  TEST_CASE("rewrite_election is refused once voting has started") {
    testing::TempDir dir;
    auto authority = testing::persisted_authority(dir.path());
    Store store(dir.path());
    auto state = store.load_state();
    state.candidates.push_back({"carol", "Carol"});
    state.vote_chain = make_vote_chain(state.manifest());
    store.rewrite_election(state);
    CHECK(store.load_state() == state);

    testing::TempDir dir2;
    testing::populate(*testing::persisted_authority(dir2.path()), 1, {"alice"});
    Store voted(dir2.path());
    auto s2 = voted.load_state();
    CHECK_THROWS_AS(voted.rewrite_election(s2), StorageError);
  }

  TEST_CASE("data directory lock") {
    testing::TempDir dir;
    {
      DataDirLock lock(dir.path());
      CHECK(fs::exists(dir / "lock"));
      CHECK_THROWS_AS(DataDirLock(dir.path()), StorageError);
    }
    CHECK_FALSE(fs::exists(dir / "lock"));

    // A lock left behind by a process that no longer exists is reclaimed.
    const pid_t child = fork();
    if (child == 0) _exit(0);
    waitpid(child, nullptr, 0);
    std::ofstream(dir / "lock") << child << "\n";
    CHECK_NOTHROW(DataDirLock(dir.path()));
  }

  TEST_CASE("replication") {
    testing::TempDir dir;
    testing::populate(*testing::persisted_authority(dir / "primary"), 3, {"alice", "bob"});
    const std::vector<fs::path> replicas{dir / "r1", dir / "r2"};
    auto report = replicate(dir / "primary", replicas);
    REQUIRE(report.replicas.size() == 2);
    CHECK(report.all_ok());
    CHECK(verify_replicas(dir / "primary", replicas).all_ok());

    // Tamper one replica.
    const auto vote_file = dir / "r2" / "chains" / "votes-general-2026.jsonl";
    auto lines = read_lines(vote_file);
    lines.back()[lines.back().find("alice") != std::string::npos ? lines.back().find("alice") : lines.back().find("bob")] = 'X';
    write_lines(vote_file, lines);
    report = verify_replicas(dir / "primary", replicas);
    CHECK_FALSE(report.all_ok());
    CHECK(report.replicas[0].ok);
    CHECK_FALSE(report.replicas[1].ok);
    CHECK(report.replicas[1].detail.find("votes-general-2026.jsonl") != std::string::npos);

    // Recovery from a replica after losing the primary.
    const auto primary = Store(dir / "primary").load_state();
    fs::remove_all(dir / "primary");
    const auto recovered = Store(dir / "r1").load_state();
    CHECK(recovered == primary);
    CHECK(combined_hash(recovered.registry_chain) == combined_hash(primary.registry_chain));
    CHECK(combined_hash(recovered.vote_chain) == combined_hash(primary.vote_chain));
  }

  TEST_CASE("replicate reports a replica it cannot write") {
    testing::TempDir dir;
    testing::populate(*testing::persisted_authority(dir / "primary"), 1);
    std::ofstream(dir / "blocker") << "a file, not a directory";
    const std::vector<fs::path> replicas{dir / "ok", dir / "blocker"};
    const auto report = replicate(dir / "primary", replicas);
    CHECK(report.replicas[0].ok);
    CHECK_FALSE(report.replicas[1].ok);
    CHECK_FALSE(report.all_ok());
  }

  TEST_CASE("acknowledged commits survive SIGKILL") {
    std::mt19937_64 rng(17);
    for (int round = 0; round < 5; ++round) {
      testing::TempDir dir;
      Store(dir.path()).initialize(testing::fresh_state());
      int ack[2];
      REQUIRE(pipe(ack) == 0);
      const pid_t child = fork();
      if (child == 0) {
        close(ack[0]);
        auto authority = testing::persisted_authority(dir.path());
        for (unsigned i = 0;; ++i) {
          const auto f = testing::voter(i);
          const auto reg = authority->register_voter(f.id, f.fingerprint, f.pattern);
          authority->cast_vote(reg.identity.b_identity, i % 2 ? "bob" : "alice");
          const char c = 'A';
          if (write(ack[1], &c, 1) != 1) _exit(1);
        }
      }
      close(ack[1]);
      const int wanted = std::uniform_int_distribution<int>(1, 20)(rng);
      int acknowledged = 0;
      char c;
      while (acknowledged < wanted && read(ack[0], &c, 1) == 1) ++acknowledged;
      kill(child, SIGKILL);
      waitpid(child, nullptr, 0);
      while (read(ack[0], &c, 1) == 1) ++acknowledged;
      close(ack[0]);

      // Every acknowledged vote is on disk and the directory reloads cleanly
      // wherever the kill landed.
      Store store(dir.path());
      SystemState state;
      REQUIRE_NOTHROW(state = store.load_state());
      CHECK(state.vote_chain.size() - 1 >= static_cast<std::size_t>(acknowledged));
      CHECK(tally(state.vote_chain, state.candidates).total == state.vote_chain.size() - 1);

      // A restarted authority keeps appending on top of whatever survived.
      Authority restarted(state, std::make_shared<Store>(dir.path()));
      testing::Factors next = testing::voter(1000);
      const auto reg = restarted.register_voter(next.id, next.fingerprint, next.pattern);
      restarted.cast_vote(reg.identity.b_identity, "alice");
      CHECK(store.load_state() == restarted.snapshot());
    }
  }
}
