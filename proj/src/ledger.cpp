#include "evote/ledger.hpp"

#include <set>

namespace evote {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::set<std::string> keys_of(const nlohmann::json& j) {
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  return keys;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

nlohmann::json payload_to_json(const Payload& payload) {
  return std::visit(
      Overloaded{
          [](const RegistrationPayload& p) {
            return nlohmann::json{{"aadhaar_hash", p.aadhaar_hash.hex()},
                                  {"fingerprint_hash", p.fingerprint_hash.hex()},
                                  {"photo_rotation_pattern", p.photo_rotation_pattern}};
          },
          [](const VotePayload& p) {
            return nlohmann::json{{"b_vote", p.b_vote.hex()},
                                  {"candidate_id", p.candidate_id},
                                  {"cast_at", p.cast_at},
                                  {"election_id", p.election_id}};
          },
      },
      payload);
}

Payload payload_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("payload must be an object");
  const auto keys = keys_of(j);
  if (keys == std::set<std::string>{"aadhaar_hash", "fingerprint_hash", "photo_rotation_pattern"}) {
    return RegistrationPayload{Digest512::from_hex(string_field(j, "aadhaar_hash")),
                               Digest256::from_hex(string_field(j, "fingerprint_hash")),
                               string_field(j, "photo_rotation_pattern")};
  }
  if (keys == std::set<std::string>{"b_vote", "candidate_id", "cast_at", "election_id"}) {
    return VotePayload{Digest256::from_hex(string_field(j, "b_vote")),
                       string_field(j, "candidate_id"), string_field(j, "election_id"),
                       string_field(j, "cast_at")};
  }
  throw ValidationError("payload fields match neither registration nor vote shape");
}

std::string canonical_json(const Payload& payload) {
  // nlohmann::json objects are std::map-backed, so keys come out in byte order,
  // which for UTF-8 is code point order.
  return payload_to_json(payload).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

Digest256 compute_block_hash(const Payload& payload, std::string_view previous_hash) {
  std::string preimage = canonical_json(payload);
  preimage += '|';
  preimage += previous_hash;
  return sha256(preimage);
}

Block make_genesis(Payload payload) {
  Block b;
  b.index = 0;
  b.previous_hash = std::string(kGenesisPreviousHash);
  b.block_hash = compute_block_hash(payload, b.previous_hash);
  b.payload = std::move(payload);
  return b;
}

Block next_block(const Chain& chain, Payload payload) {
  if (chain.empty()) return make_genesis(std::move(payload));
  Block b;
  b.index = chain.size();
  b.previous_hash = chain.head().block_hash.hex();
  b.block_hash = compute_block_hash(payload, b.previous_hash);
  b.payload = std::move(payload);
  return b;
}

const Block& append_block(Chain& chain, Payload payload) {
  if (chain.empty()) throw IntegrityError("cannot append to an empty chain; create a genesis block");
  auto report = verify_chain(chain);
  if (!report.ok) {
    throw IntegrityError("refusing to append to an invalid chain: " + report.detail);
  }
  chain.blocks.push_back(next_block(chain, std::move(payload)));
  return chain.head();
}

void check_links_to_head(const Chain& chain, const Block& block) {
  const std::string expected_prev =
      chain.empty() ? std::string(kGenesisPreviousHash) : chain.head().block_hash.hex();
  if (block.index != chain.size() || block.previous_hash != expected_prev) {
    throw IntegrityError("block " + std::to_string(block.index) + " does not link to the chain head");
  }
  if (compute_block_hash(block.payload, block.previous_hash) != block.block_hash) {
    throw IntegrityError("block " + std::to_string(block.index) + " hash does not match its contents");
  }
}

const Block& commit_block(Chain& chain, Block block) {
  check_links_to_head(chain, block);
  chain.blocks.push_back(std::move(block));
  return chain.head();
}

std::string to_string(ChainFault fault) {
  switch (fault) {
    case ChainFault::kNone: return "none";
    case ChainFault::kHashMismatch: return "hash-mismatch";
    case ChainFault::kLinkMismatch: return "link-mismatch";
    case ChainFault::kIndexMismatch: return "index-mismatch";
  }
  return "unknown";
}

VerificationReport verify_chain(const Chain& chain) {
  auto fail = [](std::size_t i, ChainFault fault, std::string detail) {
    VerificationReport r;
    r.ok = false;
    r.first_bad_index = i;
    r.fault = fault;
    r.detail = "block " + std::to_string(i) + ": " + std::move(detail);
    return r;
  };
  for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
    const auto& b = chain.blocks[i];
    if (b.index != i) {
      return fail(i, ChainFault::kIndexMismatch, "index " + std::to_string(b.index) + " out of sequence");
    }
    if (compute_block_hash(b.payload, b.previous_hash) != b.block_hash) {
      return fail(i, ChainFault::kHashMismatch, "stored block hash does not match contents");
    }
    const std::string expected_prev =
        i == 0 ? std::string(kGenesisPreviousHash) : chain.blocks[i - 1].block_hash.hex();
    if (b.previous_hash != expected_prev) {
      return fail(i, ChainFault::kLinkMismatch, "previous hash does not match predecessor");
    }
  }
  return {};
}

Digest256 combine_hashes(std::span<const std::string> hashes) {
  std::string joined;
  joined.reserve(hashes.size() * Digest256::kHexLength);
  for (const auto& h : hashes) joined += h;
  return sha256(joined);
}

Digest256 combined_hash(const Chain& chain) {
  if (chain.empty()) throw IntegrityError("combined hash of an empty chain is undefined");
  auto report = verify_chain(chain);
  if (!report.ok) throw IntegrityError("combined hash of an invalid chain: " + report.detail);
  std::vector<std::string> hashes;
  hashes.reserve(chain.size());
  for (const auto& b : chain.blocks) hashes.push_back(b.block_hash.hex());
  return combine_hashes(hashes);
}

nlohmann::json block_to_json(const Block& block) {
  return {{"block_hash", block.block_hash.hex()},
          {"index", block.index},
          {"payload", payload_to_json(block.payload)},
          {"previous_hash", block.previous_hash}};
}

Block block_from_json(const nlohmann::json& j) {
  if (!j.is_object() ||
      keys_of(j) != std::set<std::string>{"block_hash", "index", "payload", "previous_hash"}) {
    throw ValidationError("block must have exactly block_hash, index, payload, previous_hash");
  }
  if (!j["index"].is_number_unsigned()) throw ValidationError("block index must be a non-negative integer");
  Block b;
  b.index = j["index"].get<std::uint64_t>();
  b.payload = payload_from_json(j["payload"]);
  b.previous_hash = string_field(j, "previous_hash");
  b.block_hash = Digest256::from_hex(string_field(j, "block_hash"));
  return b;
}

}  // namespace evote
