#include "evote/service.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include <map>
#include <mutex>

#include "evote/analysis.hpp"
#include "httplib.h"

namespace evote {
namespace {

using nlohmann::json;

constexpr std::size_t kMaxAnalysisTrials = 4096;

struct Session {
  Digest256 b_identity;
  std::chrono::system_clock::time_point expires_at;
};

struct HttpError {
  int status;
  std::string message;
};

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
  try {
    auto body = json::parse(req.body);
    if (!body.is_object()) throw HttpError{400, "request body must be a JSON object"};
    return body;
  } catch (const json::parse_error&) {
    throw HttpError{400, "request body is not valid JSON"};
  }
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) {
    throw HttpError{400, std::string("field '") + key + "' must be a string"};
  }
  return body[key].get<std::string>();
}

std::string random_token() {
  std::array<std::uint8_t, 32> raw{};
  if (RAND_bytes(raw.data(), static_cast<int>(raw.size())) != 1) {
    throw Error("secure random source unavailable");
  }
  return to_hex(raw);
}

bool constant_time_equal(std::string_view a, std::string_view b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

json block_view(const Block& b) {
  return {{"index", b.index},
          {"data", payload_to_json(b.payload)},
          {"previous_hash", b.previous_hash},
          {"block_hash", b.block_hash.hex()}};
}

}  // namespace

std::string base64_encode(ByteView data) {
  std::string out(4 * ((data.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ValidationError("base64 length must be a multiple of 4");
  std::size_t padding = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool alpha = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                       c == '+' || c == '/';
    if (c == '=' && i + 2 >= text.size()) {
      ++padding;
    } else if (!alpha || padding) {
      throw ValidationError("malformed base64");
    }
  }
  Bytes out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ValidationError("malformed base64");
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

struct Service::Impl {
  std::shared_ptr<Authority> authority;
  ServiceOptions options;
  httplib::Server server;

  mutable std::mutex sessions_mutex;
  std::map<std::string, Session> sessions;

  struct Factors {
    GovernmentId id;
    MinutiaeTemplate fingerprint;
    RotationPattern pattern;
  };

  Factors parse_factors(const json& body) const {
    try {
      GovernmentId id;
      id.kind = parse_id_kind(string_field(body, "id_kind"));
      id.document = base64_decode(string_field(body, "id_document"));
      if (id.document.empty()) throw HttpError{400, "id_document is empty"};
      if (!body.contains("fingerprint")) throw HttpError{400, "field 'fingerprint' is required"};
      const auto& fp = body["fingerprint"];
      std::optional<MinutiaeTemplate> fingerprint;
      if (fp.is_object()) {
        fingerprint = minutiae_from_json(fp);
      } else if (fp.is_string()) {
        fingerprint = options.extractor->extract(base64_decode(fp.get<std::string>()));
      } else {
        throw HttpError{400, "fingerprint must be a minutiae template or base64 capture"};
      }
      auto pattern =
          parse_pattern(string_field(body, "pattern"), authority->config().pattern_image_count);
      return Factors{std::move(id), std::move(*fingerprint), std::move(pattern)};
    } catch (const ValidationError& e) {
      throw HttpError{400, e.what()};
    }
  }

  bool is_admin(const httplib::Request& req) const {
    const auto& token = authority->config().admin_token;
    if (token.empty()) return false;
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    if (header.size() <= kBearer.size() || header.compare(0, kBearer.size(), kBearer) != 0) return false;
    return constant_time_equal(std::string_view(header).substr(kBearer.size()), token);
  }

  void handle_register(const httplib::Request& req, httplib::Response& res) {
    auto factors = parse_factors(parse_body(req));
    try {
      auto reg = authority->register_voter(factors.id, factors.fingerprint, factors.pattern);
      send_json(res, 200, {{"b_identity", reg.identity.b_identity.hex()}, {"block_index", reg.block_index}});
    } catch (const AlreadyRegisteredError&) {
      send_error(res, 409, "identity already registered");
    } catch (const RejectedError& e) {
      send_json(res, 503, {{"error", "registration rejected by quorum"}, {"reasons", e.reasons()}});
    }
  }

  void handle_login(const httplib::Request& req, httplib::Response& res) {
    auto factors = parse_factors(parse_body(req));
    auto identity = authority->authenticate(factors.id, factors.fingerprint, factors.pattern);
    if (!identity) {
      send_error(res, 401, "authentication failed");
      return;
    }
    const auto expires_at =
        options.clock() + std::chrono::seconds(authority->config().session_ttl_seconds);
    const auto token = random_token();
    {
      std::lock_guard lock(sessions_mutex);
      sessions[token] = Session{identity->b_identity, expires_at};
    }
    send_json(res, 200, {{"token", token}, {"expires_at", format_utc(expires_at)}});
  }

  // Sessions are single-use: taken out before voting, restored only when the
  // vote failed for a reason the voter can retry.
  std::optional<Session> take_session(const std::string& token) {
    std::lock_guard lock(sessions_mutex);
    auto it = sessions.find(token);
    if (it == sessions.end()) return std::nullopt;
    Session s = it->second;
    sessions.erase(it);
    if (options.clock() >= s.expires_at) return std::nullopt;
    return s;
  }

  void restore_session(const std::string& token, const Session& s) {
    std::lock_guard lock(sessions_mutex);
    sessions.emplace(token, s);
  }

  void handle_vote(const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto token = string_field(body, "token");
    const auto candidate_id = string_field(body, "candidate_id");
    if (!has_candidate(authority->candidates(), candidate_id)) {
      send_error(res, 422, "unknown candidate '" + candidate_id + "'");
      return;
    }
    auto session = take_session(token);
    if (!session) {
      send_error(res, 401, "invalid or expired session");
      return;
    }
    try {
      auto receipt = authority->cast_vote(session->b_identity, candidate_id);
      send_json(res, 200, {{"receipt", receipt.to_json()}});
    } catch (const DuplicateVoteError&) {
      send_error(res, 409, "already voted");
    } catch (const AuthorizationError&) {
      send_error(res, 401, "invalid or expired session");
    } catch (const RejectedError& e) {
      restore_session(token, *session);
      send_json(res, 503, {{"error", "vote rejected by quorum"}, {"reasons", e.reasons()}});
    } catch (const StorageError&) {
      restore_session(token, *session);
      throw;
    }
  }

  void handle_chain(const httplib::Request& req, httplib::Response& res) {
    const auto name = req.matches[1].str();
    const Chain chain = name == "registry" ? authority->registry_chain() : authority->vote_chain();
    auto blocks = json::array();
    for (const auto& b : chain.blocks) blocks.push_back(block_view(b));
    send_json(res, 200, {{"chain", name}, {"length", chain.size()}, {"blocks", blocks}});
  }

  void handle_analysis(const httplib::Request& req, httplib::Response& res) {
    std::size_t trials = analysis::kDefaultAvalancheTrials;
    std::uint64_t seed = 0;
    try {
      if (req.has_param("trials")) trials = std::stoul(req.get_param_value("trials"));
      if (req.has_param("seed")) seed = std::stoull(req.get_param_value("seed"));
    } catch (const std::exception&) {
      throw HttpError{400, "trials and seed must be non-negative integers"};
    }
    if (trials < 1 || trials > kMaxAnalysisTrials) {
      throw HttpError{400, "trials must be between 1 and " + std::to_string(kMaxAnalysisTrials)};
    }
    const auto registry = authority->registry_chain();
    const auto votes = authority->vote_chain();
    json out;
    out["registry"] = registry.empty() ? json() : analysis::full_report(registry, trials, seed).to_json();
    out["votes"] = analysis::full_report(votes, trials, seed).to_json();
    send_json(res, 200, out);
  }

  using Handler = void (Impl::*)(const httplib::Request&, httplib::Response&);

  httplib::Server::Handler wrap(Handler h, bool admin = false) {
    return [this, h, admin](const httplib::Request& req, httplib::Response& res) {
      if (admin && !is_admin(req)) {
        send_error(res, 403, "admin token required");
        return;
      }
      try {
        (this->*h)(req, res);
      } catch (const HttpError& e) {
        send_error(res, e.status, e.message);
      } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  void install_routes() {
    server.new_task_queue = [n = options.worker_threads] {
      return new httplib::ThreadPool(static_cast<std::size_t>(n));
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", authority->config().cors_origin},
                                {"Access-Control-Allow-Headers", "Content-Type, Authorization"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/api/register", wrap(&Impl::handle_register));
    server.Post("/api/login", wrap(&Impl::handle_login));
    server.Post("/api/vote", wrap(&Impl::handle_vote));
    server.Get(R"(/api/chain/(registry|votes))", wrap(&Impl::handle_chain));
    server.Get("/api/candidates", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200,
                {{"election_id", authority->config().election_id},
                 {"pattern_image_count", authority->config().pattern_image_count},
                 {"candidates", candidates_to_json(authority->candidates())}});
    });
    server.Get("/api/verify", [this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, authority->audit().to_json());
    });
    server.Get("/api/tally", wrap(&Impl::handle_tally, true));
    server.Get("/api/analysis", wrap(&Impl::handle_analysis, true));
  }

  void handle_tally(const httplib::Request&, httplib::Response& res) {
    auto t = authority->current_tally().to_json();
    t["election_id"] = authority->config().election_id;
    send_json(res, 200, t);
  }
};

Service::Service(std::shared_ptr<Authority> authority, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->authority = std::move(authority);
  impl_->options = std::move(options);
  impl_->install_routes();
}

Service::~Service() { stop(); }

int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::size_t Service::active_sessions() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

}  // namespace evote
