#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "evote/authority.hpp"
#include "evote/identity.hpp"

namespace evote {

std::string base64_encode(ByteView data);
/// Strict standard-alphabet decoding with padding. Throws ValidationError.
Bytes base64_decode(std::string_view text);

struct ServiceOptions {
  /// Turns raw fingerprint captures (base64 `fingerprint` strings) into templates.
  std::shared_ptr<const MinutiaeExtractor> extractor = std::make_shared<ToyMinutiaeExtractor>();
  std::function<std::chrono::system_clock::time_point()> clock = [] {
    return std::chrono::system_clock::now();
  };
  int worker_threads = 16;
};

/// JSON-over-HTTP front end for one Authority:
///
///   POST /api/register  POST /api/login  POST /api/vote
///   GET  /api/candidates  /api/chain/{registry|votes}  /api/verify
///   GET  /api/tally  /api/analysis           (admin bearer token)
///
/// Register and vote are the only routes that reach a ledger mutation.
class Service {
 public:
  explicit Service(std::shared_ptr<Authority> authority, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to an ephemeral port and returns it, or -1.
  int bind_to_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Serves until stop(); blocks the calling thread.
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  std::size_t active_sessions() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evote
