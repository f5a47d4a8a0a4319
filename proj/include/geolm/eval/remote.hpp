#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "geolm/common/io.hpp"
#include "geolm/eval/scorer.hpp"

namespace geolm::eval {

// Newline-delimited JSON, one object per line:
//   request  {"req_id", "op": "logprobs"|"generate", "text", "continuation"?, "max_new"?}
//   response {"req_id", "token_logprobs": [...]} or {"req_id", "text": ...}
//   error    {"req_id", "error": code, "message": ...}

struct RemoteOptions {
  int max_in_flight = 4;  // also the connection pool size
  int retries = 2;        // extra attempts after a transport failure
  int timeout_ms = 30000;
};

// Client for a scoring server over TCP. Scoring is pure, so a request that
// fails in transport is resent on a fresh connection. Transport failures that
// outlast the retries, and "ScorerUnavailable" replies, raise kScorerUnavailable.
class RemoteScorer : public Scorer {
 public:
  RemoteScorer(std::string host, int port, RemoteOptions opts = {});
  ~RemoteScorer() override;

  std::vector<double> token_logprobs(std::string_view text, std::string_view continuation) override;
  std::string generate(std::string_view prompt, int max_new) override;
  std::string id() const override;

  Json call(Json request);

 private:
  struct Connection;
  std::unique_ptr<Connection> acquire();
  void release(std::unique_ptr<Connection> c);

  std::string host_;
  int port_;
  RemoteOptions opts_;
  std::mutex mu_;
  std::condition_variable cv_;
  int in_flight_ = 0;
  std::vector<std::unique_ptr<Connection>> idle_;
  std::atomic<std::uint64_t> next_id_{1};
};

// Serves any Scorer over the wire protocol.
class ScoringServer {
 public:
  explicit ScoringServer(Scorer& scorer) : scorer_(scorer) {}

  // Answers one request. Never throws: failures become error objects.
  Json handle_request(const Json& request);
  // Parses one line and answers it; malformed JSON yields an error object.
  std::string handle_line(const std::string& line);

  // Line loop until EOF.
  void serve_stream(std::istream& in, std::ostream& out);

  // Binds 127.0.0.1:port (0 picks a free port), calls on_listening with the
  // bound port, and serves each connection on its own thread until `stop`.
  void serve_tcp(int port, const std::atomic<bool>& stop, const std::function<void(int)>& on_listening = {});

 private:
  Scorer& scorer_;
};

// "local:ckpt[+adapters]" or "remote:host:port".
std::unique_ptr<Scorer> make_scorer(std::string_view spec, RemoteOptions opts = {});

}  // namespace geolm::eval
