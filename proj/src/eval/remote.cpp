#include "geolm/eval/remote.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include "geolm/common/error.hpp"

namespace geolm::eval {

namespace {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Blocking line-oriented socket with a read buffer.
class LineSocket {
 public:
  explicit LineSocket(int fd) : fd_(fd) {}
  ~LineSocket() {
    if (fd_ >= 0) ::close(fd_);
  }
  LineSocket(const LineSocket&) = delete;
  LineSocket& operator=(const LineSocket&) = delete;

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("send: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  bool has_buffered_line() const { return buf_.find('\n') != std::string::npos; }

  // False on clean EOF before any byte of a new line.
  bool read_line(std::string& line, int timeout_ms) {
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return true;
      }
      if (timeout_ms >= 0) {
        pollfd p{fd_, POLLIN, 0};
        const int r = ::poll(&p, 1, timeout_ms);
        if (r == 0) throw TransportError("timed out waiting for reply");
        if (r < 0 && errno != EINTR) throw TransportError(std::string("poll: ") + std::strerror(errno));
        if (r < 0) continue;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(std::string("recv: ") + std::strerror(errno));
      }
      if (n == 0) {
        if (buf_.empty()) return false;
        line = std::move(buf_);
        buf_.clear();
        return true;
      }
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buf_;
};

int connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw TransportError("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

std::string dump_line(const Json& j) {
  return j.dump(-1, ' ', false, nlohmann::detail::error_handler_t::replace) + "\n";
}

}  // namespace

struct RemoteScorer::Connection {
  explicit Connection(int fd) : sock(fd) {}
  LineSocket sock;
};

RemoteScorer::RemoteScorer(std::string host, int port, RemoteOptions opts)
    : host_(std::move(host)), port_(port), opts_(opts) {
  if (opts_.max_in_flight <= 0) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be positive");
  if (opts_.retries < 0) throw Error(ErrorCode::kInvalidArgument, "retries must be >= 0");
}

RemoteScorer::~RemoteScorer() = default;

std::string RemoteScorer::id() const { return "remote:" + host_ + ":" + std::to_string(port_); }

std::unique_ptr<RemoteScorer::Connection> RemoteScorer::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < opts_.max_in_flight; });
  ++in_flight_;
  if (!idle_.empty()) {
    auto c = std::move(idle_.back());
    idle_.pop_back();
    return c;
  }
  return nullptr;
}

void RemoteScorer::release(std::unique_ptr<Connection> c) {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
    if (c) idle_.push_back(std::move(c));
  }
  cv_.notify_one();
}

Json RemoteScorer::call(Json request) {
  const std::uint64_t req_id = next_id_++;
  request["req_id"] = req_id;
  const std::string line = dump_line(request);
  std::string last_error;
  for (int attempt = 0; attempt <= opts_.retries; ++attempt) {
    auto conn = acquire();
    try {
      if (!conn) conn = std::make_unique<Connection>(connect_tcp(host_, port_));
      conn->sock.write_all(line);
      std::string reply_line;
      if (!conn->sock.read_line(reply_line, opts_.timeout_ms)) throw TransportError("connection closed");
      Json reply = Json::parse(reply_line);
      if (!reply.contains("req_id") || reply.at("req_id") != req_id) throw TransportError("reply for another request");
      release(std::move(conn));
      if (reply.contains("error")) {
        const std::string code = reply.at("error").get<std::string>();
        const std::string msg = reply.value("message", code);
        throw Error(error_code_from_string(code).value_or(ErrorCode::kScorerUnavailable), msg);
      }
      return reply;
    } catch (const TransportError& e) {
      last_error = e.what();
      release(nullptr);
    } catch (const Json::exception& e) {
      last_error = std::string("bad reply: ") + e.what();
      release(nullptr);
    }
  }
  throw Error(ErrorCode::kScorerUnavailable, id() + ": " + last_error);
}

std::vector<double> RemoteScorer::token_logprobs(std::string_view text, std::string_view continuation) {
  const Json reply = call(Json{{"op", "logprobs"}, {"text", std::string(text)}, {"continuation", std::string(continuation)}});
  try {
    return reply.at("token_logprobs").get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kScorerUnavailable, std::string("malformed logprobs reply: ") + e.what());
  }
}

std::string RemoteScorer::generate(std::string_view prompt, int max_new) {
  const Json reply = call(Json{{"op", "generate"}, {"text", std::string(prompt)}, {"max_new", max_new}});
  try {
    return reply.at("text").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kScorerUnavailable, std::string("malformed generate reply: ") + e.what());
  }
}

Json ScoringServer::handle_request(const Json& request) {
  Json reply = Json::object();
  reply["req_id"] = request.is_object() && request.contains("req_id") ? request.at("req_id") : Json(nullptr);
  try {
    if (!request.is_object()) throw Error(ErrorCode::kInvalidArgument, "request must be an object");
    const std::string op = request.value("op", std::string());
    const std::string text = request.value("text", std::string());
    if (op == "logprobs") {
      reply["token_logprobs"] = scorer_.token_logprobs(text, request.value("continuation", std::string()));
    } else if (op == "generate") {
      reply["text"] = scorer_.generate(text, request.value("max_new", 64));
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown op '" + op + "'");
    }
  } catch (const Error& e) {
    reply.erase("token_logprobs");
    reply.erase("text");
    reply["error"] = std::string(to_string(e.code()));
    reply["message"] = e.what();
  } catch (const std::exception& e) {
    reply.erase("token_logprobs");
    reply.erase("text");
    reply["error"] = std::string(to_string(ErrorCode::kInvalidArgument));
    reply["message"] = e.what();
  }
  return reply;
}

std::string ScoringServer::handle_line(const std::string& line) {
  Json request;
  try {
    request = Json::parse(line);
  } catch (const Json::exception& e) {
    return dump_line(Json{{"req_id", nullptr},
                          {"error", std::string(to_string(ErrorCode::kFormat))},
                          {"message", e.what()}});
  }
  return dump_line(handle_request(request));
}

void ScoringServer::serve_stream(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle_line(line);
    out.flush();
  }
}

void ScoringServer::serve_tcp(int port, const std::atomic<bool>& stop, const std::function<void(int)>& on_listening) {
  const int lfd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (lfd < 0) throw Error(ErrorCode::kIo, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(lfd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(lfd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(lfd, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(lfd);
    throw Error(ErrorCode::kIo, "cannot listen on port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(lfd, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  std::vector<std::thread> workers;
  while (!stop.load()) {
    pollfd p{lfd, POLLIN, 0};
    if (::poll(&p, 1, 100) <= 0) continue;
    const int cfd = ::accept(lfd, nullptr, nullptr);
    if (cfd < 0) continue;
    workers.emplace_back([this, cfd, &stop] {
      LineSocket sock(cfd);
      std::string line;
      try {
        while (!stop.load()) {
          if (!sock.has_buffered_line()) {
            pollfd cp{cfd, POLLIN, 0};
            const int r = ::poll(&cp, 1, 100);
            if (r == 0) continue;
            if (r < 0 && errno != EINTR) break;
            if (r < 0) continue;
          }
          if (!sock.read_line(line, -1)) break;
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          sock.write_all(handle_line(line));
        }
      } catch (const TransportError&) {
      }
    });
  }
  for (auto& w : workers) w.join();
  ::close(lfd);
}

std::unique_ptr<Scorer> make_scorer(std::string_view spec, RemoteOptions opts) {
  if (spec.starts_with("local:")) return make_local_scorer(spec);
  if (spec.starts_with("remote:")) {
    const std::string rest(spec.substr(7));
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "remote scorer needs host:port");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad port in '" + std::string(spec) + "'");
    }
    return std::make_unique<RemoteScorer>(rest.substr(0, colon), port, opts);
  }
  throw Error(ErrorCode::kInvalidArgument, "scorer spec must start with local: or remote:");
}

}  // namespace geolm::eval
