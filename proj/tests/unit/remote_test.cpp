#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <future>
#include <sstream>
#include <thread>

#include "../support/fake_scorer.hpp"
#include "geolm/eval/metrics.hpp"
#include "geolm/eval/remote.hpp"
#include "test_util.hpp"

namespace geolm::eval {
namespace {

using testing::FakeScorer;

FakeScorer position_scorer() {
  return FakeScorer([](std::string_view text, std::string_view, std::size_t i) {
    return -0.5 - static_cast<double>(i) - static_cast<double>(text.size()) * 1e-3;
  }, "generated text");
}

// Runs serve_tcp on a background thread for the lifetime of the object.
class TcpServer {
 public:
  explicit TcpServer(Scorer& backend) : server_(backend) {
    std::promise<int> bound;
    auto fut = bound.get_future();
    thread_ = std::thread([this, &bound] { server_.serve_tcp(0, stop_, [&](int p) { bound.set_value(p); }); });
    port_ = fut.get();
  }
  ~TcpServer() {
    stop_ = true;
    thread_.join();
  }
  int port() const { return port_; }

 private:
  ScoringServer server_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
  int port_ = 0;
};

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
  socklen_t len = sizeof a;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
  ::close(fd);
  return ntohs(a.sin_port);
}

// Hangs up on the first `drops` connections after reading one request, then
// behaves like a normal server.
class FlakyServer {
 public:
  FlakyServer(Scorer& backend, int drops) : server_(backend), drops_(drops) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof a);
    ::listen(fd_, 8);
    socklen_t len = sizeof a;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    port_ = ntohs(a.sin_port);
    thread_ = std::thread([this] { run(); });
  }
  ~FlakyServer() {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    thread_.join();
  }
  int port() const { return port_; }
  int accepted() const { return accepted_.load(); }

 private:
  void run() {
    while (true) {
      const int c = ::accept(fd_, nullptr, nullptr);
      if (c < 0) return;
      ++accepted_;
      std::string buf;
      char ch = 0;
      bool open = true;
      while (open) {
        buf.clear();
        while (true) {
          const auto n = ::read(c, &ch, 1);
          if (n <= 0) {
            open = false;
            break;
          }
          if (ch == '\n') break;
          buf.push_back(ch);
        }
        if (!open) break;
        if (drops_ > 0) {
          --drops_;
          break;
        }
        const auto reply = server_.handle_line(buf);
        if (::write(c, reply.data(), reply.size()) < 0) break;
      }
      ::close(c);
    }
  }

  ScoringServer server_;
  int drops_;
  int fd_ = -1;
  int port_ = 0;
  std::atomic<int> accepted_{0};
  std::thread thread_;
};

TEST(Protocol, HandleRequestShapes) {
  auto backend = position_scorer();
  ScoringServer server(backend);
  const auto lp = server.handle_request(Json{{"req_id", 7}, {"op", "logprobs"}, {"text", "ab"}, {"continuation", "xyz"}});
  EXPECT_EQ(lp.at("req_id"), 7);
  ASSERT_EQ(lp.at("token_logprobs").size(), 3u);
  EXPECT_DOUBLE_EQ(lp.at("token_logprobs").at(1).get<double>(), -1.502);
  EXPECT_FALSE(lp.contains("error"));

  const auto gen = server.handle_request(Json{{"req_id", "g"}, {"op", "generate"}, {"text", "p"}, {"max_new", 4}});
  EXPECT_EQ(gen.at("req_id"), "g");
  EXPECT_EQ(gen.at("text"), "gene");

  const auto bad = server.handle_request(Json{{"req_id", 3}, {"op", "nope"}});
  EXPECT_EQ(bad.at("req_id"), 3);
  EXPECT_EQ(bad.at("error"), "InvalidArgument");
  EXPECT_FALSE(bad.contains("token_logprobs"));

  EXPECT_EQ(server.handle_request(Json::array()).at("error"), "InvalidArgument");
  const auto malformed = Json::parse(server.handle_line("{not json"));
  EXPECT_TRUE(malformed.at("req_id").is_null());
  EXPECT_EQ(malformed.at("error"), "Format");
}

TEST(Protocol, BackendErrorsKeepTheirCode) {
  FakeScorer failing([](std::string_view, std::string_view, std::size_t) -> double {
    throw Error(ErrorCode::kSequenceTooLong, "too long");
  });
  ScoringServer server(failing);
  const auto r = server.handle_request(Json{{"req_id", 1}, {"op", "logprobs"}, {"text", ""}, {"continuation", "a"}});
  EXPECT_EQ(r.at("error"), "SequenceTooLong");
}

TEST(Protocol, StdioStream) {
  auto backend = position_scorer();
  ScoringServer server(backend);
  std::istringstream in(
      "{\"req_id\":1,\"op\":\"logprobs\",\"text\":\"\",\"continuation\":\"ab\"}\n"
      "\n"
      "{\"req_id\":2,\"op\":\"generate\",\"text\":\"q\",\"max_new\":3}\n"
      "garbage\n");
  std::ostringstream out;
  server.serve_stream(in, out);
  std::istringstream lines(out.str());
  std::vector<Json> replies;
  for (std::string l; std::getline(lines, l);) replies.push_back(Json::parse(l));
  ASSERT_EQ(replies.size(), 3u);
  EXPECT_EQ(replies[0].at("req_id"), 1);
  EXPECT_EQ(replies[0].at("token_logprobs").size(), 2u);
  EXPECT_EQ(replies[1].at("text"), "gen");
  EXPECT_EQ(replies[2].at("error"), "Format");
}

TEST(Tcp, RemoteMatchesLocalBackend) {
  auto backend = testing::hashed_scorer(3);
  TcpServer srv(backend);
  auto remote = make_scorer("remote:127.0.0.1:" + std::to_string(srv.port()));
  EXPECT_EQ(remote->token_logprobs("abc", "de"), backend.token_logprobs("abc", "de"));
  EXPECT_EQ(remote->generate("x", 5), "");

  std::vector<ObjectiveItem> items;
  for (int i = 0; i < 30; ++i) {
    ObjectiveItem it;
    it.id = std::to_string(i);
    it.question = "Which mineral " + std::to_string(i) + "?";
    it.choices = {{"A", "quartz"}, {"B", "mica"}, {"C", "talc"}};
    it.answer = std::string(1, "ABC"[i % 3]);
    it.subset = Subset::kNpee;
    items.push_back(it);
  }
  const auto via_remote = accuracy(*remote, items);
  const auto direct = accuracy(backend, items);
  EXPECT_EQ(via_remote.overall.correct, direct.overall.correct);
  for (std::size_t i = 0; i < items.size(); ++i) {
    EXPECT_EQ(via_remote.items[i].probs, direct.items[i].probs);
  }
}

TEST(Tcp, ErrorCodesCrossTheWire) {
  FakeScorer failing([](std::string_view, std::string_view cont, std::size_t) -> double {
    if (cont == "boom") throw Error(ErrorCode::kSequenceTooLong, "too long");
    return -1.0;
  });
  TcpServer srv(failing);
  RemoteScorer remote("127.0.0.1", srv.port());
  EXPECT_GEOLM_ERROR(remote.token_logprobs("", "boom"), ErrorCode::kSequenceTooLong);
  // The connection stays usable after an error reply.
  EXPECT_EQ(remote.token_logprobs("", "ok"), (std::vector<double>{-1.0, -1.0}));
}

TEST(Tcp, UnavailableWhenNothingListens) {
  RemoteOptions o;
  o.retries = 1;
  RemoteScorer remote("127.0.0.1", free_port(), o);
  EXPECT_GEOLM_ERROR(remote.token_logprobs("", "a"), ErrorCode::kScorerUnavailable);
  EXPECT_GEOLM_ERROR(RemoteScorer("127.0.0.1", 1, RemoteOptions{0, 1, 100}), ErrorCode::kInvalidArgument);
}

TEST(Tcp, RetriesAfterDroppedConnections) {
  auto backend = position_scorer();
  FlakyServer flaky(backend, 2);
  RemoteOptions o;
  o.retries = 2;
  o.timeout_ms = 2000;
  RemoteScorer remote("127.0.0.1", flaky.port(), o);
  EXPECT_EQ(remote.token_logprobs("t", "ab"), backend.token_logprobs("t", "ab"));
  EXPECT_EQ(flaky.accepted(), 3);

  FlakyServer worse(backend, 5);
  o.retries = 1;
  RemoteScorer gives_up("127.0.0.1", worse.port(), o);
  EXPECT_GEOLM_ERROR(gives_up.token_logprobs("t", "ab"), ErrorCode::kScorerUnavailable);
}

// Counts how many requests the backend is serving at once.
class SlowScorer : public Scorer {
 public:
  std::vector<double> token_logprobs(std::string_view, std::string_view continuation) override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --active_;
    return std::vector<double>(continuation.size(), -1.0);
  }
  std::string generate(std::string_view, int) override { return ""; }
  std::string id() const override { return "slow"; }
  int peak() const { return peak_.load(); }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

TEST(Tcp, InFlightBound) {
  SlowScorer backend;
  TcpServer srv(backend);
  RemoteOptions o;
  o.max_in_flight = 2;
  RemoteScorer remote("127.0.0.1", srv.port(), o);
  std::vector<std::thread> clients;
  std::atomic<int> ok{0};
  for (int t = 0; t < 8; ++t) {
    clients.emplace_back([&] {
      for (int k = 0; k < 3; ++k) {
        if (remote.token_logprobs("x", "ab").size() == 2) ++ok;
      }
    });
  }
  for (auto& c : clients) c.join();
  EXPECT_EQ(ok.load(), 24);
  EXPECT_LE(backend.peak(), 2);
  EXPECT_GE(backend.peak(), 1);
}

TEST(MakeScorer, SpecErrors) {
  EXPECT_GEOLM_ERROR(make_scorer("http://x"), ErrorCode::kInvalidArgument);
  EXPECT_GEOLM_ERROR(make_scorer("remote:hostonly"), ErrorCode::kInvalidArgument);
  EXPECT_GEOLM_ERROR(make_scorer("remote:h:notaport"), ErrorCode::kInvalidArgument);
  EXPECT_GEOLM_ERROR(make_scorer("local:/nonexistent/ckpt.tlm"), ErrorCode::kIo);
  EXPECT_EQ(make_scorer("remote:127.0.0.1:9")->id(), "remote:127.0.0.1:9");
}

}  // namespace
}  // namespace geolm::eval
