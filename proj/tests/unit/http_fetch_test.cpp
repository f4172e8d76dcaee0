#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "tlsmap/http_headers.hpp"

namespace tlsmap {
namespace {

// Self-signed P-256 server context generated in memory.
SSL_CTX* server_context() {
  static SSL_CTX* ctx = [] {
    EVP_PKEY* key = EVP_EC_gen("P-256");
    X509* cert = X509_new();
    X509_set_version(cert, 2);
    ASN1_INTEGER_set(X509_get_serialNumber(cert), 1);
    X509_gmtime_adj(X509_getm_notBefore(cert), 0);
    X509_gmtime_adj(X509_getm_notAfter(cert), 3600);
    X509_set_pubkey(cert, key);
    X509_NAME* name = X509_get_subject_name(cert);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                               reinterpret_cast<const unsigned char*>("localhost"), -1, -1, 0);
    X509_set_issuer_name(cert, name);
    X509_sign(cert, key, EVP_sha256());
    SSL_CTX* c = SSL_CTX_new(TLS_server_method());
    SSL_CTX_use_certificate(c, cert);
    SSL_CTX_use_PrivateKey(c, key);
    X509_free(cert);
    EVP_PKEY_free(key);
    return c;
  }();
  return ctx;
}

enum class Mode {
  kPlain,       // answer plain HTTP; drop TLS handshakes
  kTls,         // answer over TLS; drop plain HTTP
  kSilent,      // accept and never answer
};

// Loopback server answering every request with a fixed response head.
class FixtureServer {
 public:
  FixtureServer(Mode mode, std::string response) : mode_(mode), response_(std::move(response)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    // Any address so every 127/8 spelling reaches the fixture.
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = 0;
    ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    socklen_t len = sizeof(addr);
    getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    ::listen(listen_fd_, 64);
    thread_ = std::thread([this] { loop(); });
  }

  ~FixtureServer() {
    stop_ = true;
    thread_.join();
    ::close(listen_fd_);
    for (auto& t : workers_) t.join();
  }

  std::uint16_t port() const { return port_; }
  int requests() const { return requests_; }
  int max_in_flight() const { return max_in_flight_; }
  std::string last_request() {
    std::lock_guard lock(mu_);
    return last_request_;
  }

 private:
  void loop() {
    while (!stop_) {
      pollfd pfd{listen_fd_, POLLIN, 0};
      if (::poll(&pfd, 1, 50) <= 0) continue;
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      workers_.emplace_back([this, fd] { serve(fd); });
    }
  }

  void serve(int fd) {
    timeval tv{2, 0};
    setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    unsigned char first = 0;
    const bool tls = ::recv(fd, &first, 1, MSG_PEEK) == 1 && first == 0x16;
    if (mode_ == Mode::kSilent) {
      while (!stop_) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    } else if (tls && mode_ == Mode::kTls) {
      SSL* ssl = SSL_new(server_context());
      SSL_set_fd(ssl, fd);
      if (SSL_accept(ssl) == 1) {
        record(read_request([&](char* b, int n) { return SSL_read(ssl, b, n); }));
        SSL_write(ssl, response_.data(), static_cast<int>(response_.size()));
        SSL_shutdown(ssl);
      }
      SSL_free(ssl);
    } else if (!tls && mode_ == Mode::kPlain) {
      record(read_request([&](char* b, int n) { return static_cast<int>(::recv(fd, b, n, 0)); }));
      ::send(fd, response_.data(), response_.size(), MSG_NOSIGNAL);
    }
    ::close(fd);
  }

  template <typename Read>
  std::string read_request(Read read) {
    std::string req;
    char buf[1024];
    while (req.find("\r\n\r\n") == std::string::npos) {
      int n = read(buf, sizeof(buf));
      if (n <= 0) break;
      req.append(buf, n);
    }
    // Counted from a complete request until the response is sent: the client
    // cannot start its next request on this host inside that window.
    const int now = ++in_flight_;
    int prev = max_in_flight_;
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight_;
    return req;
  }

  void record(std::string req) {
    std::lock_guard lock(mu_);
    ++requests_;
    last_request_ = std::move(req);
  }

  Mode mode_;
  std::string response_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stop_{false};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<int> requests_{0};
  std::mutex mu_;
  std::string last_request_;
  std::thread thread_;
  std::vector<std::thread> workers_;
};

const std::string kOkResponse =
    "HTTP/1.1 200 OK\r\nServer: fixture/1.0\r\nDate: Mon, 01 Jan 2024 00:00:00 GMT\r\n"
    "Content-Type: text/html\r\nContent-Length: 0\r\n\r\n";

FetchConfig config_for(std::uint16_t https_port, std::uint16_t http_port = 1) {
  FetchConfig c;
  c.timeout = std::chrono::milliseconds(1500);
  c.https_port = https_port;
  c.http_port = http_port;
  c.https_proxy.reset();
  c.user_agent = "tlsmap-test";
  return c;
}

// A port with nothing listening: bind, read the number, close.
std::uint16_t closed_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

TEST(Fetch, TlsCaptureKeepsWireOrder) {
  FixtureServer server(Mode::kTls, kOkResponse);
  const auto c = fetch_headers("127.0.0.1", config_for(server.port()));
  EXPECT_EQ(c.status, FetchStatus::ok(200));
  EXPECT_EQ(c.keys, (std::vector<std::string>{"Server", "Date", "Content-Type", "Content-Length"}));
  EXPECT_EQ(c.server_value, "fixture/1.0");
  EXPECT_FALSE(c.fetched_at.empty());
  const auto req = server.last_request();
  EXPECT_EQ(req.rfind("GET / HTTP/1.1\r\n", 0), 0u);
  EXPECT_NE(req.find("User-Agent: tlsmap-test\r\n"), std::string::npos);
}

TEST(Fetch, UnreachableIsConnectError) {
  const auto c = fetch_headers("127.0.0.1", config_for(closed_port()));
  EXPECT_EQ(c.status.kind, FetchStatus::Kind::kConnectError);
  EXPECT_TRUE(c.keys.empty());
}

TEST(Fetch, UnresolvableIsConnectError) {
  const auto c = fetch_headers("does-not-exist.invalid", config_for(443));
  EXPECT_EQ(c.status.kind, FetchStatus::Kind::kConnectError);
}

TEST(Fetch, RedirectIsCapturedNotFollowed) {
  FixtureServer server(Mode::kTls,
                       "HTTP/1.1 301 Moved Permanently\r\nLocation: https://elsewhere.example/\r\n"
                       "Server: fixture\r\nContent-Length: 0\r\n\r\n");
  const auto c = fetch_headers("127.0.0.1", config_for(server.port()));
  EXPECT_EQ(c.status, FetchStatus::http_error(301));
  EXPECT_EQ(c.keys, (std::vector<std::string>{"Location", "Server", "Content-Length"}));
  EXPECT_EQ(server.requests(), 1);
}

TEST(Fetch, TlsFailureWithoutFallback) {
  FixtureServer plain(Mode::kPlain, kOkResponse);
  const auto c = fetch_headers("127.0.0.1", config_for(plain.port(), plain.port()));
  EXPECT_EQ(c.status.kind, FetchStatus::Kind::kTlsError);
  EXPECT_EQ(plain.requests(), 0);
}

TEST(Fetch, TlsFailureFallsBackToHttp) {
  FixtureServer plain(Mode::kPlain, kOkResponse);
  auto cfg = config_for(plain.port(), plain.port());
  cfg.allow_http_fallback = true;
  const auto c = fetch_headers("127.0.0.1", cfg);
  EXPECT_EQ(c.status, FetchStatus::ok(200));
  EXPECT_EQ(c.keys.front(), "Server");
  EXPECT_EQ(plain.requests(), 1);
}

TEST(Fetch, SilentServerTimesOut) {
  FixtureServer silent(Mode::kSilent, "");
  auto cfg = config_for(silent.port());
  cfg.timeout = std::chrono::milliseconds(300);
  const auto start = std::chrono::steady_clock::now();
  const auto c = fetch_headers("127.0.0.1", cfg);
  EXPECT_EQ(c.status.kind, FetchStatus::Kind::kTimeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

TEST(Fetch, ConnectTunnelThroughProxy) {
  // A proxy that refuses CONNECT yields connect_error rather than a crash.
  FixtureServer proxy(Mode::kPlain, "HTTP/1.1 403 Forbidden\r\nContent-Length: 0\r\n\r\n");
  auto cfg = config_for(443);
  cfg.https_proxy = "http://127.0.0.1:" + std::to_string(proxy.port());
  const auto c = fetch_headers("example.com", cfg);
  EXPECT_EQ(c.status.kind, FetchStatus::Kind::kConnectError);
  EXPECT_EQ(proxy.last_request().rfind("CONNECT example.com:443 HTTP/1.1\r\n", 0), 0u);
}

TEST(FetchAll, SerializesPerHost) {
  FixtureServer server(Mode::kTls, kOkResponse);
  auto cfg = config_for(server.port());
  cfg.concurrency = 8;
  const std::vector<std::string> domains(6, "127.0.0.1");
  const auto captures = fetch_all(domains, cfg);
  ASSERT_EQ(captures.size(), 6u);
  for (const auto& c : captures) EXPECT_EQ(c.status, FetchStatus::ok(200));
  EXPECT_EQ(server.requests(), 6);
  EXPECT_EQ(server.max_in_flight(), 1);
}

TEST(FetchAll, RunsHostsConcurrently) {
  FixtureServer server(Mode::kTls, kOkResponse);
  auto cfg = config_for(server.port());
  cfg.concurrency = 4;
  // Distinct spellings of loopback count as distinct hosts.
  const std::vector<std::string> domains = {"127.0.0.1", "127.0.0.2", "127.0.0.3", "127.0.0.4"};
  const auto captures = fetch_all(domains, cfg);
  for (std::size_t i = 0; i < captures.size(); ++i) {
    EXPECT_EQ(captures[i].domain, domains[i]);
  }
  EXPECT_EQ(server.requests(), 4);
}

}  // namespace
}  // namespace tlsmap
