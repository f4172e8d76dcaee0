#include "tlsmap/http_headers.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <openssl/err.h>
#include <openssl/ssl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "tlsmap/error.hpp"

namespace tlsmap {

std::string FetchStatus::to_string() const {
  switch (kind) {
    case Kind::kOk:
      return "ok";
    case Kind::kTimeout:
      return "timeout";
    case Kind::kTlsError:
      return "tls_error";
    case Kind::kConnectError:
      return "connect_error";
    case Kind::kHttpError:
      return "http_error(" + std::to_string(http_code) + ")";
  }
  return "connect_error";
}

FetchStatus FetchStatus::parse(std::string_view text) {
  text = detail::trim(text);
  if (text == "ok") return ok();
  if (text == "timeout") return of(Kind::kTimeout);
  if (text == "tls_error") return of(Kind::kTlsError);
  if (text == "connect_error") return of(Kind::kConnectError);
  constexpr std::string_view prefix = "http_error(";
  if (text.size() > prefix.size() + 1 && text.substr(0, prefix.size()) == prefix &&
      text.back() == ')') {
    const auto code = detail::parse_int<int>(
        text.substr(prefix.size(), text.size() - prefix.size() - 1));
    if (code) return http_error(*code);
  }
  throw Error(ErrorCode::kFormat, "unknown fetch status '" + std::string(text) + "'");
}

std::string canonicalize(const HeaderCapture& capture) {
  if (capture.keys.empty()) {
    throw Error(ErrorCode::kEmptyCapture,
                "no header keys captured for " + capture.domain);
  }
  std::string out;
  for (std::size_t i = 0; i < capture.keys.size(); ++i) {
    if (i > 0) out.push_back('\n');
    const auto& key = capture.keys[i];
    out += key;
    if (capture.server_value && detail::iequals(key, "server")) {
      out += ": ";
      out += *capture.server_value;
    }
  }
  return out;
}

std::optional<HeaderFingerprint> header_fingerprint(
    const HeaderCapture& capture) {
  if (capture.keys.empty()) return std::nullopt;
  HeaderFingerprint fp;
  fp.canonical = canonicalize(capture);
  fp.hash = mmh3_32(fp.canonical, 0);
  return fp;
}

HeaderCapture parse_response_head(std::string_view domain,
                                  std::string_view head) {
  HeaderCapture capture;
  capture.domain = std::string(domain);
  auto lines = detail::split(head, '\n');
  if (lines.empty() || detail::chomp(lines[0]).substr(0, 5) != "HTTP/") {
    capture.status = FetchStatus::http_error(0);
    return capture;
  }
  const auto status_line = detail::chomp(lines[0]);
  const auto sp = status_line.find(' ');
  int code = 0;
  if (sp != std::string_view::npos) {
    code = detail::parse_int<int>(status_line.substr(sp + 1, 3)).value_or(0);
  }
  capture.status = (code >= 200 && code < 300) ? FetchStatus::ok(code)
                                               : FetchStatus::http_error(code);

  bool last_was_server = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = detail::chomp(lines[i]);
    if (line.empty()) break;
    if (line.front() == ' ' || line.front() == '\t') {
      // obs-fold continuation of the previous header's value
      if (last_was_server && capture.server_value) {
        *capture.server_value += " ";
        *capture.server_value += detail::trim(line);
      }
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) continue;
    const auto key = detail::trim(line.substr(0, colon));
    capture.keys.emplace_back(key);
    last_was_server = detail::iequals(key, "server") && !capture.server_value;
    if (last_was_server) {
      capture.server_value = std::string(detail::trim(line.substr(colon + 1)));
    }
  }
  return capture;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

FetchConfig FetchConfig::from_environment() {
  FetchConfig config;
  for (const char* name : {"HTTPS_PROXY", "https_proxy"}) {
    if (const char* value = std::getenv(name); value && *value) {
      config.https_proxy = value;
      break;
    }
  }
  return config;
}

namespace {

using Kind = FetchStatus::Kind;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

struct SslDeleter {
  void operator()(SSL* ssl) const { SSL_free(ssl); }
};
using SslPtr = std::unique_ptr<SSL, SslDeleter>;

SSL_CTX* client_context() {
  static SSL_CTX* ctx = [] {
    std::signal(SIGPIPE, SIG_IGN);
    SSL_CTX* c = SSL_CTX_new(TLS_client_method());
    // Fingerprinting observes the server as presented; no chain validation.
    SSL_CTX_set_verify(c, SSL_VERIFY_NONE, nullptr);
    return c;
  }();
  return ctx;
}

struct Outcome {
  Kind failure = Kind::kOk;  // kOk means success
};

bool would_block() { return errno == EAGAIN || errno == EWOULDBLOCK; }

void set_io_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

// Non-blocking connect bounded by `timeout`, then back to blocking mode with
// per-operation timeouts.
Kind connect_tcp(const std::string& host, std::uint16_t port,
                 std::chrono::milliseconds timeout, Fd& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    return Kind::kConnectError;
  }
  std::unique_ptr<addrinfo, decltype(&freeaddrinfo)> guard(res, freeaddrinfo);

  Kind last = Kind::kConnectError;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    Fd fd(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!fd.valid()) continue;
    const int flags = fcntl(fd.get(), F_GETFL, 0);
    fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd.get(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{fd.get(), POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 0) {
        last = Kind::kTimeout;
        continue;
      }
      int err = 0;
      socklen_t len = sizeof(err);
      getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len);
      rc = (rc > 0 && err == 0) ? 0 : -1;
    }
    if (rc != 0) {
      last = Kind::kConnectError;
      continue;
    }
    fcntl(fd.get(), F_SETFL, flags & ~O_NONBLOCK);
    set_io_timeout(fd.get(), timeout);
    out = std::move(fd);
    return Kind::kOk;
  }
  return last;
}

class Transport {
 public:
  explicit Transport(int fd, SSL* ssl = nullptr) : fd_(fd), ssl_(ssl) {}

  bool send_all(std::string_view data) {
    while (!data.empty()) {
      long n = ssl_ ? SSL_write(ssl_, data.data(), static_cast<int>(data.size()))
                    : ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n <= 0) {
        timed_out_ = would_block();
        return false;
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  // Reads until the blank line ending the header block, EOF, or `limit`.
  bool read_head(std::string& out, std::size_t limit = 64 * 1024) {
    char buf[4096];
    while (out.find("\r\n\r\n") == std::string::npos &&
           out.find("\n\n") == std::string::npos && out.size() < limit) {
      long n = ssl_ ? SSL_read(ssl_, buf, sizeof(buf))
                    : ::recv(fd_, buf, sizeof(buf), 0);
      if (n == 0) return true;
      if (n < 0) {
        timed_out_ = would_block();
        return !out.empty() && !timed_out_;
      }
      out.append(buf, static_cast<std::size_t>(n));
    }
    return true;
  }

  bool timed_out() const { return timed_out_; }

 private:
  int fd_;
  SSL* ssl_;
  bool timed_out_ = false;
};

std::pair<std::string, std::uint16_t> split_proxy(std::string_view proxy,
                                                  std::uint16_t default_port) {
  if (auto pos = proxy.find("://"); pos != std::string_view::npos) {
    proxy.remove_prefix(pos + 3);
  }
  if (auto at = proxy.rfind('@'); at != std::string_view::npos) {
    proxy.remove_prefix(at + 1);
  }
  while (!proxy.empty() && proxy.back() == '/') proxy.remove_suffix(1);
  const auto colon = proxy.rfind(':');
  if (colon == std::string_view::npos) return {std::string(proxy), default_port};
  const auto port = detail::parse_int<std::uint16_t>(proxy.substr(colon + 1));
  return {std::string(proxy.substr(0, colon)), port.value_or(default_port)};
}

HeaderCapture attempt(const std::string& domain, bool use_tls,
                      const FetchConfig& config) {
  HeaderCapture capture;
  capture.domain = domain;
  capture.fetched_at = utc_timestamp();
  const std::uint16_t port = use_tls ? config.https_port : config.http_port;
  const bool via_proxy = use_tls && config.https_proxy.has_value();

  Fd fd;
  Kind rc;
  if (via_proxy) {
    const auto [proxy_host, proxy_port] = split_proxy(*config.https_proxy, 8080);
    rc = connect_tcp(proxy_host, proxy_port, config.timeout, fd);
  } else {
    rc = connect_tcp(domain, port, config.timeout, fd);
  }
  if (rc != Kind::kOk) {
    capture.status = FetchStatus::of(rc);
    return capture;
  }

  if (via_proxy) {
    Transport tunnel(fd.get());
    const std::string target = domain + ":" + std::to_string(port);
    std::string reply;
    if (!tunnel.send_all("CONNECT " + target + " HTTP/1.1\r\nHost: " + target +
                         "\r\n\r\n") ||
        !tunnel.read_head(reply)) {
      capture.status = FetchStatus::of(tunnel.timed_out() ? Kind::kTimeout
                                                          : Kind::kConnectError);
      return capture;
    }
    const auto head = parse_response_head(domain, reply);
    if (head.status.http_code != 200) {
      capture.status = FetchStatus::of(Kind::kConnectError);
      return capture;
    }
  }

  SslPtr ssl;
  if (use_tls) {
    ssl.reset(SSL_new(client_context()));
    SSL_set_fd(ssl.get(), fd.get());
    SSL_set_tlsext_host_name(ssl.get(), domain.c_str());
    errno = 0;
    if (SSL_connect(ssl.get()) != 1) {
      const bool timed_out = would_block();
      ERR_clear_error();
      capture.status =
          FetchStatus::of(timed_out ? Kind::kTimeout : Kind::kTlsError);
      return capture;
    }
  }

  Transport io(fd.get(), ssl.get());
  const bool default_port = port == (use_tls ? 443 : 80);
  const std::string host =
      default_port ? domain : domain + ":" + std::to_string(port);
  const std::string request = "GET / HTTP/1.1\r\nHost: " + host +
                              "\r\nUser-Agent: " + config.user_agent +
                              "\r\nAccept: */*\r\nConnection: close\r\n\r\n";
  std::string head;
  if (!io.send_all(request) || !io.read_head(head)) {
    capture.status = FetchStatus::of(io.timed_out() ? Kind::kTimeout
                                                    : Kind::kConnectError);
    if (ssl) ERR_clear_error();
    return capture;
  }
  if (ssl) {
    SSL_shutdown(ssl.get());
    ERR_clear_error();
  }
  if (head.empty()) {
    capture.status = FetchStatus::of(Kind::kConnectError);
    return capture;
  }
  auto parsed = parse_response_head(domain, head);
  parsed.fetched_at = capture.fetched_at;
  return parsed;
}

}  // namespace

HeaderCapture fetch_headers(std::string_view domain, const FetchConfig& config) {
  const std::string host(domain);
  auto capture = attempt(host, /*use_tls=*/true, config);
  if (capture.status.kind == Kind::kTlsError && config.allow_http_fallback) {
    capture = attempt(host, /*use_tls=*/false, config);
  }
  return capture;
}

std::vector<HeaderCapture> fetch_all(std::span<const std::string> domains,
                                     const FetchConfig& config) {
  std::vector<HeaderCapture> results(domains.size());
  // Group request indices by host so a host is only ever handled by one
  // worker at a time.
  std::vector<std::vector<std::size_t>> per_host;
  std::unordered_map<std::string, std::size_t> host_slot;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    const std::string key = detail::to_lower(domains[i]);
    auto [it, inserted] = host_slot.emplace(key, per_host.size());
    if (inserted) per_host.emplace_back();
    per_host[it->second].push_back(i);
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t slot = next++; slot < per_host.size(); slot = next++) {
      for (std::size_t i : per_host[slot]) {
        results[i] = fetch_headers(domains[i], config);
      }
    }
  };
  const std::size_t threads =
      std::max<std::size_t>(1, std::min(config.concurrency, per_host.size()));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

void write_captures(const std::filesystem::path& path,
                    std::span<const HeaderCapture> captures) {
  std::string out;
  for (const auto& c : captures) {
    nlohmann::ordered_json j;
    j["domain"] = c.domain;
    j["status"] = c.status.to_string();
    j["keys"] = c.keys;
    j["server_value"] =
        c.server_value ? nlohmann::ordered_json(*c.server_value) : nlohmann::ordered_json(nullptr);
    j["fetched_at"] = c.fetched_at;
    out += j.dump();
    out.push_back('\n');
  }
  detail::write_file(path, out);
}

std::vector<HeaderCapture> read_captures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<HeaderCapture> captures;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      HeaderCapture c;
      c.domain = j.at("domain").get<std::string>();
      c.status = FetchStatus::parse(j.at("status").get<std::string>());
      c.keys = j.value("keys", std::vector<std::string>{});
      if (j.contains("server_value") && !j.at("server_value").is_null()) {
        c.server_value = j.at("server_value").get<std::string>();
      }
      c.fetched_at = j.value("fetched_at", std::string{});
      captures.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, path.string() + ":" +
                                          std::to_string(line_no) + ": " +
                                          e.what());
    }
  }
  return captures;
}

}  // namespace tlsmap
