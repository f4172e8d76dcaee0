#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tlsmap {

// MurmurHash3, x86 32-bit variant.
std::uint32_t mmh3_32(std::string_view bytes, std::uint32_t seed = 0);

struct FetchStatus {
  enum class Kind { kOk, kTimeout, kTlsError, kConnectError, kHttpError };

  Kind kind = Kind::kOk;
  int http_code = 0;  // meaningful for kOk and kHttpError

  static FetchStatus ok(int code = 200) { return {Kind::kOk, code}; }
  static FetchStatus http_error(int code) { return {Kind::kHttpError, code}; }
  static FetchStatus of(Kind kind) { return {kind, 0}; }

  // "ok", "timeout", "tls_error", "connect_error" or "http_error(301)".
  std::string to_string() const;
  static FetchStatus parse(std::string_view text);

  bool has_headers() const {
    return kind == Kind::kOk || kind == Kind::kHttpError;
  }

  friend bool operator==(const FetchStatus&, const FetchStatus&) = default;
};

struct HeaderCapture {
  std::string domain;
  FetchStatus status;
  std::vector<std::string> keys;  // wire order, original casing, duplicates kept
  std::optional<std::string> server_value;
  std::string fetched_at;  // ISO-8601 UTC

  friend bool operator==(const HeaderCapture&, const HeaderCapture&) = default;
};

struct HeaderFingerprint {
  std::string canonical;
  std::uint32_t hash = 0;

  friend bool operator==(const HeaderFingerprint&,
                         const HeaderFingerprint&) = default;
};

// Keys joined by '\n' in wire order. Server keys render as "<key>: <value>",
// all others bare. Throws Error(kEmptyCapture) when there are no keys.
std::string canonicalize(const HeaderCapture& capture);

// nullopt when the capture carries no headers.
std::optional<HeaderFingerprint> header_fingerprint(
    const HeaderCapture& capture);

struct FetchConfig {
  std::chrono::milliseconds timeout{10'000};
  std::string user_agent = "tlsmap/0.1";
  std::size_t concurrency = 32;
  bool allow_http_fallback = false;
  std::uint16_t https_port = 443;
  std::uint16_t http_port = 80;
  // "host:port" or "http://host:port". Defaults to $HTTPS_PROXY.
  std::optional<std::string> https_proxy;

  static FetchConfig from_environment();
};

// One GET to https://<domain>/ (optionally falling back to plain http when
// the TLS handshake fails). Redirects are not followed. Failures become a
// status value; this never throws for network errors.
HeaderCapture fetch_headers(std::string_view domain, const FetchConfig& config);

// Fetches concurrently, at most `concurrency` in flight and never two at
// once for the same host. Results are in input order.
std::vector<HeaderCapture> fetch_all(std::span<const std::string> domains,
                                     const FetchConfig& config);

// Parses the status line and header block of a raw HTTP/1.x response.
// Exposed for testing the wire-order contract without a socket.
HeaderCapture parse_response_head(std::string_view domain,
                                  std::string_view head);

std::string utc_timestamp();

// JSON-lines capture store, one HeaderCapture per line.
void write_captures(const std::filesystem::path& path,
                    std::span<const HeaderCapture> captures);
std::vector<HeaderCapture> read_captures(const std::filesystem::path& path);

}  // namespace tlsmap
