#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfscan::http {

struct Header {
  std::string name;
  std::string value;

  friend bool operator==(const Header&, const Header&) = default;
};

using HeaderList = std::vector<Header>;

/// Case-insensitive lookup of the first header called `name`.
const std::string* find_header(const HeaderList& headers, std::string_view name);

struct RequestHead {
  std::string method;
  std::string target;
  std::string version;
  HeaderList headers;
};

struct ResponseHead {
  int status = 0;
  std::string reason;
  HeaderList headers;  // wire order, names case-preserved
};

/// Serialize a request head plus the blank line. Headers go out in the order
/// given.
std::string format_request(std::string_view method, std::string_view target,
                           const HeaderList& headers);

std::string format_response(int status, const HeaderList& headers, std::string_view body);

std::string_view reason_phrase(int status);

/// Parse a request head from the start of `data`. Returns nullopt until the
/// terminating blank line is present; throws FormatError on garbage.
/// `consumed` receives the head length including the blank line.
std::optional<RequestHead> parse_request_head(std::string_view data, std::size_t& consumed);

/// Incremental HTTP/1.1 response reader.
///
/// Handles Content-Length, chunked transfer coding and read-until-close
/// framing. Body bytes beyond `max_body` are not kept and set `oversized`.
class ResponseReader {
 public:
  explicit ResponseReader(std::size_t max_body) : max_body_(max_body) {}

  /// Feed bytes; returns true once the message is complete.
  bool feed(std::string_view data);
  /// Signal EOF. Returns true if the message is complete under close framing.
  bool finish();

  bool has_head() const { return head_.has_value(); }
  const ResponseHead& head() const { return *head_; }
  const std::string& body() const { return body_; }
  std::size_t body_length() const { return body_length_; }
  bool oversized() const { return oversized_; }
  bool complete() const { return state_ == State::done; }

 private:
  enum class State { head, fixed, chunk_size, chunk_data, chunk_crlf, trailers, until_close, done };

  void append_body(std::string_view bytes);
  bool step();

  std::size_t max_body_;
  std::string buffer_;
  std::optional<ResponseHead> head_;
  std::string body_;
  std::size_t body_length_ = 0;
  std::size_t remaining_ = 0;
  bool oversized_ = false;
  State state_ = State::head;
};

}  // namespace dfscan::http
