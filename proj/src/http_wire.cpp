#include "dfscan/http_wire.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "dfscan/errors.hpp"

namespace dfscan::http {
namespace {

constexpr std::size_t kMaxHeadBytes = 64 * 1024;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           auto lower = [](char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : c; };
           return lower(x) == lower(y);
         });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Splits the header block (lines after the start line) into a HeaderList.
HeaderList parse_header_lines(std::string_view block) {
  HeaderList headers;
  while (!block.empty()) {
    const auto eol = block.find("\r\n");
    const auto line = block.substr(0, eol);
    block = eol == std::string_view::npos ? std::string_view{} : block.substr(eol + 2);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw FormatError("malformed HTTP header line");
    }
    const auto name = line.substr(0, colon);
    if (name.find_first_of(" \t") != std::string_view::npos) {
      throw FormatError("whitespace in HTTP header name");
    }
    headers.push_back({std::string(name), std::string(trim(line.substr(colon + 1)))});
  }
  return headers;
}

bool chunked(const HeaderList& headers) {
  const auto* te = find_header(headers, "Transfer-Encoding");
  if (te == nullptr) return false;
  std::string lower(*te);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.find("chunked") != std::string::npos;
}

}  // namespace

const std::string* find_header(const HeaderList& headers, std::string_view name) {
  for (const auto& h : headers) {
    if (iequals(h.name, name)) return &h.value;
  }
  return nullptr;
}

std::string format_request(std::string_view method, std::string_view target,
                           const HeaderList& headers) {
  std::string out;
  out.append(method).append(" ").append(target).append(" HTTP/1.1\r\n");
  for (const auto& h : headers) out.append(h.name).append(": ").append(h.value).append("\r\n");
  out.append("\r\n");
  return out;
}

std::string_view reason_phrase(int status) {
  switch (status) {
    case 200: return "OK";
    case 301: return "Moved Permanently";
    case 302: return "Found";
    case 400: return "Bad Request";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 421: return "Misdirected Request";
    case 429: return "Too Many Requests";
    case 500: return "Internal Server Error";
    case 502: return "Bad Gateway";
    case 503: return "Service Unavailable";
    default: return "Status";
  }
}

std::string format_response(int status, const HeaderList& headers, std::string_view body) {
  std::string out = "HTTP/1.1 " + std::to_string(status) + " " + std::string(reason_phrase(status)) + "\r\n";
  for (const auto& h : headers) out.append(h.name).append(": ").append(h.value).append("\r\n");
  out.append("\r\n");
  out.append(body);
  return out;
}

std::optional<RequestHead> parse_request_head(std::string_view data, std::size_t& consumed) {
  const auto end = data.find("\r\n\r\n");
  if (end == std::string_view::npos) {
    if (data.size() > kMaxHeadBytes) throw FormatError("request head too large");
    return std::nullopt;
  }
  consumed = end + 4;
  const auto head = data.substr(0, end + 2);
  const auto eol = head.find("\r\n");
  const auto start = head.substr(0, eol);
  const auto sp1 = start.find(' ');
  const auto sp2 = sp1 == std::string_view::npos ? sp1 : start.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos) throw FormatError("malformed request line");
  RequestHead req;
  req.method = std::string(start.substr(0, sp1));
  req.target = std::string(start.substr(sp1 + 1, sp2 - sp1 - 1));
  req.version = std::string(start.substr(sp2 + 1));
  if (!req.version.starts_with("HTTP/1.")) throw FormatError("unsupported HTTP version");
  req.headers = parse_header_lines(head.substr(eol + 2));
  return req;
}

void ResponseReader::append_body(std::string_view bytes) {
  if (body_length_ + bytes.size() > max_body_) {
    const std::size_t room = max_body_ - body_length_;
    body_.append(bytes.substr(0, room));
    body_length_ += room;
    oversized_ = true;
    state_ = State::done;
    return;
  }
  body_.append(bytes);
  body_length_ += bytes.size();
}

bool ResponseReader::feed(std::string_view data) {
  if (state_ == State::done) return true;
  buffer_.append(data);
  while (state_ != State::done && step()) {
  }
  return state_ == State::done;
}

bool ResponseReader::finish() {
  if (state_ == State::until_close) {
    state_ = State::done;
  }
  return state_ == State::done;
}

// Advances the state machine by one unit; false when more input is needed.
bool ResponseReader::step() {
  switch (state_) {
    case State::head: {
      const auto end = buffer_.find("\r\n\r\n");
      if (end == std::string::npos) {
        if (buffer_.size() > kMaxHeadBytes) throw FormatError("response head too large");
        return false;
      }
      std::string_view head(buffer_.data(), end + 2);
      const auto eol = head.find("\r\n");
      const auto status_line = head.substr(0, eol);
      if (!status_line.starts_with("HTTP/1.") || status_line.size() < 12) {
        throw FormatError("malformed status line");
      }
      ResponseHead parsed;
      const auto code = status_line.substr(9, 3);
      auto [ptr, ec] = std::from_chars(code.data(), code.data() + code.size(), parsed.status);
      if (ec != std::errc{} || ptr != code.data() + 3 || parsed.status < 100 || parsed.status > 599) {
        throw FormatError("malformed status code");
      }
      parsed.reason = status_line.size() > 13 ? std::string(status_line.substr(13)) : std::string{};
      parsed.headers = parse_header_lines(head.substr(eol + 2));
      head_ = std::move(parsed);
      buffer_.erase(0, end + 4);

      const int s = head_->status;
      if (s < 200 || s == 204 || s == 304) {
        if (s < 200) {
          // Interim response: discard and parse the next head.
          head_.reset();
          return true;
        }
        state_ = State::done;
      } else if (chunked(head_->headers)) {
        state_ = State::chunk_size;
      } else if (const auto* cl = find_header(head_->headers, "Content-Length")) {
        std::size_t len = 0;
        auto [p, e] = std::from_chars(cl->data(), cl->data() + cl->size(), len);
        if (e != std::errc{} || p != cl->data() + cl->size()) throw FormatError("bad Content-Length");
        remaining_ = len;
        state_ = len == 0 ? State::done : State::fixed;
      } else {
        state_ = State::until_close;
      }
      return true;
    }
    case State::fixed: {
      if (buffer_.empty()) return false;
      const std::size_t take = std::min(remaining_, buffer_.size());
      append_body(std::string_view(buffer_).substr(0, take));
      buffer_.erase(0, take);
      remaining_ -= take;
      if (state_ != State::done && remaining_ == 0) state_ = State::done;
      return true;
    }
    case State::chunk_size: {
      const auto eol = buffer_.find("\r\n");
      if (eol == std::string::npos) return false;
      std::string_view line(buffer_.data(), eol);
      line = line.substr(0, line.find(';'));
      line = trim(line);
      std::size_t size = 0;
      auto [p, e] = std::from_chars(line.data(), line.data() + line.size(), size, 16);
      if (e != std::errc{} || line.empty()) throw FormatError("bad chunk size");
      buffer_.erase(0, eol + 2);
      remaining_ = size;
      state_ = size == 0 ? State::trailers : State::chunk_data;
      return true;
    }
    case State::chunk_data: {
      if (buffer_.empty()) return false;
      const std::size_t take = std::min(remaining_, buffer_.size());
      append_body(std::string_view(buffer_).substr(0, take));
      buffer_.erase(0, take);
      remaining_ -= take;
      if (state_ != State::done && remaining_ == 0) state_ = State::chunk_crlf;
      return true;
    }
    case State::chunk_crlf: {
      if (buffer_.size() < 2) return false;
      if (buffer_.compare(0, 2, "\r\n") != 0) throw FormatError("missing CRLF after chunk");
      buffer_.erase(0, 2);
      state_ = State::chunk_size;
      return true;
    }
    case State::trailers: {
      const auto eol = buffer_.find("\r\n");
      if (eol == std::string::npos) return false;
      buffer_.erase(0, eol + 2);
      if (eol == 0) state_ = State::done;
      return true;
    }
    case State::until_close: {
      if (buffer_.empty()) return false;
      append_body(buffer_);
      buffer_.clear();
      return true;
    }
    case State::done:
      return false;
  }
  return false;
}

}  // namespace dfscan::http
