#include "dfscan/asn_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>

#include "dfscan/errors.hpp"

namespace dfscan {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    std::string out;
    s = s.substr(1, s.size() - 2);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"' && i + 1 < s.size() && s[i + 1] == '"') ++i;
      out.push_back(s[i]);
    }
    return out;
  }
  return std::string(s);
}

}  // namespace

AsnTable::AsnTable(std::vector<AsnEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(), [](const AsnEntry& a, const AsnEntry& b) {
    if (a.prefix.length() != b.prefix.length()) return a.prefix.length() > b.prefix.length();
    return a.prefix.network() < b.prefix.network();
  });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].asn == 0) {
      throw ArgumentError("ASN entry with asn 0 for " + entries_[i].prefix.to_string());
    }
    if (i > 0 && entries_[i].prefix == entries_[i - 1].prefix) {
      throw ArgumentError("duplicate ASN prefix " + entries_[i].prefix.to_string());
    }
    if (levels_.empty() || levels_.back().length != entries_[i].prefix.length()) {
      levels_.push_back({entries_[i].prefix.length(), i, i + 1});
    } else {
      levels_.back().end = i + 1;
    }
  }
}

const AsnEntry* AsnTable::lookup(Ipv4Address ip) const {
  for (const auto& level : levels_) {
    const Ipv4Address key(ip.value() & Ipv4Prefix::mask_for(level.length));
    const auto first = entries_.begin() + static_cast<std::ptrdiff_t>(level.begin);
    const auto last = entries_.begin() + static_cast<std::ptrdiff_t>(level.end);
    const auto it = std::lower_bound(first, last, key, [](const AsnEntry& e, Ipv4Address k) {
      return e.prefix.network() < k;
    });
    if (it != last && it->prefix.network() == key) return &*it;
  }
  return nullptr;
}

AsnTable AsnTable::parse_csv(std::istream& in) {
  std::vector<AsnEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (!text.starts_with("prefix")) {
        throw FormatError("ASN CSV: expected header 'prefix,asn,name'");
      }
      continue;
    }
    const auto c1 = text.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(',', c1 + 1);
    if (c2 == std::string_view::npos) {
      throw FormatError("ASN CSV line " + std::to_string(line_no) + ": expected 3 columns");
    }
    auto prefix = Ipv4Prefix::parse(trim(text.substr(0, c1)));
    const auto asn_text = trim(text.substr(c1 + 1, c2 - c1 - 1));
    std::uint32_t asn = 0;
    auto [ptr, ec] = std::from_chars(asn_text.data(), asn_text.data() + asn_text.size(), asn);
    if (!prefix || ec != std::errc{} || ptr != asn_text.data() + asn_text.size()) {
      throw FormatError("ASN CSV line " + std::to_string(line_no) + ": bad prefix or asn");
    }
    entries.push_back({*prefix, asn, unquote(text.substr(c2 + 1))});
  }
  if (in.bad()) throw IoError("read error while parsing ASN CSV");
  return AsnTable(std::move(entries));
}

AsnTable AsnTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ASN database: " + path.string());
  return parse_csv(in);
}

}  // namespace dfscan
