#include "dfscan/public_suffix.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "dfscan/errors.hpp"

namespace dfscan {
namespace detail {
extern const std::string_view kPublicSuffixSnapshot;
}

namespace {

std::vector<std::string_view> split_labels(std::string_view name) {
  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto dot = name.find('.', start);
    const auto end = dot == std::string_view::npos ? name.size() : dot;
    labels.push_back(name.substr(start, end - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Suffix of `name` consisting of its last `count` labels.
std::string_view last_labels(std::string_view name, std::size_t count) {
  std::size_t pos = name.size();
  for (std::size_t i = 0; i < count; ++i) {
    const auto dot = name.rfind('.', pos == 0 ? 0 : pos - 1);
    if (dot == std::string_view::npos || pos == 0) return name;
    pos = dot;
  }
  return name.substr(pos + 1);
}

}  // namespace

std::string normalize_fqdn(std::string_view name) {
  if (!name.empty() && name.back() == '.') name.remove_suffix(1);
  std::string out(name);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  });
  return out;
}

const PublicSuffixList& PublicSuffixList::bundled() {
  static const PublicSuffixList list = [] {
    std::istringstream in{std::string(detail::kPublicSuffixSnapshot)};
    return parse(in);
  }();
  return list;
}

PublicSuffixList PublicSuffixList::parse(std::istream& in) {
  PublicSuffixList list;
  std::string line;
  while (std::getline(in, line)) {
    auto rule = trim(line);
    if (rule.starts_with("// ===BEGIN PRIVATE DOMAINS===")) break;
    if (rule.empty() || rule.starts_with("//")) continue;
    // Rules end at the first whitespace.
    rule = rule.substr(0, rule.find_first_of(" \t"));
    list.add_rule(rule);
  }
  return list;
}

PublicSuffixList PublicSuffixList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open public suffix list: " + path.string());
  return parse(in);
}

void PublicSuffixList::add_rule(std::string_view rule) {
  const auto normalized = normalize_fqdn(rule);
  std::string_view r = normalized;
  if (r.starts_with('!')) {
    exception_.emplace(r.substr(1));
  } else if (r.starts_with("*.")) {
    wildcard_.emplace(r.substr(2));
  } else {
    exact_.emplace(r);
  }
}

std::size_t PublicSuffixList::suffix_label_count(std::string_view fqdn) const {
  const auto labels = split_labels(fqdn);
  const std::size_t n = labels.size();
  std::size_t best = 1;
  // Walk suffixes from longest to shortest; the first exception wins outright.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t count = n - i;
    const auto suffix = last_labels(fqdn, count);
    if (exception_.contains(std::string(suffix))) return count - 1;
    if (count > best) {
      if (exact_.contains(std::string(suffix))) {
        best = count;
      } else if (count >= 2 && wildcard_.contains(std::string(last_labels(fqdn, count - 1)))) {
        best = count;
      }
    }
  }
  return best;
}

bool PublicSuffixList::is_public_suffix(std::string_view fqdn) const {
  return suffix_label_count(fqdn) >= split_labels(fqdn).size();
}

std::string PublicSuffixList::registrable_domain(std::string_view fqdn) const {
  const auto name = normalize_fqdn(fqdn);
  if (name.empty()) throw ArgumentError("registrable_domain: empty domain name");
  const std::size_t n = split_labels(name).size();
  const std::size_t suffix = suffix_label_count(name);
  if (suffix >= n) return std::string(last_labels(name, 2));
  return std::string(last_labels(name, suffix + 1));
}

std::string registrable_domain(std::string_view fqdn, const PublicSuffixList& suffixes) {
  return suffixes.registrable_domain(fqdn);
}

}  // namespace dfscan
