#include "dfscan/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dfscan/errors.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan {
namespace {

double pct_of(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(std::string_view value) {
  std::string out;
  for (char c : value) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string prune_summary(const SuppressedGroup& s) {
  std::string out;
  for (const auto& [reason, count] : s.prune_counts) {
    if (!out.empty()) out += ", ";
    out += std::string(to_string(reason)) + ": " + std::to_string(count);
  }
  return out;
}

}  // namespace

std::string_view to_string(ColorBand band) {
  switch (band) {
    case ColorBand::green: return "GREEN";
    case ColorBand::yellow: return "YELLOW";
    case ColorBand::red: return "RED";
  }
  return "?";
}

ColorBand color_band(double pct) {
  if (pct < 5.0) return ColorBand::green;
  if (pct >= 95.0) return ColorBand::red;
  return ColorBand::yellow;
}

std::string format_pct(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", pct);
  return buf;
}

AggregateResult aggregate(std::span<const PairVerdict> verdicts, const GroupKey& key) {
  std::size_t applicable = 0;
  std::size_t fronting = 0;
  std::size_t faking = 0;
  std::size_t domainless = 0;
  std::set<std::string> domains;
  SuppressedGroup suppressed{key, 0, {}};
  for (const auto& v : verdicts) {
    if (v.pair.group != key) {
      throw ArgumentError("aggregate: verdict from group '" + v.pair.group.value +
                          "' passed for group '" + key.value + "'");
    }
    ++suppressed.verdicts;
    if (!v.applicable) {
      if (v.prune_reason) ++suppressed.prune_counts[*v.prune_reason];
      continue;
    }
    ++applicable;
    domains.insert(v.pair.target.domain);
    fronting += v.fronting.succeeded() ? 1 : 0;
    faking += v.faking.succeeded() ? 1 : 0;
    domainless += v.domainless.succeeded() ? 1 : 0;
  }
  AggregateResult result;
  if (applicable == 0) {
    result.suppressed = std::move(suppressed);
    return result;
  }
  GroupReport r;
  r.key = key;
  r.observed_domains = domains.size();
  r.applicable_pairs = applicable;
  r.fronting_pct = pct_of(fronting, applicable);
  r.faking_pct = pct_of(faking, applicable);
  r.domainless_pct = pct_of(domainless, applicable);
  r.fronting_color = color_band(r.fronting_pct);
  r.faking_color = color_band(r.faking_pct);
  r.domainless_color = color_band(r.domainless_pct);
  result.report = std::move(r);
  return result;
}

ReportTable aggregate_all(std::span<const PairVerdict> verdicts) {
  std::map<GroupKey, std::vector<PairVerdict>> groups;
  for (const auto& v : verdicts) groups[v.pair.group].push_back(v);
  ReportTable table;
  for (const auto& [key, members] : groups) {
    auto result = aggregate(members, key);
    if (result.report) table.rows.push_back(std::move(*result.report));
    if (result.suppressed) table.suppressed.push_back(std::move(*result.suppressed));
  }
  return table;
}

PopularityEstimate popularity_estimate(std::span<const std::string> popularity,
                                       const std::map<std::string, std::string>& cname_map,
                                       const std::map<std::string, double>& support) {
  if (popularity.empty()) throw ArgumentError("popularity_estimate: empty popularity list");
  for (const auto& [canonical, pct] : support) {
    if (!(pct >= 0.0 && pct <= 100.0)) {
      throw ArgumentError("support for " + canonical + " outside [0,100]");
    }
  }
  PopularityEstimate est;
  est.total_domains = popularity.size();
  double frontable = 0.0;
  for (const auto& domain : popularity) {
    const auto mapped = cname_map.find(normalize_fqdn(domain));
    if (mapped == cname_map.end()) continue;
    ++est.cname_mapped;
    const auto s = support.find(mapped->second);
    if (s == support.end()) continue;
    ++est.tracked;
    frontable += s->second / 100.0;
  }
  est.frontable_tracked_pct = est.tracked == 0 ? 0.0 : 100.0 * frontable / static_cast<double>(est.tracked);
  est.frontable_total_pct = 100.0 * frontable / static_cast<double>(est.total_domains);
  return est;
}

std::vector<std::string> parse_popularity_csv(std::istream& in) {
  std::vector<std::pair<long long, std::string>> ranked;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("popularity CSV line " + std::to_string(line_no) + ": expected rank,domain");
    const auto rank_text = line.substr(0, comma);
    if (line_no == 1 && rank_text == "rank") continue;
    long long rank = 0;
    try {
      std::size_t used = 0;
      rank = std::stoll(rank_text, &used);
      if (used != rank_text.size()) throw std::invalid_argument("rank");
    } catch (const std::exception&) {
      throw FormatError("popularity CSV line " + std::to_string(line_no) + ": bad rank");
    }
    ranked.emplace_back(rank, normalize_fqdn(line.substr(comma + 1)));
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::string> domains;
  domains.reserve(ranked.size());
  for (auto& [rank, domain] : ranked) domains.push_back(std::move(domain));
  return domains;
}

std::vector<std::string> load_popularity_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open popularity list: " + path.string());
  return parse_popularity_csv(in);
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
  if (text == "markdown" || text == "md" || text == "MARKDOWN") return ReportFormat::markdown;
  if (text == "csv" || text == "CSV") return ReportFormat::csv;
  if (text == "json" || text == "JSON") return ReportFormat::json;
  return std::nullopt;
}

std::string render(std::span<const GroupReport> reports, ReportFormat format) {
  ReportTable table;
  table.rows.assign(reports.begin(), reports.end());
  return render(table, format);
}

std::string render(const ReportTable& input, ReportFormat format) {
  ReportTable table = input;
  std::sort(table.rows.begin(), table.rows.end(),
            [](const GroupReport& a, const GroupReport& b) { return a.key < b.key; });
  std::sort(table.suppressed.begin(), table.suppressed.end(),
            [](const SuppressedGroup& a, const SuppressedGroup& b) { return a.key < b.key; });
  std::ostringstream out;

  switch (format) {
    case ReportFormat::markdown: {
      out << "| Grouping | Group | Observed Domains | Applicable Pairs | Domain Fronting | "
             "Domain Faking | Domainless Fronting |\n";
      out << "|---|---|---:|---:|---:|---:|---:|\n";
      for (const auto& r : table.rows) {
        out << "| " << to_string(r.key.kind) << " | " << md_cell(r.key.value) << " | "
            << r.observed_domains << " | " << r.applicable_pairs << " | "
            << format_pct(r.fronting_pct) << "% " << to_string(r.fronting_color) << " | "
            << format_pct(r.faking_pct) << "% " << to_string(r.faking_color) << " | "
            << format_pct(r.domainless_pct) << "% " << to_string(r.domainless_color) << " |\n";
      }
      out << "\nLegend: GREEN < 5%, YELLOW >= 5% and < 95%, RED >= 95%. "
             "Percentages are over applicable (non-pruned) pairs.\n";
      if (!table.suppressed.empty()) {
        out << "\nSuppressed groups (no applicable pairs):\n";
        for (const auto& s : table.suppressed) {
          out << "- " << to_string(s.key.kind) << " " << s.key.value << ": " << s.verdicts
              << " verdicts pruned (" << prune_summary(s) << ")\n";
        }
      }
      break;
    }
    case ReportFormat::csv: {
      out << "kind,group,observed_domains,applicable_pairs,fronting_pct,fronting_band,"
             "faking_pct,faking_band,domainless_pct,domainless_band\n";
      for (const auto& r : table.rows) {
        out << to_string(r.key.kind) << ',' << csv_field(r.key.value) << ',' << r.observed_domains
            << ',' << r.applicable_pairs << ',' << format_pct(r.fronting_pct) << ','
            << to_string(r.fronting_color) << ',' << format_pct(r.faking_pct) << ','
            << to_string(r.faking_color) << ',' << format_pct(r.domainless_pct) << ','
            << to_string(r.domainless_color) << '\n';
      }
      for (const auto& s : table.suppressed) {
        out << to_string(s.key.kind) << ',' << csv_field(s.key.value)
            << ",0,0,,SUPPRESSED,,SUPPRESSED,,SUPPRESSED\n";
      }
      break;
    }
    case ReportFormat::json: {
      nlohmann::ordered_json doc;
      doc["groups"] = nlohmann::ordered_json::array();
      for (const auto& r : table.rows) {
        nlohmann::ordered_json row;
        row["kind"] = to_string(r.key.kind);
        row["group"] = r.key.value;
        row["observed_domains"] = r.observed_domains;
        row["applicable_pairs"] = r.applicable_pairs;
        row["fronting_pct"] = r.fronting_pct;
        row["fronting_band"] = to_string(r.fronting_color);
        row["faking_pct"] = r.faking_pct;
        row["faking_band"] = to_string(r.faking_color);
        row["domainless_pct"] = r.domainless_pct;
        row["domainless_band"] = to_string(r.domainless_color);
        doc["groups"].push_back(std::move(row));
      }
      doc["suppressed"] = nlohmann::ordered_json::array();
      for (const auto& s : table.suppressed) {
        nlohmann::ordered_json row;
        row["kind"] = to_string(s.key.kind);
        row["group"] = s.key.value;
        row["verdicts"] = s.verdicts;
        nlohmann::ordered_json reasons = nlohmann::ordered_json::object();
        for (const auto& [reason, count] : s.prune_counts) reasons[std::string(to_string(reason))] = count;
        row["prune_counts"] = std::move(reasons);
        doc["suppressed"].push_back(std::move(row));
      }
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

std::string render(const PopularityEstimate& est, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::markdown:
      out << "| Total Domains | CNAME Mapped | Tracked | Frontable (tracked) | Frontable (total) |\n"
          << "|---:|---:|---:|---:|---:|\n"
          << "| " << est.total_domains << " | " << est.cname_mapped << " | " << est.tracked << " | "
          << format_pct(est.frontable_tracked_pct) << "% | " << format_pct(est.frontable_total_pct)
          << "% |\n\nPoint estimate: each tracked domain weighted by its canonical domain's "
             "fronting support.\n";
      break;
    case ReportFormat::csv:
      out << "total_domains,cname_mapped,tracked,frontable_tracked_pct,frontable_total_pct,estimate\n"
          << est.total_domains << ',' << est.cname_mapped << ',' << est.tracked << ','
          << format_pct(est.frontable_tracked_pct) << ',' << format_pct(est.frontable_total_pct)
          << ",point\n";
      break;
    case ReportFormat::json: {
      nlohmann::ordered_json doc;
      doc["total_domains"] = est.total_domains;
      doc["cname_mapped"] = est.cname_mapped;
      doc["tracked"] = est.tracked;
      doc["frontable_tracked_pct"] = est.frontable_tracked_pct;
      doc["frontable_total_pct"] = est.frontable_total_pct;
      doc["estimate"] = "point";
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace dfscan
