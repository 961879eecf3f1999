#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/classifier.hpp"

namespace dfscan {

enum class ColorBand { green, yellow, red };

std::string_view to_string(ColorBand band);

/// Green below 5%, red at or above 95%, yellow in between.
ColorBand color_band(double pct);

struct GroupReport {
  GroupKey key;
  std::size_t observed_domains = 0;
  std::size_t applicable_pairs = 0;
  double fronting_pct = 0;
  double faking_pct = 0;
  double domainless_pct = 0;
  ColorBand fronting_color = ColorBand::green;
  ColorBand faking_color = ColorBand::green;
  ColorBand domainless_color = ColorBand::green;

  friend bool operator==(const GroupReport&, const GroupReport&) = default;
};

/// A group whose every verdict was pruned, with how many fell to each reason.
struct SuppressedGroup {
  GroupKey key;
  std::size_t verdicts = 0;
  std::map<PruneReason, std::size_t> prune_counts;

  friend bool operator==(const SuppressedGroup&, const SuppressedGroup&) = default;
};

struct AggregateResult {
  std::optional<GroupReport> report;
  std::optional<SuppressedGroup> suppressed;
};

/// Support percentages over applicable verdicts. Every verdict must carry
/// `key` (ArgumentError otherwise). With no applicable verdicts the row is
/// suppressed instead.
AggregateResult aggregate(std::span<const PairVerdict> verdicts, const GroupKey& key);

struct ReportTable {
  std::vector<GroupReport> rows;
  std::vector<SuppressedGroup> suppressed;
};

/// Partition verdicts by group and aggregate each, sorted by key.
ReportTable aggregate_all(std::span<const PairVerdict> verdicts);

struct PopularityEstimate {
  std::size_t total_domains = 0;
  std::size_t cname_mapped = 0;
  std::size_t tracked = 0;
  double frontable_tracked_pct = 0;
  double frontable_total_pct = 0;
};

/// Point estimate of how many popular domains can serve as a front: each
/// tracked domain contributes its canonical domain's fronting support as a
/// probability weight. ArgumentError on an empty list or support outside
/// [0, 100].
PopularityEstimate popularity_estimate(std::span<const std::string> popularity,
                                       const std::map<std::string, std::string>& cname_map,
                                       const std::map<std::string, double>& support);

/// `rank,domain` CSV (Umbrella style), header optional. Domains in rank order.
std::vector<std::string> parse_popularity_csv(std::istream& in);
std::vector<std::string> load_popularity_csv(const std::filesystem::path& path);

enum class ReportFormat { markdown, csv, json };
std::optional<ReportFormat> parse_report_format(std::string_view text);

std::string render(const ReportTable& table, ReportFormat format);
std::string render(std::span<const GroupReport> reports, ReportFormat format);
std::string render(const PopularityEstimate& estimate, ReportFormat format);

/// Two-decimal percentage as printed in reports ("62.62").
std::string format_pct(double pct);

}  // namespace dfscan
