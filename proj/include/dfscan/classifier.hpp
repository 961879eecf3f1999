#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/scan_engine.hpp"

namespace dfscan {

enum class PruneReason { cert_covers_both, baseline_non_200, baseline_error };

enum class TechniqueStatus { success, failure, not_evaluated };

enum class TechniqueReason {
  exact_length,
  length_tolerance,
  header_order,
  non_200,
  length_mismatch,
  transport_error,
  not_evaluated,
};

std::string_view to_string(PruneReason reason);
std::string_view to_string(TechniqueStatus status);
std::string_view to_string(TechniqueReason reason);
std::optional<PruneReason> parse_prune_reason(std::string_view text);
std::optional<TechniqueStatus> parse_technique_status(std::string_view text);
std::optional<TechniqueReason> parse_technique_reason(std::string_view text);

struct TechniqueResult {
  TechniqueStatus status = TechniqueStatus::not_evaluated;
  TechniqueReason reason = TechniqueReason::not_evaluated;

  bool succeeded() const { return status == TechniqueStatus::success; }
  friend bool operator==(const TechniqueResult&, const TechniqueResult&) = default;
};

struct PairVerdict {
  ScanPair pair;
  bool applicable = false;
  std::optional<PruneReason> prune_reason;
  TechniqueResult fronting;
  TechniqueResult faking;
  TechniqueResult domainless;

  friend bool operator==(const PairVerdict&, const PairVerdict&) = default;
};

/// True iff `domain` is the subject CN, equals a SAN entry, or matches a SAN
/// wildcard whose `*` stands for exactly one leftmost label. Case-insensitive.
bool cert_covers(const CertSummary& cert, std::string_view domain);

/// Apply pruning, then the success rules, to the five outcomes of a pair.
///
/// Pruning (first match wins): a baseline certificate covering both domains,
/// a baseline transport error, a baseline status other than 200.
///
/// A technique scan succeeds when it returned 200 and one of these holds,
/// checked in order:
///   exact length:    len == len(b0) and len != len(b1)
///   tolerance:       |len - len(b0)| <= 5% of len(b0) and
///                    |len - len(b1)| >  20% of len(b1)
///   header order:    header names equal b0's exactly and differ from b1's
///
/// Throws ArgumentError unless each role appears exactly once.
PairVerdict evaluate_pair(const ScanPair& pair, std::span<const ScanOutcome> outcomes);

/// The three technique roles and where their result lives in a verdict.
const TechniqueResult& technique_result(const PairVerdict& verdict, ScanRole role);

}  // namespace dfscan
