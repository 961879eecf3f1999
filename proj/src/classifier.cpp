#include "dfscan/classifier.hpp"

#include <array>

#include "dfscan/errors.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan {
namespace {

// |a - b| for sizes without wrap-around.
std::size_t distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

TechniqueResult judge(const ScanOutcome& scan, const ScanOutcome& b0, const ScanOutcome& b1) {
  using S = TechniqueStatus;
  using R = TechniqueReason;
  if (scan.transport_error || !scan.status_code) return {S::failure, R::transport_error};
  if (*scan.status_code != 200) return {S::failure, R::non_200};

  const std::size_t len = scan.content_length;
  const std::size_t len0 = b0.content_length;
  const std::size_t len1 = b1.content_length;
  if (len == len0 && len != len1) return {S::success, R::exact_length};

  // 5% and 20% bands compared in integers: d <= 0.05*b0  <=>  20*d <= b0.
  const bool near_b0 = 20 * distance(len, len0) <= len0;
  const bool far_from_b1 = 5 * distance(len, len1) > len1;
  if (near_b0 && far_from_b1) return {S::success, R::length_tolerance};

  if (scan.header_names == b0.header_names && scan.header_names != b1.header_names) {
    return {S::success, R::header_order};
  }
  return {S::failure, R::length_mismatch};
}

}  // namespace

std::string_view to_string(PruneReason reason) {
  switch (reason) {
    case PruneReason::cert_covers_both: return "CERT_COVERS_BOTH";
    case PruneReason::baseline_non_200: return "BASELINE_NON_200";
    case PruneReason::baseline_error: return "BASELINE_ERROR";
  }
  return "?";
}

std::string_view to_string(TechniqueStatus status) {
  switch (status) {
    case TechniqueStatus::success: return "SUCCESS";
    case TechniqueStatus::failure: return "FAILURE";
    case TechniqueStatus::not_evaluated: return "NOT_EVALUATED";
  }
  return "?";
}

std::string_view to_string(TechniqueReason reason) {
  switch (reason) {
    case TechniqueReason::exact_length: return "EXACT_LENGTH";
    case TechniqueReason::length_tolerance: return "LENGTH_TOLERANCE";
    case TechniqueReason::header_order: return "HEADER_ORDER";
    case TechniqueReason::non_200: return "NON_200";
    case TechniqueReason::length_mismatch: return "LENGTH_MISMATCH";
    case TechniqueReason::transport_error: return "TRANSPORT_ERROR";
    case TechniqueReason::not_evaluated: return "NOT_EVALUATED";
  }
  return "?";
}

std::optional<PruneReason> parse_prune_reason(std::string_view text) {
  for (auto r : {PruneReason::cert_covers_both, PruneReason::baseline_non_200,
                 PruneReason::baseline_error}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::optional<TechniqueStatus> parse_technique_status(std::string_view text) {
  for (auto s : {TechniqueStatus::success, TechniqueStatus::failure, TechniqueStatus::not_evaluated}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<TechniqueReason> parse_technique_reason(std::string_view text) {
  for (auto r : {TechniqueReason::exact_length, TechniqueReason::length_tolerance,
                 TechniqueReason::header_order, TechniqueReason::non_200,
                 TechniqueReason::length_mismatch, TechniqueReason::transport_error,
                 TechniqueReason::not_evaluated}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

bool cert_covers(const CertSummary& cert, std::string_view domain) {
  const auto name = normalize_fqdn(domain);
  if (name.empty()) return false;
  if (cert.subject_common_name && normalize_fqdn(*cert.subject_common_name) == name) return true;
  for (const auto& entry : cert.san_dns_names) {
    const auto pattern = normalize_fqdn(entry);
    if (pattern == name) return true;
    if (pattern.starts_with("*.")) {
      const auto dot = name.find('.');
      // The wildcard must stand for exactly one non-empty label.
      if (dot != std::string::npos && dot > 0 &&
          std::string_view(name).substr(dot) == std::string_view(pattern).substr(1)) {
        return true;
      }
    }
  }
  return false;
}

PairVerdict evaluate_pair(const ScanPair& pair, std::span<const ScanOutcome> outcomes) {
  std::array<const ScanOutcome*, 5> by_role{};
  for (const auto& o : outcomes) {
    auto& slot = by_role[static_cast<std::size_t>(o.spec.role)];
    if (slot != nullptr) throw ArgumentError("duplicate outcome for role " + std::string(to_string(o.spec.role)));
    slot = &o;
  }
  for (ScanRole role : kAllRoles) {
    if (by_role[static_cast<std::size_t>(role)] == nullptr) {
      throw ArgumentError("missing outcome for role " + std::string(to_string(role)));
    }
  }
  const ScanOutcome& b0 = *by_role[0];
  const ScanOutcome& b1 = *by_role[1];

  PairVerdict verdict;
  verdict.pair = pair;
  auto covers_both = [&](const ScanOutcome& b) {
    return b.leaf_cert && cert_covers(*b.leaf_cert, pair.target.domain) &&
           cert_covers(*b.leaf_cert, pair.front.domain);
  };
  if (covers_both(b0) || covers_both(b1)) {
    verdict.prune_reason = PruneReason::cert_covers_both;
  } else if (b0.transport_error || b1.transport_error || !b0.status_code || !b1.status_code) {
    verdict.prune_reason = PruneReason::baseline_error;
  } else if (*b0.status_code != 200 || *b1.status_code != 200) {
    verdict.prune_reason = PruneReason::baseline_non_200;
  }
  if (verdict.prune_reason) return verdict;

  verdict.applicable = true;
  verdict.fronting = judge(*by_role[static_cast<std::size_t>(ScanRole::fronting)], b0, b1);
  verdict.faking = judge(*by_role[static_cast<std::size_t>(ScanRole::faking)], b0, b1);
  verdict.domainless = judge(*by_role[static_cast<std::size_t>(ScanRole::domainless)], b0, b1);
  return verdict;
}

const TechniqueResult& technique_result(const PairVerdict& verdict, ScanRole role) {
  switch (role) {
    case ScanRole::fronting: return verdict.fronting;
    case ScanRole::faking: return verdict.faking;
    case ScanRole::domainless: return verdict.domainless;
    default: throw ArgumentError("baselines have no technique result");
  }
}

}  // namespace dfscan
