#include <gtest/gtest.h>

#include <random>

#include "dfscan/classifier.hpp"
#include "dfscan/errors.hpp"
#include "support/classifier_oracle.hpp"
#include "support/test_support.hpp"

using namespace dfscan;
using dfscan::testing::outcome;

namespace {

const ScanPair kPair = dfscan::testing::make_pair("target.example", "192.0.2.1", "front.example", "192.0.2.2");

std::vector<ScanOutcome> five(std::size_t b0_len, std::size_t b1_len, ScanOutcome technique) {
  std::vector<ScanOutcome> out{outcome(ScanRole::baseline_0, 200, b0_len),
                               outcome(ScanRole::baseline_1, 200, b1_len, {"Server", "X-Cache", "Content-Length"}),
                               technique, technique, technique};
  out[2].spec.role = ScanRole::fronting;
  out[3].spec.role = ScanRole::faking;
  out[4].spec.role = ScanRole::domainless;
  return out;
}

TechniqueResult fronting_of(const std::vector<ScanOutcome>& outcomes) {
  return evaluate_pair(kPair, outcomes).fronting;
}

}  // namespace

TEST(CertCovers, Examples) {
  CertSummary s3{std::nullopt, {"*.s3.amazonaws.com", "s3.amazonaws.com"}};
  EXPECT_TRUE(cert_covers(s3, "bucket.s3.amazonaws.com"));
  EXPECT_FALSE(cert_covers(s3, "a.b.s3.amazonaws.com"));
  EXPECT_TRUE(cert_covers(s3, "s3.amazonaws.com"));
  EXPECT_TRUE(cert_covers({std::nullopt, {"example.com"}}, "example.com"));
  EXPECT_TRUE(cert_covers({"Example.COM", {}}, "example.com"));
  EXPECT_FALSE(cert_covers({std::nullopt, {"*.example.com"}}, "example.com"));
  EXPECT_FALSE(cert_covers({std::nullopt, {}}, "example.com"));
}

TEST(EvaluatePair, ExactLength) {
  auto r = fronting_of(five(1000, 500, outcome(ScanRole::fronting, 200, 1000, {"Other"})));
  EXPECT_EQ(r, (TechniqueResult{TechniqueStatus::success, TechniqueReason::exact_length}));
}

TEST(EvaluatePair, WithinToleranceOfB0AndOutsideB1Band) {
  auto r = fronting_of(five(1000, 500, outcome(ScanRole::fronting, 200, 1040, {"Other"})));
  EXPECT_EQ(r, (TechniqueResult{TechniqueStatus::success, TechniqueReason::length_tolerance}));
}

TEST(EvaluatePair, CloseBaselinesBlockTolerance) {
  auto outcomes = five(1000, 980, outcome(ScanRole::faking, 200, 990, {"Other"}));
  auto v = evaluate_pair(kPair, outcomes);
  EXPECT_EQ(v.faking, (TechniqueResult{TechniqueStatus::failure, TechniqueReason::length_mismatch}));
}

TEST(EvaluatePair, HeaderOrderRescuesDynamicLength) {
  auto r = fronting_of(five(1000, 980, outcome(ScanRole::fronting, 200, 990)));
  EXPECT_EQ(r, (TechniqueResult{TechniqueStatus::success, TechniqueReason::header_order}));
}

TEST(EvaluatePair, Misdirected) {
  auto r = fronting_of(five(1000, 500, outcome(ScanRole::fronting, 421, 1000)));
  EXPECT_EQ(r, (TechniqueResult{TechniqueStatus::failure, TechniqueReason::non_200}));
}

TEST(EvaluatePair, TransportError) {
  auto r = fronting_of(five(1000, 500, outcome(ScanRole::fronting, std::nullopt, 0)));
  EXPECT_EQ(r, (TechniqueResult{TechniqueStatus::failure, TechniqueReason::transport_error}));
}

TEST(EvaluatePair, CertCoveringBothPrunes) {
  auto outcomes = five(1000, 500, outcome(ScanRole::fronting, 200, 1000));
  outcomes[0].leaf_cert = CertSummary{"target.example", {"target.example", "front.example"}};
  auto v = evaluate_pair(kPair, outcomes);
  EXPECT_FALSE(v.applicable);
  EXPECT_EQ(v.prune_reason, PruneReason::cert_covers_both);
  EXPECT_EQ(v.fronting.status, TechniqueStatus::not_evaluated);
}

TEST(EvaluatePair, PruneOrder) {
  auto outcomes = five(1000, 500, outcome(ScanRole::fronting, 200, 1000));
  outcomes[0] = outcome(ScanRole::baseline_0, std::nullopt, 0);
  outcomes[1] = outcome(ScanRole::baseline_1, 403, 10);
  EXPECT_EQ(evaluate_pair(kPair, outcomes).prune_reason, PruneReason::baseline_error);
  outcomes[1].leaf_cert = CertSummary{std::nullopt, {"*.example"}};
  EXPECT_EQ(evaluate_pair(kPair, outcomes).prune_reason, PruneReason::cert_covers_both);
  outcomes[1].leaf_cert.reset();
  outcomes[0] = outcome(ScanRole::baseline_0, 200, 1000);
  EXPECT_EQ(evaluate_pair(kPair, outcomes).prune_reason, PruneReason::baseline_non_200);
}

TEST(EvaluatePair, RolesMustBeCompleteAndUnique) {
  auto outcomes = five(1000, 500, outcome(ScanRole::fronting, 200, 1000));
  auto missing = outcomes;
  missing.pop_back();
  EXPECT_THROW(evaluate_pair(kPair, missing), ArgumentError);
  auto dup = outcomes;
  dup[4].spec.role = ScanRole::faking;
  EXPECT_THROW(evaluate_pair(kPair, dup), ArgumentError);
}

TEST(EvaluatePair, AgreesWithOracleOnGrid) {
  using namespace dfscan::testing;
  std::size_t checked = 0;
  for (const auto& base : grid_baselines()) {
    const auto cases = grid_cases(base);
    for (std::size_t i = 0; i < cases.size(); ++i) {
      // Rotate the grid through all three technique slots at once.
      std::vector<ScanOutcome> o{outcome(ScanRole::baseline_0, 200, base.b0, grid_headers(0)),
                                 outcome(ScanRole::baseline_1, 200, base.b1, grid_headers(1))};
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& c = cases[(i + k * 7) % cases.size()];
        o.push_back(outcome(kAllRoles[2 + k], c.status, c.length, grid_headers(c.header_variant)));
      }
      const auto got = evaluate_pair(kPair, o);
      ASSERT_TRUE(oracle_agrees(oracle_evaluate(kPair, o), got))
          << "b0=" << base.b0 << " b1=" << base.b1 << " case=" << i;
      checked += 3;
    }
  }
  EXPECT_GE(checked, 2000u);
}

TEST(EvaluatePair, ToleranceBoundariesExact) {
  // b0 = 1000: 950 and 1050 are inside the 5% band, 949 and 1051 are not.
  // b1 = 500: 400 and 600 are inside the 20% band, so they block tolerance.
  auto at = [](std::size_t b1, std::size_t len) {
    return fronting_of(five(1000, b1, outcome(ScanRole::fronting, 200, len, {"Other"}))).reason;
  };
  EXPECT_EQ(at(500, 950), TechniqueReason::length_tolerance);
  EXPECT_EQ(at(500, 1050), TechniqueReason::length_tolerance);
  EXPECT_EQ(at(500, 949), TechniqueReason::length_mismatch);
  EXPECT_EQ(at(500, 1051), TechniqueReason::length_mismatch);
  EXPECT_EQ(at(800, 960), TechniqueReason::length_mismatch);   // 960 - 800 == 20% of 800
  EXPECT_EQ(at(799, 960), TechniqueReason::length_tolerance);  // 161 > 159.8
}

TEST(EvaluatePair, PropertiesOnRandomOutcomes) {
  std::mt19937_64 rng(7070);
  const std::vector<std::optional<int>> statuses{200, 200, 200, 403, 421, 400, std::nullopt};
  auto random_outcome = [&](ScanRole role) {
    auto status = statuses[rng() % statuses.size()];
    auto o = outcome(role, status, status ? 900 + rng() % 300 : 0,
                     dfscan::testing::grid_headers(static_cast<int>(rng() % 3)));
    if (rng() % 8 == 0) o.leaf_cert = CertSummary{std::nullopt, {"*.example", "target.example"}};
    return o;
  };
  for (int i = 0; i < 5000; ++i) {
    std::vector<ScanOutcome> o;
    for (ScanRole role : kAllRoles) o.push_back(random_outcome(role));
    std::shuffle(o.begin(), o.end(), rng);
    const auto v = evaluate_pair(kPair, o);
    EXPECT_EQ(v, evaluate_pair(kPair, o));
    EXPECT_EQ(v.applicable, !v.prune_reason);
    for (ScanRole role : {ScanRole::fronting, ScanRole::faking, ScanRole::domainless}) {
      const auto& r = technique_result(v, role);
      if (!v.applicable) {
        EXPECT_EQ(r.status, TechniqueStatus::not_evaluated);
        continue;
      }
      EXPECT_NE(r.status, TechniqueStatus::not_evaluated);
      const bool success_reason = r.reason == TechniqueReason::exact_length ||
                                  r.reason == TechniqueReason::length_tolerance ||
                                  r.reason == TechniqueReason::header_order;
      EXPECT_EQ(r.succeeded(), success_reason);
      if (r.succeeded()) {
        const auto it = std::find_if(o.begin(), o.end(), [&](const auto& x) { return x.spec.role == role; });
        EXPECT_EQ(it->status_code, 200);
      }
    }
  }
}

TEST(EnumNames, RoundTrip) {
  for (auto r : {PruneReason::cert_covers_both, PruneReason::baseline_non_200, PruneReason::baseline_error}) {
    EXPECT_EQ(parse_prune_reason(to_string(r)), r);
  }
  for (auto r : {TechniqueReason::exact_length, TechniqueReason::length_tolerance, TechniqueReason::header_order,
                 TechniqueReason::non_200, TechniqueReason::length_mismatch, TechniqueReason::transport_error,
                 TechniqueReason::not_evaluated}) {
    EXPECT_EQ(parse_technique_reason(to_string(r)), r);
  }
  for (auto role : kAllRoles) EXPECT_EQ(parse_scan_role(to_string(role)), role);
}
