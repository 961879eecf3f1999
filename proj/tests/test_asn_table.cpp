#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "dfscan/asn_table.hpp"
#include "dfscan/errors.hpp"

using namespace dfscan;

namespace {

AsnEntry entry(const char* prefix, std::uint32_t asn, std::string name) {
  return {*Ipv4Prefix::parse(prefix), asn, std::move(name)};
}

// Reference: scan every entry, keep the longest matching prefix.
const AsnEntry* linear_lookup(const std::vector<AsnEntry>& entries, Ipv4Address ip) {
  const AsnEntry* best = nullptr;
  for (const auto& e : entries) {
    if (e.prefix.contains(ip) && (!best || e.prefix.length() > best->prefix.length())) best = &e;
  }
  return best;
}

}  // namespace

TEST(AsnLookup, LongestPrefixWins) {
  AsnTable table({entry("10.0.0.0/8", 1, "A"), entry("10.1.0.0/16", 2, "B")});
  const auto* hit = table.lookup(*Ipv4Address::parse("10.1.2.3"));
  ASSERT_NE(hit, nullptr);
  EXPECT_EQ(hit->as_name, "B");
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("10.2.0.1"))->as_name, "A");
}

TEST(AsnLookup, NoMatch) {
  AsnTable table({entry("10.0.0.0/8", 1, "A")});
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("192.0.2.1")), nullptr);
  EXPECT_EQ(AsnTable{}.lookup(*Ipv4Address::parse("192.0.2.1")), nullptr);
}

TEST(AsnLookup, DefaultRouteAndHostRoutes) {
  AsnTable table({entry("0.0.0.0/0", 7, "DEFAULT"), entry("203.0.113.7/32", 8, "HOST")});
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("203.0.113.7"))->asn, 8u);
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("203.0.113.8"))->asn, 7u);
}

TEST(AsnLookup, RejectsDuplicatesAndZeroAsn) {
  EXPECT_THROW(AsnTable({entry("10.0.0.0/8", 1, "A"), entry("10.9.0.0/8", 2, "B")}), ArgumentError);
  EXPECT_THROW(AsnTable({entry("10.0.0.0/8", 0, "A")}), ArgumentError);
}

TEST(AsnLookup, MatchesLinearOracleOnRandomTables) {
  std::mt19937_64 rng(54113);
  for (int round = 0; round < 5; ++round) {
    std::vector<AsnEntry> entries;
    std::set<Ipv4Prefix> seen;
    while (entries.size() < 400) {
      const unsigned len = static_cast<unsigned>(rng() % 33);
      Ipv4Prefix p(Ipv4Address(static_cast<std::uint32_t>(rng())), len);
      if (!seen.insert(p).second) continue;
      entries.push_back({p, static_cast<std::uint32_t>(1 + entries.size()), "AS" + std::to_string(entries.size())});
    }
    AsnTable table(entries);
    for (int i = 0; i < 1000; ++i) {
      // Half the probes land inside a known prefix so long matches are hit.
      std::uint32_t raw = static_cast<std::uint32_t>(rng());
      if (i % 2 == 0) {
        const auto& e = entries[rng() % entries.size()];
        raw = e.prefix.network().value() | (raw & ~e.prefix.mask());
      }
      const Ipv4Address ip(raw);
      const AsnEntry* expected = linear_lookup(entries, ip);
      const AsnEntry* got = table.lookup(ip);
      if (!expected) {
        EXPECT_EQ(got, nullptr) << ip.to_string();
      } else {
        ASSERT_NE(got, nullptr) << ip.to_string();
        EXPECT_EQ(*got, *expected) << ip.to_string();
      }
    }
  }
}

TEST(AsnCsv, ParsesQuotedNamesWithCommas) {
  auto table = AsnTable::load_csv(std::filesystem::path(DFSCAN_TEST_DATA) / "asn.csv");
  EXPECT_EQ(table.entries().size(), 3u);
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("23.2.0.1"))->as_name, "AKAMAI-ASN1, EU");
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("23.1.0.1"))->as_name, "AKAMAI-AS");
  EXPECT_EQ(table.lookup(*Ipv4Address::parse("151.101.1.140"))->asn, 54113u);
}

TEST(AsnCsv, RequiresHeaderAndValidRows) {
  std::istringstream no_header("10.0.0.0/8,1,A\n");
  EXPECT_THROW(AsnTable::parse_csv(no_header), FormatError);
  std::istringstream bad_prefix("prefix,asn,name\n10.0.0.0/40,1,A\n");
  EXPECT_THROW(AsnTable::parse_csv(bad_prefix), FormatError);
  EXPECT_THROW(AsnTable::load_csv("/nonexistent/asn.csv"), IoError);
}
