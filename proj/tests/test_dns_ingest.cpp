#include <gtest/gtest.h>

#include <sstream>

#include "dfscan/dns_ingest.hpp"
#include "dfscan/errors.hpp"
#include "dfscan/json_io.hpp"

using namespace dfscan;

namespace {
const std::filesystem::path kData = DFSCAN_TEST_DATA;
}

TEST(ParseCnameRecords, FastlyLineGetsCanonicalDomain) {
  std::istringstream in(R"({"alias":"www.reddit.com","cname":"j.sni.global.fastly.net.","ip":"151.101.1.140"})");
  auto result = parse_cname_records(in);
  ASSERT_EQ(result.records.size(), 1u);
  const auto& obs = result.records[0];
  EXPECT_EQ(obs.alias_fqdn, "www.reddit.com");
  EXPECT_EQ(obs.canonical_fqdn, "j.sni.global.fastly.net");
  EXPECT_EQ(obs.canonical_domain, "fastly.net");
  EXPECT_EQ(obs.resolved_ip.to_string(), "151.101.1.140");
  EXPECT_FALSE(obs.observed_at);
}

TEST(ParseCnameRecords, EmptyStream) {
  std::istringstream in("");
  auto result = parse_cname_records(in);
  EXPECT_TRUE(result.records.empty());
  EXPECT_EQ(result.stats, IngestStats{});
}

TEST(ParseCnameRecords, ThreeValidOneMalformed) {
  auto result = parse_cname_file(kData / "cname_fixture.jsonl");
  EXPECT_EQ(result.records.size(), 3u);
  EXPECT_EQ(result.stats.lines, 4u);
  EXPECT_EQ(result.stats.accepted, 3u);
  EXPECT_EQ(result.stats.malformed, 1u);
  EXPECT_EQ(result.records[1].alias_fqdn, "www.github.com");
  EXPECT_EQ(result.records[1].canonical_domain, "github.io");
  EXPECT_EQ(result.records[2].canonical_domain, "cloudfront.net");
  EXPECT_EQ(result.records[0].observed_at, 1663200000);
}

TEST(ParseCnameRecords, MostlyMalformedIsFormatError) {
  std::istringstream in("garbage\n{\"alias\":1}\n{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.4\"}\n");
  EXPECT_THROW(parse_cname_records(in), FormatError);
}

TEST(ParseCnameRecords, HalfMalformedIsTolerated) {
  std::istringstream in("garbage\n{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.4\"}\n");
  auto result = parse_cname_records(in);
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.stats.malformed, 1u);
}

TEST(ParseCnameRecords, UnreadableSourceIsIoError) {
  EXPECT_THROW(parse_cname_file(kData / "does-not-exist.jsonl"), IoError);
}

TEST(ParseCnameRecords, Ipv6RowsSkippedWithCounter) {
  std::istringstream in(
      "{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"2001:db8::1\"}\n"
      "{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.4\"}\n");
  auto result = parse_cname_records(in);
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.stats.skipped_ipv6, 1u);
  EXPECT_EQ(result.stats.malformed, 0u);
}

TEST(ParseCnameRecords, InvariantViolationsAreMalformed) {
  std::istringstream in(
      "{\"alias\":\"same.net\",\"cname\":\"SAME.net.\",\"ip\":\"1.2.3.4\"}\n"
      "{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.999\"}\n"
      "{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.4\",\"ts\":\"yesterday\"}\n"
      "{\"alias\":\"a.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.4\"}\n"
      "{\"alias\":\"c.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.5\"}\n"
      "{\"alias\":\"d.com\",\"cname\":\"b.net\",\"ip\":\"1.2.3.6\"}\n");
  auto result = parse_cname_records(in);
  EXPECT_EQ(result.records.size(), 3u);
  EXPECT_EQ(result.stats.malformed, 3u);
}

TEST(ParseCnameRecords, ObservationInvariantsHold) {
  auto result = parse_cname_file(kData / "cname_50.jsonl");
  ASSERT_EQ(result.records.size(), 50u);
  for (const auto& obs : result.records) {
    EXPECT_NE(obs.alias_fqdn, obs.canonical_fqdn);
    EXPECT_TRUE(obs.canonical_fqdn.ends_with(obs.canonical_domain));
  }
}

TEST(ParseCnameRecords, SerializationRoundTrips) {
  auto result = parse_cname_file(kData / "cname_fixture.jsonl");
  std::istringstream again(jsonl::to_lines(result.records));
  auto reparsed = parse_cname_records(again);
  EXPECT_EQ(reparsed.records, result.records);
  for (const auto& obs : result.records) EXPECT_EQ(jsonl::decode_cname(jsonl::encode(obs)), obs);
}

TEST(ParseTlsRecords, Fixture) {
  auto result = parse_tls_file(kData / "tls_fixture.jsonl");
  EXPECT_EQ(result.stats.lines, 7u);
  EXPECT_EQ(result.stats.accepted, 6u);
  EXPECT_EQ(result.stats.skipped_ipv6, 1u);
  ASSERT_EQ(result.records.size(), 6u);
  EXPECT_FALSE(result.records[3].server_name);
  EXPECT_EQ(result.records[0].server_name, "www.reddit.com");
}

TEST(ParseTlsRecords, EmptySniIsMalformed) {
  std::istringstream in("{\"sni\":\"\",\"dst_ip\":\"1.2.3.4\"}\n{\"sni\":\"a.com\",\"dst_ip\":\"1.2.3.4\"}\n");
  auto result = parse_tls_records(in);
  EXPECT_EQ(result.records.size(), 1u);
  EXPECT_EQ(result.stats.malformed, 1u);
}

TEST(ParseTlsRecords, SerializationRoundTrips) {
  auto result = parse_tls_file(kData / "tls_fixture.jsonl");
  for (const auto& obs : result.records) EXPECT_EQ(jsonl::decode_tls(jsonl::encode(obs)), obs);
}
