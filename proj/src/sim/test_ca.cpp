#include "dfscan/sim/test_ca.hpp"

#include <openssl/bio.h>
#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/x509v3.h>

#include <cstdio>
#include <memory>

#include "dfscan/errors.hpp"

namespace dfscan::sim {
namespace {

using BioPtr = std::unique_ptr<BIO, ossl::Deleter<BIO_free_all>>;
struct FileCloser {
  void operator()(FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

ossl::PkeyPtr new_key() {
  ossl::PkeyPtr key(EVP_EC_gen("P-256"));
  if (!key) throw Error("key generation failed: " + ossl::last_error());
  return key;
}

void set_random_serial(X509* cert) {
  unsigned char bytes[8];
  if (RAND_bytes(bytes, sizeof(bytes)) != 1) throw Error("RAND_bytes failed");
  bytes[0] &= 0x7f;  // keep it positive
  std::unique_ptr<BIGNUM, ossl::Deleter<BN_free>> bn(BN_bin2bn(bytes, sizeof(bytes), nullptr));
  BN_to_ASN1_INTEGER(bn.get(), X509_get_serialNumber(cert));
}

void add_ext(X509* cert, X509* issuer, int nid, const std::string& value) {
  X509V3_CTX ctx;
  X509V3_set_ctx_nodb(&ctx);
  X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
  std::unique_ptr<X509_EXTENSION, ossl::Deleter<X509_EXTENSION_free>> ext(
      X509V3_EXT_conf_nid(nullptr, &ctx, nid, value.c_str()));
  if (!ext || X509_add_ext(cert, ext.get(), -1) != 1) {
    throw Error("cannot add certificate extension: " + ossl::last_error());
  }
}

ossl::X509Ptr new_cert(const std::string& cn, long days) {
  ossl::X509Ptr cert(X509_new());
  X509_set_version(cert.get(), 2);
  set_random_serial(cert.get());
  X509_gmtime_adj(X509_getm_notBefore(cert.get()), -3600);
  X509_gmtime_adj(X509_getm_notAfter(cert.get()), days * 24 * 3600);
  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_UTF8,
                             reinterpret_cast<const unsigned char*>(cn.c_str()), -1, -1, 0);
  return cert;
}

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError(errno_message("cannot open " + path.string()));
  return f;
}

}  // namespace

TestCa TestCa::create() {
  TestCa ca;
  ca.key_ = new_key();
  ca.cert_ = new_cert("dfscan simulator test CA", 3650);
  X509_set_issuer_name(ca.cert_.get(), X509_get_subject_name(ca.cert_.get()));
  X509_set_pubkey(ca.cert_.get(), ca.key_.get());
  add_ext(ca.cert_.get(), ca.cert_.get(), NID_basic_constraints, "critical,CA:TRUE");
  add_ext(ca.cert_.get(), ca.cert_.get(), NID_key_usage, "critical,keyCertSign,cRLSign");
  add_ext(ca.cert_.get(), ca.cert_.get(), NID_subject_key_identifier, "hash");
  if (X509_sign(ca.cert_.get(), ca.key_.get(), EVP_sha256()) == 0) {
    throw Error("CA self-sign failed: " + ossl::last_error());
  }
  return ca;
}

TestCa TestCa::load_or_create(const std::filesystem::path& state_dir) {
  std::error_code ec;
  std::filesystem::create_directories(state_dir, ec);
  if (ec) throw IoError("cannot create state directory " + state_dir.string() + ": " + ec.message());
  const auto cert_path = state_dir / "ca.pem";
  const auto key_path = state_dir / "ca.key.pem";

  if (std::filesystem::exists(cert_path) && std::filesystem::exists(key_path)) {
    TestCa ca;
    auto cf = open_file(cert_path, "r");
    ca.cert_.reset(PEM_read_X509(cf.get(), nullptr, nullptr, nullptr));
    auto kf = open_file(key_path, "r");
    ca.key_.reset(PEM_read_PrivateKey(kf.get(), nullptr, nullptr, nullptr));
    if (!ca.cert_ || !ca.key_) throw FormatError("unreadable CA material in " + state_dir.string());
    if (X509_check_private_key(ca.cert_.get(), ca.key_.get()) != 1) {
      throw FormatError("CA key does not match certificate in " + state_dir.string());
    }
    return ca;
  }

  TestCa ca = create();
  {
    auto kf = open_file(key_path, "w");
    std::filesystem::permissions(key_path, std::filesystem::perms::owner_read |
                                               std::filesystem::perms::owner_write);
    if (PEM_write_PrivateKey(kf.get(), ca.key_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
      throw IoError("cannot write " + key_path.string());
    }
  }
  {
    auto cf = open_file(cert_path, "w");
    if (PEM_write_X509(cf.get(), ca.cert_.get()) != 1) throw IoError("cannot write " + cert_path.string());
  }
  return ca;
}

LeafCert TestCa::issue(const std::vector<std::string>& dns_names, std::string common_name) const {
  if (dns_names.empty()) throw ArgumentError("a leaf certificate needs at least one name");
  if (common_name.empty()) common_name = dns_names.front();

  LeafCert leaf;
  leaf.key = new_key();
  leaf.cert = new_cert(common_name, 30);
  X509_set_issuer_name(leaf.cert.get(), X509_get_subject_name(cert_.get()));
  X509_set_pubkey(leaf.cert.get(), leaf.key.get());

  std::string san;
  for (const auto& name : dns_names) {
    if (!san.empty()) san += ',';
    san += "DNS:" + name;
  }
  add_ext(leaf.cert.get(), cert_.get(), NID_subject_alt_name, san);
  add_ext(leaf.cert.get(), cert_.get(), NID_basic_constraints, "critical,CA:FALSE");
  add_ext(leaf.cert.get(), cert_.get(), NID_ext_key_usage, "serverAuth");
  if (X509_sign(leaf.cert.get(), key_.get(), EVP_sha256()) == 0) {
    throw Error("leaf signing failed: " + ossl::last_error());
  }
  return leaf;
}

std::string TestCa::ca_pem() const {
  BioPtr bio(BIO_new(BIO_s_mem()));
  PEM_write_bio_X509(bio.get(), cert_.get());
  char* data = nullptr;
  const long len = BIO_get_mem_data(bio.get(), &data);
  return std::string(data, static_cast<std::size_t>(len));
}

}  // namespace dfscan::sim
