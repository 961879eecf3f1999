#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfscan/tls_util.hpp"

namespace dfscan::sim {

/// A certificate plus its private key.
struct LeafCert {
  ossl::X509Ptr cert;
  ossl::PkeyPtr key;
};

/// Throwaway certificate authority for the simulator. Nothing it mints is
/// installed anywhere; scanners do not verify chains and the in-repo tests
/// trust it by loading ca_pem() explicitly.
class TestCa {
 public:
  /// Fresh in-memory CA.
  static TestCa create();

  /// Reuse ca.pem / ca.key.pem under `state_dir`, creating them first if
  /// absent. Throws IoError when the directory is unusable.
  static TestCa load_or_create(const std::filesystem::path& state_dir);

  /// Leaf for the given SAN dNSNames. `common_name` defaults to the first
  /// name. Throws ArgumentError on an empty name list.
  LeafCert issue(const std::vector<std::string>& dns_names, std::string common_name = {}) const;

  X509* certificate() const { return cert_.get(); }
  std::string ca_pem() const;

 private:
  TestCa() = default;

  ossl::X509Ptr cert_;
  ossl::PkeyPtr key_;
};

}  // namespace dfscan::sim
