#ifndef FABCHAIN_TESTS_SUPPORT_HPP
#define FABCHAIN_TESTS_SUPPORT_HPP

// Helpers shared by the test binaries. SHA-256 and Ed25519 here come from
// OpenSSL so they serve as an oracle independent of the library's libsodium.

#include "fabchain/bytes.hpp"
#include "fabchain/identity.hpp"
#include "fabchain/ledger.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <unistd.h>

namespace testsupport {

using fabchain::Bytes;
using fabchain::ByteView;
using fabchain::Hash256;

inline Hash256 oracle_sha256(ByteView data) {
  Hash256 out{};
  SHA256(data.data(), data.size(), out.data());
  return out;
}

// Ed25519 public key from a raw 32-byte seed, via OpenSSL.
inline fabchain::FixedBytes<32> oracle_ed25519_public(const fabchain::FixedBytes<32>& seed) {
  EVP_PKEY* pkey = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, seed.data(), seed.size());
  if (!pkey) throw std::runtime_error("openssl: bad ed25519 seed");
  fabchain::FixedBytes<32> pub{};
  std::size_t len = pub.size();
  EVP_PKEY_get_raw_public_key(pkey, pub.data(), &len);
  EVP_PKEY_free(pkey);
  return pub;
}

inline bool oracle_ed25519_verify(ByteView pub, ByteView msg, ByteView sig) {
  EVP_PKEY* pkey = EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, pub.data(), pub.size());
  if (!pkey) return false;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  bool ok = EVP_DigestVerifyInit(ctx, nullptr, nullptr, nullptr, pkey) == 1 &&
            EVP_DigestVerify(ctx, sig.data(), sig.size(), msg.data(), msg.size()) == 1;
  EVP_MD_CTX_free(ctx);
  EVP_PKEY_free(pkey);
  return ok;
}

inline void be64(Bytes& out, std::uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

inline fabchain::identity::KeyPair key(std::uint64_t n) {
  return fabchain::identity::keygen(fabchain::identity::seed_from_u64(n));
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "fabchain-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Chain at low difficulty for fast tests.
inline fabchain::ledger::LedgerConfig fast_config(std::uint32_t difficulty = 4) {
  fabchain::ledger::LedgerConfig c;
  c.difficulty = difficulty;
  return c;
}

}  // namespace testsupport

#endif
