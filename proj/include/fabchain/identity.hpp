#ifndef FABCHAIN_IDENTITY_HPP
#define FABCHAIN_IDENTITY_HPP

#include "fabchain/bytes.hpp"

#include <filesystem>
#include <optional>

/// Key pairs, signatures and chain addresses.
///
/// Signature scheme: Ed25519 (libsodium). A signature is always computed over
/// a 32-byte message digest, never over raw payloads, and is 64 bytes long.
/// Public keys serialize to 32 bytes. An address is the last 20 bytes of the
/// SHA-256 digest of the serialized public key.
namespace fabchain::identity {

struct AddressTag {};
struct PublicKeyTag {};
struct SignatureTag {};

using Address = StrongBytes<AddressTag, 20>;
using PublicKey = StrongBytes<PublicKeyTag, 32>;
using Signature = StrongBytes<SignatureTag, 64>;
using Seed = FixedBytes<32>;

constexpr std::size_t kPublicKeySize = PublicKey::size;
constexpr std::size_t kSignatureSize = Signature::size;
constexpr std::size_t kDigestSize = 32;

// Version byte prefixed to the 32-byte seed in key files.
constexpr std::uint8_t kKeyFileVersion = 0x01;

class KeyPair {
 public:
  /// Derives the Ed25519 key pair from a 32-byte seed. The seed is the
  /// private key; the public key is a pure function of it.
  explicit KeyPair(const Seed& seed);

  const Seed& private_key() const { return seed_; }
  const PublicKey& public_key() const { return public_key_; }
  Address address() const;

  Signature sign(ByteView digest) const;

 private:
  Seed seed_{};
  FixedBytes<64> expanded_{};
  PublicKey public_key_{};
};

// Same seed gives the same pair; without a seed fresh OS entropy is used.
KeyPair keygen(std::optional<Seed> seed = std::nullopt);

// Seed derived from a 64-bit integer: SHA-256 of its big-endian encoding.
Seed seed_from_u64(std::uint64_t value);

Address address_of(const PublicKey& public_key);
// Throws std::invalid_argument unless the input is exactly 32 bytes.
Address address_of(ByteView public_key);

// Throws std::invalid_argument unless the digest is exactly 32 bytes.
Signature sign(const Seed& private_key, ByteView digest);

// Never throws: wrong lengths or malformed inputs simply fail verification.
bool verify(ByteView public_key, ByteView digest, ByteView signature);
inline bool verify(const PublicKey& public_key, ByteView digest, const Signature& signature) {
  return verify(public_key.view(), digest, signature.view());
}

// Key file: 1 version byte followed by the 32-byte seed. Refuses to overwrite.
void save_key_file(const std::filesystem::path& path, const KeyPair& key);
KeyPair load_key_file(const std::filesystem::path& path);

}  // namespace fabchain::identity

#endif
