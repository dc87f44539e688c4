#include "fabchain/identity.hpp"

#include <sodium.h>

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <iterator>
#include <stdexcept>
#include <system_error>

namespace fabchain::identity {

namespace {

void ensure_sodium() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace

KeyPair::KeyPair(const Seed& seed) : seed_(seed) {
  ensure_sodium();
  if (crypto_sign_seed_keypair(public_key_.bytes.data(), expanded_.data(), seed_.data()) != 0)
    throw std::runtime_error("failed to derive key pair from seed");
}

Address KeyPair::address() const { return address_of(public_key_); }

Signature KeyPair::sign(ByteView digest) const {
  if (digest.size() != kDigestSize)
    throw std::invalid_argument("sign expects a 32-byte digest, got " + std::to_string(digest.size()));
  Signature sig;
  crypto_sign_detached(sig.bytes.data(), nullptr, digest.data(), digest.size(), expanded_.data());
  return sig;
}

KeyPair keygen(std::optional<Seed> seed) {
  ensure_sodium();
  if (!seed) {
    Seed fresh{};
    randombytes_buf(fresh.data(), fresh.size());
    seed = fresh;
  }
  return KeyPair(*seed);
}

Seed seed_from_u64(std::uint64_t value) {
  Bytes buf;
  put_u64_be(buf, value);
  return sha256(buf);
}

Address address_of(const PublicKey& public_key) {
  const Hash256 digest = sha256(public_key.view());
  Address out;
  std::copy(digest.end() - Address::size, digest.end(), out.bytes.begin());
  return out;
}

Address address_of(ByteView public_key) {
  if (public_key.size() != kPublicKeySize)
    throw std::invalid_argument("public key must be 32 bytes, got " + std::to_string(public_key.size()));
  PublicKey key;
  std::copy(public_key.begin(), public_key.end(), key.bytes.begin());
  return address_of(key);
}

Signature sign(const Seed& private_key, ByteView digest) { return KeyPair(private_key).sign(digest); }

bool verify(ByteView public_key, ByteView digest, ByteView signature) {
  if (public_key.size() != kPublicKeySize || digest.size() != kDigestSize || signature.size() != kSignatureSize)
    return false;
  ensure_sodium();
  return crypto_sign_verify_detached(signature.data(), digest.data(), digest.size(), public_key.data()) == 0;
}

void save_key_file(const std::filesystem::path& path, const KeyPair& key) {
  // O_EXCL: never replace an existing key.
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0600);
  if (fd < 0) {
    const auto err = std::error_code(errno, std::generic_category());
    throw std::system_error(err, "cannot create key file " + path.string());
  }
  Bytes contents{kKeyFileVersion};
  append(contents, key.private_key());
  const auto written = ::write(fd, contents.data(), contents.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(contents.size()))
    throw std::runtime_error("short write to key file " + path.string());
}

KeyPair load_key_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open key file " + path.string());
  const Bytes contents{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (contents.size() != 1 + std::tuple_size_v<Seed>)
    throw std::runtime_error("key file " + path.string() + " has wrong length");
  if (contents[0] != kKeyFileVersion)
    throw std::runtime_error("key file " + path.string() + " has unsupported version");
  Seed seed{};
  std::copy(contents.begin() + 1, contents.end(), seed.begin());
  return KeyPair(seed);
}

}  // namespace fabchain::identity
