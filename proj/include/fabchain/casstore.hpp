#ifndef FABCHAIN_CASSTORE_HPP
#define FABCHAIN_CASSTORE_HPP

#include "fabchain/bytes.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>

// Content-addressed blob store holding model data that stays off-chain.
namespace fabchain::casstore {

struct ContentKeyTag {};
using ContentKey = StrongBytes<ContentKeyTag, 32>;

ContentKey key_of(ByteView blob);
bool verify(const ContentKey& key, ByteView blob);

// Either an in-memory map or a directory laid out as <root>/<2 hex>/<64 hex>.
// All member functions are safe to call concurrently.
class ContentStore {
 public:
  static ContentStore in_memory();
  static ContentStore on_disk(std::filesystem::path root);

  ContentStore(ContentStore&& other) noexcept;
  ContentStore& operator=(ContentStore&&) = delete;

  ContentKey put(ByteView blob);
  std::optional<Bytes> get(const ContentKey& key) const;
  bool contains(const ContentKey& key) const;
  bool erase(const ContentKey& key);
  std::size_t size() const;

  std::filesystem::path path_for(const ContentKey& key) const;
  bool is_on_disk() const { return root_.has_value(); }

 private:
  explicit ContentStore(std::optional<std::filesystem::path> root);

  std::optional<std::filesystem::path> root_;
  mutable std::mutex mutex_;
  std::map<ContentKey, Bytes> memory_;
};

}  // namespace fabchain::casstore

#endif
