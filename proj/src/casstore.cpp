#include "fabchain/casstore.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace fabchain::casstore {

namespace fs = std::filesystem;

ContentKey key_of(ByteView blob) { return ContentKey{sha256(blob)}; }

bool verify(const ContentKey& key, ByteView blob) { return key_of(blob) == key; }

ContentStore::ContentStore(std::optional<fs::path> root) : root_(std::move(root)) {}

ContentStore::ContentStore(ContentStore&& other) noexcept
    : root_(std::move(other.root_)), memory_(std::move(other.memory_)) {}

ContentStore ContentStore::in_memory() { return ContentStore(std::nullopt); }

ContentStore ContentStore::on_disk(fs::path root) {
  fs::create_directories(root);
  return ContentStore(std::move(root));
}

fs::path ContentStore::path_for(const ContentKey& key) const {
  if (!root_) throw std::logic_error("in-memory store has no paths");
  const std::string hex = to_hex(key.bytes);
  return *root_ / hex.substr(0, 2) / hex;
}

ContentKey ContentStore::put(ByteView blob) {
  const ContentKey key = key_of(blob);
  if (!root_) {
    std::lock_guard lock(mutex_);
    memory_.try_emplace(key, blob.begin(), blob.end());
    return key;
  }

  const fs::path target = path_for(key);
  if (fs::exists(target)) return key;
  fs::create_directories(target.parent_path());

  // Write to a unique temporary name, then rename into place.
  static std::atomic<std::uint64_t> counter{0};
  const fs::path tmp = target.parent_path() / (".tmp-" + std::to_string(::getpid()) + "-" +
                                               std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write blob to " + tmp.string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::system_error(ec, "cannot move blob into " + target.string());
  }
  return key;
}

std::optional<Bytes> ContentStore::get(const ContentKey& key) const {
  if (!root_) {
    std::lock_guard lock(mutex_);
    const auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  return Bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool ContentStore::contains(const ContentKey& key) const {
  if (!root_) {
    std::lock_guard lock(mutex_);
    return memory_.contains(key);
  }
  return fs::exists(path_for(key));
}

bool ContentStore::erase(const ContentKey& key) {
  if (!root_) {
    std::lock_guard lock(mutex_);
    return memory_.erase(key) > 0;
  }
  return fs::remove(path_for(key));
}

std::size_t ContentStore::size() const {
  if (!root_) {
    std::lock_guard lock(mutex_);
    return memory_.size();
  }
  std::size_t count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(*root_))
    if (entry.is_regular_file() && entry.path().filename().string().size() == 64) ++count;
  return count;
}

}  // namespace fabchain::casstore
