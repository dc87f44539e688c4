#ifndef FABCHAIN_BLOCK_LOG_HPP
#define FABCHAIN_BLOCK_LOG_HPP

#include "fabchain/ledger.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>

// Append-only block log: one JSON object per line, hashes/addresses/bytes as
// 0x-hex, integers in decimal. Field order is fixed, so a load/save cycle
// reproduces the file byte for byte.
namespace fabchain::ledger {

class LogParseError : public std::runtime_error {
 public:
  LogParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

nlohmann::ordered_json to_json(const Transaction& tx);
nlohmann::ordered_json to_json(const Block& block);
Transaction transaction_from_json(const nlohmann::ordered_json& json);
Block block_from_json(const nlohmann::ordered_json& json);

std::string block_line(const Block& block);

// Every block of the chain in insertion order.
std::vector<Block> export_blocks(const Chain& chain);

std::vector<Block> read_block_log(const std::filesystem::path& path);
void write_block_log(const std::filesystem::path& path, std::span<const Block> blocks);
void append_block(const std::filesystem::path& path, const Block& block);

Chain load_chain(const std::filesystem::path& path, LedgerConfig config = {});

// Holds an exclusive advisory lock (flock) on a file for the object's
// lifetime. Creates the file if missing.
class FileLock {
 public:
  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace fabchain::ledger

#endif
