#include "fabchain/block_log.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <system_error>

namespace fabchain::ledger {

using nlohmann::ordered_json;

ordered_json to_json(const Transaction& tx) {
  ordered_json j;
  j["sender"] = tx.sender.hex();
  j["nonce"] = tx.nonce;
  j["call"] = to_hex0x(tx.call_data);
  j["submitted_at"] = tx.submitted_at;
  j["public_key"] = tx.public_key.hex();
  j["signature"] = tx.signature.hex();
  j["tx_hash"] = to_hex0x(tx.tx_hash);
  return j;
}

ordered_json to_json(const Block& block) {
  ordered_json txs = ordered_json::array();
  for (const auto& tx : block.transactions) txs.push_back(to_json(tx));
  ordered_json j;
  j["height"] = block.height;
  j["prev_hash"] = to_hex0x(block.prev_hash);
  j["timestamp"] = block.timestamp;
  j["difficulty"] = block.difficulty;
  j["nonce"] = block.nonce;
  j["transactions"] = std::move(txs);
  j["block_hash"] = to_hex0x(block.block_hash);
  return j;
}

Transaction transaction_from_json(const ordered_json& j) {
  Transaction tx;
  tx.sender = Address::from_hex(j.at("sender").get<std::string>());
  tx.nonce = j.at("nonce").get<std::uint64_t>();
  tx.call_data = from_hex(j.at("call").get<std::string>());
  tx.submitted_at = j.at("submitted_at").get<std::uint64_t>();
  tx.public_key = PublicKey::from_hex(j.at("public_key").get<std::string>());
  tx.signature = Signature::from_hex(j.at("signature").get<std::string>());
  tx.tx_hash = fixed_from_hex<32>(j.at("tx_hash").get<std::string>());
  return tx;
}

Block block_from_json(const ordered_json& j) {
  Block block;
  block.height = j.at("height").get<std::uint64_t>();
  block.prev_hash = fixed_from_hex<32>(j.at("prev_hash").get<std::string>());
  block.timestamp = j.at("timestamp").get<std::uint64_t>();
  block.difficulty = j.at("difficulty").get<std::uint32_t>();
  block.nonce = j.at("nonce").get<std::uint64_t>();
  for (const auto& tx : j.at("transactions")) block.transactions.push_back(transaction_from_json(tx));
  block.block_hash = fixed_from_hex<32>(j.at("block_hash").get<std::string>());
  return block;
}

std::string block_line(const Block& block) { return to_json(block).dump(); }

std::vector<Block> export_blocks(const Chain& chain) {
  std::vector<Block> out;
  out.reserve(chain.insertion_order().size());
  for (const auto& hash : chain.insertion_order()) out.push_back(*chain.find_block(hash));
  return out;
}

std::vector<Block> read_block_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chain log " + path.string());
  std::vector<Block> blocks;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const ordered_json j = ordered_json::parse(line);
      if (!j.is_object()) throw std::invalid_argument("expected a JSON object");
      blocks.push_back(block_from_json(j));
    } catch (const std::exception& e) {
      throw LogParseError(number, e.what());
    }
  }
  return blocks;
}

void write_block_log(const std::filesystem::path& path, std::span<const Block> blocks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write chain log " + path.string());
  for (const auto& block : blocks) out << block_line(block) << '\n';
  if (!out) throw std::runtime_error("write to chain log " + path.string() + " failed");
}

void append_block(const std::filesystem::path& path, const Block& block) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to chain log " + path.string());
  out << block_line(block) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("append to chain log " + path.string() + " failed");
}

Chain load_chain(const std::filesystem::path& path, LedgerConfig config) {
  return Chain::import(read_block_log(path), config);
}

FileLock::FileLock(const std::filesystem::path& path) {
  fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
  if (::flock(fd_, LOCK_EX) != 0) {
    const int err = errno;
    ::close(fd_);
    throw std::system_error(err, std::generic_category(), "cannot lock " + path.string());
  }
}

FileLock::~FileLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace fabchain::ledger
