#ifndef FABCHAIN_LEDGER_HPP
#define FABCHAIN_LEDGER_HPP

#include "fabchain/bytes.hpp"
#include "fabchain/fabreg.hpp"
#include "fabchain/identity.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

/// The miniature blockchain: signed transactions, proof-of-work blocks,
/// FIFO mempool, most-work fork choice and full-chain verification.
///
/// Canonical encodings (all integers big-endian):
///   tx signing bytes  = sender(20) || nonce(8) || call_data || submitted_at(8)
///   tx_hash           = SHA-256(signing bytes || public_key(32) || signature(64))
///   tx-list digest    = SHA-256(tx_hash_0 || tx_hash_1 || ...)
///   block header      = height(8) || prev_hash(32) || timestamp(8) || difficulty(4)
///                       || nonce(8) || tx-list digest(32)
///   block_hash        = SHA-256(block header)
namespace fabchain::ledger {

using identity::Address;
using identity::KeyPair;
using identity::PublicKey;
using identity::Signature;

constexpr std::uint32_t kMaxDifficulty = 32;

struct Transaction {
  Address sender;
  std::uint64_t nonce = 0;
  Bytes call_data;  // fabreg call wire encoding
  std::uint64_t submitted_at = 0;
  PublicKey public_key;
  Signature signature;
  Hash256 tx_hash{};

  bool operator==(const Transaction&) const = default;
};

Bytes signing_bytes(const Transaction& tx);
Hash256 signing_digest(const Transaction& tx);
Hash256 compute_tx_hash(const Transaction& tx);

Transaction make_transaction(const KeyPair& key, std::uint64_t nonce, const fabreg::ContractCall& call,
                             std::uint64_t submitted_at);
// Same, with arbitrary call bytes (used to exercise malformed calls).
Transaction make_raw_transaction(const KeyPair& key, std::uint64_t nonce, Bytes call_data,
                                 std::uint64_t submitted_at);

std::optional<fabreg::ContractCall> decode_call(const Transaction& tx);

enum class TxFault { None, DigestMismatch, SenderMismatch, BadSignature };
std::string_view to_string(TxFault fault);
// Stateless validity of a single transaction, checked in this order.
TxFault check_transaction(const Transaction& tx);

struct Block {
  std::uint64_t height = 0;
  Hash256 prev_hash{};
  std::uint64_t timestamp = 0;
  std::uint32_t difficulty = 0;  // leading zero bits required of block_hash
  std::uint64_t nonce = 0;
  std::vector<Transaction> transactions;
  Hash256 block_hash{};

  bool operator==(const Block&) const = default;
};

Hash256 tx_list_digest(std::span<const Transaction> txs);
Bytes header_bytes(const Block& block);
Hash256 compute_block_hash(const Block& block);
bool meets_difficulty(const Hash256& hash, std::uint32_t difficulty);
// 2^difficulty, saturating.
std::uint64_t block_work(std::uint32_t difficulty);

class MiningExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Searches nonces from 0 until the PoW condition holds. Throws
// MiningExhausted after max_attempts.
Block mine_block(std::uint64_t height, const Hash256& prev_hash, std::uint64_t timestamp,
                 std::uint32_t difficulty, std::vector<Transaction> txs, std::uint64_t max_attempts);

struct LedgerConfig {
  std::uint32_t difficulty = 8;
  std::size_t max_block_txs = 100;
  std::uint64_t max_pow_attempts = std::uint64_t{1} << 26;
  std::uint64_t genesis_timestamp = 0;
};

enum class SubmitError { BadSignature, SenderMismatch, DigestMismatch, NonceMismatch, Duplicate, FutureTimestamp };
std::string_view to_string(SubmitError error);

class SubmitRejected : public std::runtime_error {
 public:
  SubmitRejected(SubmitError code, const std::string& what) : std::runtime_error(what), code_(code) {}
  SubmitError code() const { return code_; }

 private:
  SubmitError code_;
};

struct MempoolEntry {
  Transaction tx;
  std::uint64_t arrived_at = 0;
  std::uint64_t tip_height_at_arrival = 0;
  std::uint64_t min_inclusion_height = 0;
};

struct Receipt {
  Hash256 tx_hash{};
  std::optional<fabreg::Rejection> rejection;
  bool ok() const { return !rejection; }
};

struct TxLocation {
  Hash256 block_hash{};
  std::uint64_t height = 0;
  std::uint64_t timestamp = 0;
  std::size_t index = 0;
};

/// Contract state plus per-transaction receipts at the canonical tip.
struct StateSnapshot {
  Hash256 tip{};
  std::uint64_t height = 0;
  fabreg::ContractState contract;
  std::map<Hash256, Receipt> receipts;
};

struct VerificationReport {
  bool ok = true;
  std::optional<Hash256> first_bad_block;
  std::uint64_t height = 0;
  std::string reason;
};

// Checks a linear block sequence starting at genesis: height and prev-hash
// links, stored transaction digests, signatures, sender/key binding,
// per-sender nonce sequence, block hash, difficulty and PoW. Reports the
// first violation.
VerificationReport verify_blocks(std::span<const Block> path);

class Chain {
 public:
  // Creates a chain holding only a freshly mined genesis block.
  explicit Chain(LedgerConfig config = {});

  // Rebuilds a chain from blocks in log order without validating them; the
  // first block is taken as genesis. Blocks whose parent is absent are kept
  // as orphans and reported by verify_chain. Throws std::invalid_argument on
  // an empty list.
  static Chain import(std::vector<Block> blocks, LedgerConfig config = {});

  const LedgerConfig& config() const { return config_; }

  const Block& genesis() const;
  const Block* find_block(const Hash256& hash) const;
  const Block& tip_block() const;
  const Hash256& canonical_tip() const { return canonical_tip_; }
  std::uint64_t height() const { return tip_block().height; }
  const std::set<Hash256>& tips() const { return tips_; }
  std::uint64_t cumulative_work(const Hash256& hash) const;

  // Blocks from genesis to the canonical tip.
  std::vector<const Block*> canonical_path() const;
  // Every block (including side forks and orphans) in insertion order.
  const std::vector<Hash256>& insertion_order() const { return insertion_order_; }
  const std::vector<Hash256>& orphans() const { return orphans_; }

  /// Validates and queues a transaction. The transaction may not be included
  /// before height (tip at arrival + inclusion_skip). Throws SubmitRejected.
  Hash256 submit_transaction(Transaction tx, std::uint64_t now, std::uint64_t inclusion_skip = 1);
  const std::deque<MempoolEntry>& mempool() const { return mempool_; }
  // Next nonce expected from `sender`, counting canonical chain and mempool.
  std::uint64_t next_nonce(const Address& sender) const;

  /// Drains eligible mempool entries in FIFO order (up to max_block_txs),
  /// mines a block on the canonical tip and appends it.
  const Block& produce_block(std::uint64_t now);

  // Mines a block on an arbitrary parent without adding it.
  Block build_block_on(const Hash256& parent, std::vector<Transaction> txs, std::uint64_t timestamp,
                       std::optional<std::uint32_t> difficulty = std::nullopt) const;
  // Validates a block against its parent and inserts it, updating fork
  // choice. Throws std::invalid_argument if it is not valid.
  void add_block(Block block);

  std::optional<TxLocation> locate(const Hash256& tx_hash) const;
  std::optional<std::uint64_t> confirmations(const Hash256& tx_hash) const;

  std::shared_ptr<const StateSnapshot> snapshot() const { return snapshot_; }

 private:
  struct Node {
    Block block;
    std::uint64_t work = 0;  // cumulative from genesis
    bool attached = false;
  };

  struct EmptyTag {};
  explicit Chain(EmptyTag) {}
  void insert(Block block);
  void attach_children(const Hash256& parent);
  void update_canonical();
  void rebuild_canonical_index();
  void extend_canonical_index(const Block& block);

  LedgerConfig config_{};
  std::map<Hash256, Node> nodes_;
  std::multimap<Hash256, Hash256> pending_children_;  // prev_hash -> block waiting for it
  std::vector<Hash256> insertion_order_;
  std::vector<Hash256> orphans_;
  std::set<Hash256> tips_;
  Hash256 genesis_hash_{};
  Hash256 canonical_tip_{};

  std::deque<MempoolEntry> mempool_;
  std::set<Hash256> mempool_hashes_;
  std::map<Address, std::uint64_t> mempool_nonces_;

  // Canonical-chain indexes.
  std::map<Hash256, TxLocation> tx_index_;
  std::map<Address, std::uint64_t> chain_nonces_;
  std::shared_ptr<const StateSnapshot> snapshot_;
};

// Tip with the most cumulative work; ties go to the lexicographically
// smaller hash.
Hash256 choose_canonical(const Chain& chain);

VerificationReport verify_chain(const Chain& chain);

// Contract state folded over the canonical chain.
const fabreg::ContractState& read_state(const Chain& chain);

// Folds fabreg transitions over a transaction list. Undecodable calls are
// rejected with MalformedCall.
StateSnapshot fold_transactions(std::span<const Transaction* const> txs);

/// Single-writer / many-reader wrapper. Writers are serialized by an
/// exclusive lock; readers get immutable snapshots.
class SharedLedger {
 public:
  explicit SharedLedger(Chain chain) : chain_(std::move(chain)) {}

  Hash256 submit_transaction(Transaction tx, std::uint64_t now, std::uint64_t inclusion_skip = 1);
  Block produce_block(std::uint64_t now);
  std::shared_ptr<const StateSnapshot> snapshot() const;
  std::uint64_t next_nonce(const Address& sender) const;
  VerificationReport verify() const;

  template <class F>
  auto read(F&& f) const {
    std::shared_lock lock(mutex_);
    return f(static_cast<const Chain&>(chain_));
  }

 private:
  mutable std::shared_mutex mutex_;
  Chain chain_;
};

}  // namespace fabchain::ledger

#endif
