#include "fabchain/ledger.hpp"

#include <algorithm>
#include <mutex>

namespace fabchain::ledger {

Bytes signing_bytes(const Transaction& tx) {
  Bytes out;
  out.reserve(20 + 8 + tx.call_data.size() + 8);
  append(out, tx.sender.view());
  put_u64_be(out, tx.nonce);
  append(out, tx.call_data);
  put_u64_be(out, tx.submitted_at);
  return out;
}

Hash256 signing_digest(const Transaction& tx) { return sha256(signing_bytes(tx)); }

Hash256 compute_tx_hash(const Transaction& tx) {
  Bytes out = signing_bytes(tx);
  append(out, tx.public_key.view());
  append(out, tx.signature.view());
  return sha256(out);
}

Transaction make_raw_transaction(const KeyPair& key, std::uint64_t nonce, Bytes call_data,
                                 std::uint64_t submitted_at) {
  Transaction tx;
  tx.sender = key.address();
  tx.nonce = nonce;
  tx.call_data = std::move(call_data);
  tx.submitted_at = submitted_at;
  tx.public_key = key.public_key();
  tx.signature = key.sign(signing_digest(tx));
  tx.tx_hash = compute_tx_hash(tx);
  return tx;
}

Transaction make_transaction(const KeyPair& key, std::uint64_t nonce, const fabreg::ContractCall& call,
                             std::uint64_t submitted_at) {
  return make_raw_transaction(key, nonce, fabreg::encode_call(call), submitted_at);
}

std::optional<fabreg::ContractCall> decode_call(const Transaction& tx) { return fabreg::decode_call(tx.call_data); }

std::string_view to_string(TxFault fault) {
  switch (fault) {
    case TxFault::None: return "ok";
    case TxFault::DigestMismatch: return "tx-digest-mismatch";
    case TxFault::SenderMismatch: return "tx-sender-mismatch";
    case TxFault::BadSignature: return "tx-bad-signature";
  }
  return "unknown";
}

TxFault check_transaction(const Transaction& tx) {
  if (compute_tx_hash(tx) != tx.tx_hash) return TxFault::DigestMismatch;
  if (identity::address_of(tx.public_key) != tx.sender) return TxFault::SenderMismatch;
  if (!identity::verify(tx.public_key, signing_digest(tx), tx.signature)) return TxFault::BadSignature;
  return TxFault::None;
}

Hash256 tx_list_digest(std::span<const Transaction> txs) {
  Bytes buf;
  buf.reserve(txs.size() * 32);
  for (const auto& tx : txs) append(buf, tx.tx_hash);
  return sha256(buf);
}

Bytes header_bytes(const Block& block) {
  Bytes out;
  out.reserve(8 + 32 + 8 + 4 + 8 + 32);
  put_u64_be(out, block.height);
  append(out, block.prev_hash);
  put_u64_be(out, block.timestamp);
  put_u32_be(out, block.difficulty);
  put_u64_be(out, block.nonce);
  append(out, tx_list_digest(block.transactions));
  return out;
}

Hash256 compute_block_hash(const Block& block) { return sha256(header_bytes(block)); }

bool meets_difficulty(const Hash256& hash, std::uint32_t difficulty) { return leading_zero_bits(hash) >= difficulty; }

std::uint64_t block_work(std::uint32_t difficulty) {
  if (difficulty >= 63) return std::uint64_t{1} << 63;
  return std::uint64_t{1} << difficulty;
}

namespace {

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t sum = a + b;
  return sum < a ? UINT64_MAX : sum;
}

}  // namespace

Block mine_block(std::uint64_t height, const Hash256& prev_hash, std::uint64_t timestamp,
                 std::uint32_t difficulty, std::vector<Transaction> txs, std::uint64_t max_attempts) {
  if (difficulty > kMaxDifficulty) throw std::invalid_argument("difficulty above supported maximum");
  Block block;
  block.height = height;
  block.prev_hash = prev_hash;
  block.timestamp = timestamp;
  block.difficulty = difficulty;
  block.transactions = std::move(txs);

  // Only the nonce changes between attempts; hash the prefix once.
  Bytes header = header_bytes(block);
  constexpr std::size_t kNonceOffset = 8 + 32 + 8 + 4;
  for (std::uint64_t nonce = 0; nonce < max_attempts; ++nonce) {
    for (int i = 0; i < 8; ++i) header[kNonceOffset + i] = static_cast<std::uint8_t>(nonce >> (56 - 8 * i));
    const Hash256 hash = sha256(header);
    if (meets_difficulty(hash, difficulty)) {
      block.nonce = nonce;
      block.block_hash = hash;
      return block;
    }
  }
  throw MiningExhausted("no nonce satisfied difficulty " + std::to_string(difficulty) + " within " +
                        std::to_string(max_attempts) + " attempts at height " + std::to_string(height));
}

std::string_view to_string(SubmitError error) {
  switch (error) {
    case SubmitError::BadSignature: return "bad-signature";
    case SubmitError::SenderMismatch: return "sender-mismatch";
    case SubmitError::DigestMismatch: return "digest-mismatch";
    case SubmitError::NonceMismatch: return "nonce-mismatch";
    case SubmitError::Duplicate: return "duplicate";
    case SubmitError::FutureTimestamp: return "future-timestamp";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Verification

namespace {

VerificationReport bad(const Block& block, std::uint64_t height, std::string reason) {
  return VerificationReport{false, block.block_hash, height, std::move(reason)};
}

VerificationReport verify_path(std::span<const Block* const> path) {
  std::map<Address, std::uint64_t> nonces;
  std::set<Hash256> seen;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const Block& block = *path[i];
    const auto height = static_cast<std::uint64_t>(i);
    if (block.height != height) return bad(block, height, "height-mismatch");
    const Hash256 expected_prev = i == 0 ? Hash256{} : path[i - 1]->block_hash;
    if (block.prev_hash != expected_prev) return bad(block, height, "prev-hash-mismatch");
    if (block.difficulty > kMaxDifficulty) return bad(block, height, "bad-difficulty");
    for (const auto& tx : block.transactions) {
      if (const TxFault fault = check_transaction(tx); fault != TxFault::None)
        return bad(block, height, std::string(to_string(fault)));
      if (!seen.insert(tx.tx_hash).second) return bad(block, height, "duplicate-tx");
      auto& next = nonces[tx.sender];
      if (tx.nonce != next) return bad(block, height, "tx-nonce-mismatch");
      ++next;
    }
    if (compute_block_hash(block) != block.block_hash) return bad(block, height, "block-hash-mismatch");
    if (!meets_difficulty(block.block_hash, block.difficulty)) return bad(block, height, "pow-failure");
  }
  return {};
}

}  // namespace

VerificationReport verify_blocks(std::span<const Block> path) {
  std::vector<const Block*> ptrs;
  ptrs.reserve(path.size());
  for (const auto& b : path) ptrs.push_back(&b);
  return verify_path(ptrs);
}

VerificationReport verify_chain(const Chain& chain) {
  const auto path = chain.canonical_path();
  VerificationReport report = verify_path(path);
  if (!report.ok) return report;
  if (!chain.orphans().empty()) {
    const Block& orphan = *chain.find_block(chain.orphans().front());
    return VerificationReport{false, orphan.block_hash, orphan.height, "missing-parent"};
  }
  return report;
}

// ---------------------------------------------------------------------------
// State folding

namespace {

void apply_transaction(StateSnapshot& snapshot, const Transaction& tx) {
  Receipt receipt{tx.tx_hash, std::nullopt};
  if (const auto call = decode_call(tx))
    receipt.rejection = fabreg::apply_in_place(snapshot.contract, tx.sender, *call);
  else
    receipt.rejection = fabreg::Rejection::MalformedCall;
  snapshot.receipts.insert_or_assign(tx.tx_hash, receipt);
}

}  // namespace

StateSnapshot fold_transactions(std::span<const Transaction* const> txs) {
  StateSnapshot snapshot;
  for (const Transaction* tx : txs) apply_transaction(snapshot, *tx);
  return snapshot;
}

// ---------------------------------------------------------------------------
// Chain

Chain::Chain(LedgerConfig config) : config_(config) {
  Block genesis = mine_block(0, Hash256{}, config_.genesis_timestamp, config_.difficulty, {},
                             config_.max_pow_attempts);
  insert(std::move(genesis));
}

Chain Chain::import(std::vector<Block> blocks, LedgerConfig config) {
  if (blocks.empty()) throw std::invalid_argument("cannot import an empty block list");
  Chain chain{EmptyTag{}};
  chain.config_ = config;
  for (auto& block : blocks) chain.insert(std::move(block));
  return chain;
}

const Block& Chain::genesis() const { return nodes_.at(genesis_hash_).block; }

const Block* Chain::find_block(const Hash256& hash) const {
  const auto it = nodes_.find(hash);
  return it == nodes_.end() ? nullptr : &it->second.block;
}

const Block& Chain::tip_block() const { return nodes_.at(canonical_tip_).block; }

std::uint64_t Chain::cumulative_work(const Hash256& hash) const { return nodes_.at(hash).work; }

std::vector<const Block*> Chain::canonical_path() const {
  std::vector<const Block*> path;
  Hash256 cursor = canonical_tip_;
  while (true) {
    const Block& block = nodes_.at(cursor).block;
    path.push_back(&block);
    if (cursor == genesis_hash_) break;
    cursor = block.prev_hash;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void Chain::insert(Block block) {
  const Hash256 hash = block.block_hash;
  if (nodes_.contains(hash)) return;
  const bool first = nodes_.empty();
  insertion_order_.push_back(hash);

  if (first) {
    genesis_hash_ = hash;
    canonical_tip_ = hash;
    const std::uint64_t work = block_work(block.difficulty);
    nodes_.emplace(hash, Node{std::move(block), work, true});
    tips_.insert(hash);
    rebuild_canonical_index();
    attach_children(hash);
    update_canonical();
    return;
  }

  const auto parent = nodes_.find(block.prev_hash);
  const bool attached = parent != nodes_.end() && parent->second.attached;
  if (!attached) {
    pending_children_.emplace(block.prev_hash, hash);
    orphans_.push_back(hash);
    nodes_.emplace(hash, Node{std::move(block), 0, false});
    return;
  }

  const std::uint64_t work = saturating_add(parent->second.work, block_work(block.difficulty));
  tips_.erase(block.prev_hash);
  tips_.insert(hash);
  nodes_.emplace(hash, Node{std::move(block), work, true});
  attach_children(hash);
  update_canonical();
}

void Chain::attach_children(const Hash256& parent) {
  std::vector<Hash256> frontier{parent};
  while (!frontier.empty()) {
    const Hash256 current = frontier.back();
    frontier.pop_back();
    auto [begin, end] = pending_children_.equal_range(current);
    std::vector<Hash256> children;
    for (auto it = begin; it != end; ++it) children.push_back(it->second);
    pending_children_.erase(begin, end);
    for (const auto& child : children) {
      Node& node = nodes_.at(child);
      node.attached = true;
      node.work = saturating_add(nodes_.at(current).work, block_work(node.block.difficulty));
      tips_.erase(current);
      tips_.insert(child);
      std::erase(orphans_, child);
      frontier.push_back(child);
    }
  }
}

Hash256 choose_canonical(const Chain& chain) {
  std::optional<Hash256> best;
  std::uint64_t best_work = 0;
  for (const auto& tip : chain.tips()) {
    const std::uint64_t work = chain.cumulative_work(tip);
    // tips() is ordered, so the first tip at a given work is the smaller hash.
    if (!best || work > best_work) {
      best = tip;
      best_work = work;
    }
  }
  return *best;
}

void Chain::update_canonical() {
  const Hash256 best = choose_canonical(*this);
  if (best == canonical_tip_) return;
  const Block& block = nodes_.at(best).block;
  const bool extends = block.prev_hash == canonical_tip_ && best != genesis_hash_;
  canonical_tip_ = best;
  if (extends)
    extend_canonical_index(block);
  else
    rebuild_canonical_index();
}

void Chain::rebuild_canonical_index() {
  tx_index_.clear();
  chain_nonces_.clear();
  std::vector<const Transaction*> txs;
  for (const Block* block : canonical_path()) {
    for (std::size_t i = 0; i < block->transactions.size(); ++i) {
      const Transaction& tx = block->transactions[i];
      tx_index_.insert_or_assign(tx.tx_hash, TxLocation{block->block_hash, block->height, block->timestamp, i});
      ++chain_nonces_[tx.sender];
      txs.push_back(&tx);
    }
  }
  auto snapshot = std::make_shared<StateSnapshot>(fold_transactions(txs));
  snapshot->tip = canonical_tip_;
  snapshot->height = nodes_.at(canonical_tip_).block.height;
  snapshot_ = std::move(snapshot);
}

void Chain::extend_canonical_index(const Block& block) {
  auto snapshot = std::make_shared<StateSnapshot>(*snapshot_);
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const Transaction& tx = block.transactions[i];
    tx_index_.insert_or_assign(tx.tx_hash, TxLocation{block.block_hash, block.height, block.timestamp, i});
    ++chain_nonces_[tx.sender];
    apply_transaction(*snapshot, tx);
  }
  snapshot->tip = block.block_hash;
  snapshot->height = block.height;
  snapshot_ = std::move(snapshot);
}

std::uint64_t Chain::next_nonce(const Address& sender) const {
  std::uint64_t n = 0;
  if (const auto it = chain_nonces_.find(sender); it != chain_nonces_.end()) n += it->second;
  if (const auto it = mempool_nonces_.find(sender); it != mempool_nonces_.end()) n += it->second;
  return n;
}

Hash256 Chain::submit_transaction(Transaction tx, std::uint64_t now, std::uint64_t inclusion_skip) {
  switch (check_transaction(tx)) {
    case TxFault::None: break;
    case TxFault::DigestMismatch: throw SubmitRejected(SubmitError::DigestMismatch, "transaction hash mismatch");
    case TxFault::SenderMismatch:
      throw SubmitRejected(SubmitError::SenderMismatch, "sender is not the address of the public key");
    case TxFault::BadSignature: throw SubmitRejected(SubmitError::BadSignature, "signature does not verify");
  }
  if (mempool_hashes_.contains(tx.tx_hash) || tx_index_.contains(tx.tx_hash))
    throw SubmitRejected(SubmitError::Duplicate, "transaction " + to_hex0x(tx.tx_hash) + " already known");
  const std::uint64_t expected = next_nonce(tx.sender);
  if (tx.nonce != expected)
    throw SubmitRejected(SubmitError::NonceMismatch, "nonce " + std::to_string(tx.nonce) + " but expected " +
                                                         std::to_string(expected));
  if (tx.submitted_at > now)
    throw SubmitRejected(SubmitError::FutureTimestamp, "transaction timestamp is ahead of the ledger clock");

  const std::uint64_t tip_height = height();
  const Hash256 hash = tx.tx_hash;
  ++mempool_nonces_[tx.sender];
  mempool_hashes_.insert(hash);
  mempool_.push_back(MempoolEntry{std::move(tx), now, tip_height, tip_height + std::max<std::uint64_t>(1, inclusion_skip)});
  return hash;
}

const Block& Chain::produce_block(std::uint64_t now) {
  const std::uint64_t new_height = height() + 1;
  std::vector<Transaction> selected;
  while (!mempool_.empty() && selected.size() < config_.max_block_txs) {
    MempoolEntry& entry = mempool_.front();
    // Entries already on the canonical chain (after a reorg) are dropped.
    const bool included = tx_index_.contains(entry.tx.tx_hash);
    if (!included && entry.min_inclusion_height > new_height) break;
    mempool_hashes_.erase(entry.tx.tx_hash);
    if (auto it = mempool_nonces_.find(entry.tx.sender); it != mempool_nonces_.end() && it->second > 0) --it->second;
    if (!included) selected.push_back(std::move(entry.tx));
    mempool_.pop_front();
  }
  Block block = mine_block(new_height, canonical_tip_, now, config_.difficulty, std::move(selected),
                           config_.max_pow_attempts);
  const Hash256 hash = block.block_hash;
  insert(std::move(block));
  return nodes_.at(hash).block;
}

Block Chain::build_block_on(const Hash256& parent, std::vector<Transaction> txs, std::uint64_t timestamp,
                            std::optional<std::uint32_t> difficulty) const {
  const Block& p = nodes_.at(parent).block;
  return mine_block(p.height + 1, parent, timestamp, difficulty.value_or(config_.difficulty), std::move(txs),
                    config_.max_pow_attempts);
}

void Chain::add_block(Block block) {
  if (nodes_.contains(block.block_hash)) throw std::invalid_argument("block already present");
  const auto parent = nodes_.find(block.prev_hash);
  if (parent == nodes_.end() || !parent->second.attached) throw std::invalid_argument("unknown parent block");

  // Validate the branch ending in this block.
  std::vector<const Block*> path;
  for (Hash256 cursor = block.prev_hash;; cursor = nodes_.at(cursor).block.prev_hash) {
    path.push_back(&nodes_.at(cursor).block);
    if (cursor == genesis_hash_) break;
  }
  std::reverse(path.begin(), path.end());
  path.push_back(&block);
  const VerificationReport report = verify_path(path);
  if (!report.ok) throw std::invalid_argument("invalid block: " + report.reason);
  insert(std::move(block));
}

std::optional<TxLocation> Chain::locate(const Hash256& tx_hash) const {
  const auto it = tx_index_.find(tx_hash);
  if (it == tx_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint64_t> Chain::confirmations(const Hash256& tx_hash) const {
  const auto loc = locate(tx_hash);
  if (!loc) return std::nullopt;
  return height() - loc->height + 1;
}

const fabreg::ContractState& read_state(const Chain& chain) { return chain.snapshot()->contract; }

// ---------------------------------------------------------------------------
// SharedLedger

Hash256 SharedLedger::submit_transaction(Transaction tx, std::uint64_t now, std::uint64_t inclusion_skip) {
  std::unique_lock lock(mutex_);
  return chain_.submit_transaction(std::move(tx), now, inclusion_skip);
}

Block SharedLedger::produce_block(std::uint64_t now) {
  std::unique_lock lock(mutex_);
  return chain_.produce_block(now);
}

std::shared_ptr<const StateSnapshot> SharedLedger::snapshot() const {
  std::shared_lock lock(mutex_);
  return chain_.snapshot();
}

std::uint64_t SharedLedger::next_nonce(const Address& sender) const {
  std::shared_lock lock(mutex_);
  return chain_.next_nonce(sender);
}

VerificationReport SharedLedger::verify() const {
  std::shared_lock lock(mutex_);
  return verify_chain(chain_);
}

}  // namespace fabchain::ledger
