#ifndef FABCHAIN_TESTS_TAMPER_HPP
#define FABCHAIN_TESTS_TAMPER_HPP

// Mutation harness: an honest 10-block chain with one transaction per block,
// and an enumerator over every byte of every field of one transaction.

#include "support.hpp"

#include "fabchain/block_log.hpp"
#include "fabchain/ledger.hpp"

#include <functional>

namespace testsupport {

// Heights 0..9; blocks 1..9 each carry one CreateJob transaction.
inline std::vector<fabchain::ledger::Block> honest_ten_block_chain() {
  using namespace fabchain;
  ledger::Chain chain(fast_config(4));
  const auto client = key(2000);
  const auto printer = key(2001);
  for (std::uint64_t h = 1; h <= 9; ++h) {
    fabreg::RequestRecord r{client.address(), printer.address(), casstore::key_of(Bytes{std::uint8_t(h)}), h * 100};
    chain.submit_transaction(ledger::make_transaction(client, h - 1, fabreg::CreateJob{r}, h * 100), h * 100, 1);
    chain.produce_block(h * 100 + 50);
  }
  return ledger::export_blocks(chain);
}

struct Mutation {
  std::string field;
  std::size_t byte = 0;
};

// Calls `visit` once per byte of every field of `tx`, with that byte XOR 0xff
// applied to a copy.
inline void for_each_tx_mutation(const fabchain::ledger::Transaction& tx,
                                 const std::function<void(const Mutation&, const fabchain::ledger::Transaction&)>& visit) {
  using fabchain::ledger::Transaction;
  const auto flip_span = [&](const std::string& name, auto get) {
    Transaction copy = tx;
    const std::size_t n = get(copy).size();
    for (std::size_t i = 0; i < n; ++i) {
      Transaction m = tx;
      get(m)[i] ^= 0xff;
      visit(Mutation{name, i}, m);
    }
  };
  const auto flip_u64 = [&](const std::string& name, std::uint64_t Transaction::*field) {
    for (std::size_t i = 0; i < 8; ++i) {
      Transaction m = tx;
      m.*field ^= std::uint64_t{0xff} << (8 * (7 - i));
      visit(Mutation{name, i}, m);
    }
  };
  flip_span("sender", [](Transaction& t) -> auto& { return t.sender.bytes; });
  flip_u64("nonce", &Transaction::nonce);
  flip_span("call", [](Transaction& t) -> auto& { return t.call_data; });
  flip_u64("submitted_at", &Transaction::submitted_at);
  flip_span("public_key", [](Transaction& t) -> auto& { return t.public_key.bytes; });
  flip_span("signature", [](Transaction& t) -> auto& { return t.signature.bytes; });
  flip_span("tx_hash", [](Transaction& t) -> auto& { return t.tx_hash; });
}

}  // namespace testsupport

#endif
