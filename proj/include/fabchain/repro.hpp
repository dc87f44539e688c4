#ifndef FABCHAIN_REPRO_HPP
#define FABCHAIN_REPRO_HPP

#include <cstdint>
#include <string>

// Markdown reports that put simulated latencies next to published reference
// figures. Every number is tagged with where it comes from:
//   [sim]    measured in this run
//   [oracle] closed-form expectation
//   [ref]    published measurement or estimate, quoted as-is
//   [input]  swept simulation parameter
namespace fabchain::repro {

struct Report {
  std::string markdown;
  bool pass = true;
};

/// 12 s deterministic blocks, `skip` blocks until inclusion, 100 jobs.
/// Passes when the largest request-approve duration is within
/// 2 * skip * 12 s and the largest response phase within skip * 12 s.
Report mainnet_estimate(std::uint64_t seed = 7, std::uint64_t skip = 2);

/// 9.17 s blocks, skip 1, propagation delay swept over {0, 3, 6} s.
/// Context only: always passes.
Report ropsten_context(std::uint64_t seed = 7, std::size_t probe_txs = 1000);

}  // namespace fabchain::repro

#endif
