#ifndef FABCHAIN_SIMNET_HPP
#define FABCHAIN_SIMNET_HPP

#include "fabchain/agents.hpp"
#include "fabchain/ledger.hpp"

#include <json.hpp>

#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

/// Deterministic discrete-event simulation of one print client, one print
/// server and the ledger, driven by a virtual millisecond clock.
///
/// Block production follows the configured interval distribution. A
/// transaction that reaches the ledger while the tip is at height h may be
/// included no earlier than block h + inclusion_skip, so under deterministic
/// intervals d_tx <= d_block * n_until_included always holds.
namespace fabchain::simnet {

using agents::PrinterModel;

enum class BlockDist { Deterministic, Exponential };
std::string_view to_string(BlockDist dist);

struct SimConfig {
  std::uint64_t d_block = 12000;
  BlockDist block_dist = BlockDist::Deterministic;
  std::uint64_t inclusion_skip = 2;
  std::uint64_t propagation_delay = 0;
  std::uint64_t n_jobs = 100;
  std::uint64_t rng_seed = 0;
  std::uint64_t poll_interval = 1000;
  PrinterModel print_model = PrinterModel::fixed(1000);
  std::uint32_t difficulty = 8;
  std::size_t model_bytes = 2048;
  std::size_t max_block_txs = 1000;
  // Virtual-time ceiling; 0 derives one from the other parameters.
  std::uint64_t time_limit = 0;

  // Throws std::invalid_argument.
  void validate() const;
  std::uint64_t effective_time_limit() const;
};

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EventKind { BlockProduction, AgentTick, PrintCompletion, TxArrival };
std::string_view to_string(EventKind kind);

// Time-ordered event queue; equal times dispatch in scheduling order.
class EventQueue {
 public:
  struct Dispatched {
    std::uint64_t at = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::AgentTick;
  };

  // Throws std::logic_error when `at` lies before the current time.
  void schedule(std::uint64_t at, EventKind kind, std::function<void()> action);
  bool empty() const { return queue_.empty(); }
  std::size_t size() const { return queue_.size(); }
  std::uint64_t now() const { return now_; }
  std::uint64_t next_time() const { return queue_.top().at; }
  Dispatched dispatch_next();

 private:
  struct Entry {
    std::uint64_t at;
    std::uint64_t seq;
    EventKind kind;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const { return a.at != b.at ? a.at > b.at : a.seq > b.seq; }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  std::uint64_t now_ = 0;
  std::uint64_t next_seq_ = 0;
};

struct TxMetric {
  Hash256 tx_hash{};
  std::string label;  // create | approve | respond | probe
  std::uint64_t submitted_at = 0;
  std::uint64_t included_at = 0;
  std::uint64_t d_tx = 0;
  std::uint64_t n_until_included = 0;
  std::uint64_t tip_height_at_submission = 0;
  std::uint64_t inclusion_height = 0;
};

struct JobMetric {
  fabreg::JobId job_id;
  std::uint64_t request_ms = 0;          // request tx d_tx
  std::uint64_t request_approve_ms = 0;  // submit -> client sees approval
  std::uint64_t response_ms = 0;         // response tx d_tx
  std::uint64_t all_phase_ms = 0;        // submit -> client sees printed

  // Timeline behind the four durations.
  std::uint64_t submitted_at = 0;
  std::uint64_t request_included_at = 0;
  std::uint64_t approve_detected_at = 0;
  std::uint64_t respond_submitted_at = 0;
  std::uint64_t respond_included_at = 0;
  std::uint64_t done_at = 0;
};

struct SimMetrics {
  std::vector<TxMetric> per_tx;  // inclusion order
  std::vector<JobMetric> per_job;
};

struct LogEvent {
  std::uint64_t at = 0;
  std::string kind;
  std::string detail;

  bool operator==(const LogEvent&) const = default;
};

struct SimResult {
  SimMetrics metrics;
  ledger::Chain chain;
  std::vector<LogEvent> events;
  std::vector<agents::ClientJob> jobs;
  std::vector<agents::Incident> incidents;
};

/// Runs n_jobs print jobs back to back through the full four-phase sequence.
/// Throws SimError if the virtual-time ceiling is reached first.
SimResult run_sim(const SimConfig& config);

/// Transaction-latency workload: n_txs CreateJob calls submitted at
/// uniformly random times. Produces per-transaction metrics only.
SimResult run_latency_probe(const SimConfig& config, std::size_t n_txs);

struct BoundViolation {
  Hash256 tx_hash{};
  std::uint64_t d_tx = 0;
  std::uint64_t bound = 0;
};

struct BoundReport {
  bool applicable = true;  // only deterministic block intervals
  std::size_t checked = 0;
  std::vector<BoundViolation> violations;
  bool ok() const { return violations.empty(); }
};

// d_tx <= d_block * n_until_included + propagation_delay for every tx.
BoundReport check_bound(const SimMetrics& metrics, const SimConfig& config);

struct SummaryRow {
  std::string quantity;
  std::size_t count = 0;
  double mean = 0;
  double stddev = 0;  // population
  double min = 0;
  double max = 0;
};

// One row per measured quantity with at least one sample, fixed order:
// request_ms, request_approve_ms, response_ms, all_phase_ms, d_tx_ms,
// n_until_included.
std::vector<SummaryRow> summarize(const SimMetrics& metrics);

std::string jobs_csv(const SimMetrics& metrics);
std::string txs_csv(const SimMetrics& metrics);
std::string summary_table(const std::vector<SummaryRow>& rows);
nlohmann::ordered_json summary_json(const std::vector<SummaryRow>& rows);
std::vector<SummaryRow> summary_from_json(const nlohmann::ordered_json& json);
std::string event_log_text(const std::vector<LogEvent>& events);

}  // namespace fabchain::simnet

#endif
