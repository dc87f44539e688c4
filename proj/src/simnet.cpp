#include "fabchain/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>

namespace fabchain::simnet {

std::string_view to_string(BlockDist dist) {
  return dist == BlockDist::Deterministic ? "deterministic" : "exponential";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::BlockProduction: return "block";
    case EventKind::AgentTick: return "tick";
    case EventKind::PrintCompletion: return "print-complete";
    case EventKind::TxArrival: return "tx-arrival";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (d_block == 0) throw std::invalid_argument("d_block must be positive");
  if (inclusion_skip < 1) throw std::invalid_argument("inclusion_skip must be at least 1");
  if (n_jobs < 1) throw std::invalid_argument("n_jobs must be at least 1");
  if (poll_interval == 0) throw std::invalid_argument("poll_interval must be positive");
  if (difficulty > ledger::kMaxDifficulty) throw std::invalid_argument("difficulty too high");
  if (max_block_txs == 0) throw std::invalid_argument("max_block_txs must be positive");
}

std::uint64_t SimConfig::effective_time_limit() const {
  if (time_limit != 0) return time_limit;
  const std::uint64_t per_job = 4 * (inclusion_skip + 1) * d_block + 4 * propagation_delay +
                                print_model.duration(model_bytes) + 4 * poll_interval + d_block;
  // Generous headroom for exponential block intervals.
  return 50 * n_jobs * per_job;
}

// ---------------------------------------------------------------------------

void EventQueue::schedule(std::uint64_t at, EventKind kind, std::function<void()> action) {
  if (at < now_) throw std::logic_error("cannot schedule an event in the past");
  queue_.push(Entry{at, next_seq_++, kind, std::move(action)});
}

EventQueue::Dispatched EventQueue::dispatch_next() {
  // priority_queue::top is const; copy the handle out before popping.
  Entry entry = queue_.top();
  queue_.pop();
  now_ = entry.at;
  entry.action();
  return Dispatched{entry.at, entry.seq, entry.kind};
}

// ---------------------------------------------------------------------------

namespace {

using agents::ClientJob;
using agents::JobPhase;

identity::KeyPair derived_key(std::string_view role, std::uint64_t seed) {
  Bytes material(role.begin(), role.end());
  put_u64_be(material, seed);
  return identity::KeyPair(sha256(material));
}

class SimClock final : public agents::Clock {
 public:
  explicit SimClock(const EventQueue& queue) : queue_(queue) {}
  std::uint64_t now() const override { return queue_.now(); }

 private:
  const EventQueue& queue_;
};

/// Shared state of one simulation run: the queue, the chain and the
/// bookkeeping needed to turn inclusions into metrics.
class World {
 public:
  explicit World(const SimConfig& config)
      : config_(config),
        rng_(config.rng_seed),
        clock_(queue_),
        chain_(ledger::LedgerConfig{config.difficulty, config.max_block_txs, std::uint64_t{1} << 26, 0}),
        port_(*this) {}

  const SimConfig& config() const { return config_; }
  EventQueue& queue() { return queue_; }
  const agents::Clock& clock() const { return clock_; }
  agents::LedgerPort& port() { return port_; }
  ledger::Chain& chain() { return chain_; }
  std::mt19937_64& rng() { return rng_; }

  void log(std::string kind, std::string detail) { events_.push_back({queue_.now(), std::move(kind), std::move(detail)}); }

  void start_blocks() { schedule_next_block(); }
  void stop_blocks() { blocks_running_ = false; }

  std::size_t uncommitted() const { return pending_.size(); }
  const std::map<Hash256, TxMetric>& included() const { return included_; }

  SimResult finish(std::vector<JobMetric> per_job, std::vector<ClientJob> jobs, std::vector<agents::Incident> incidents) {
    SimResult result{SimMetrics{}, std::move(chain_), std::move(events_), std::move(jobs), std::move(incidents)};
    result.metrics.per_tx = std::move(inclusion_order_);
    result.metrics.per_job = std::move(per_job);
    return result;
  }

  void check_time() const {
    if (queue_.now() > config_.effective_time_limit())
      throw SimError("virtual time ceiling " + std::to_string(config_.effective_time_limit()) +
                     " ms reached with " + std::to_string(pending_.size()) + " transactions uncommitted");
  }

 private:
  class Port final : public agents::LedgerPort {
   public:
    explicit Port(World& world) : world_(world) {}
    Hash256 submit(ledger::Transaction tx) override { return world_.submit(std::move(tx)); }
    std::shared_ptr<const ledger::StateSnapshot> snapshot() const override { return world_.chain_.snapshot(); }
    std::uint64_t next_nonce(const identity::Address& sender) const override {
      return world_.chain_.next_nonce(sender);
    }

   private:
    World& world_;
  };

  Hash256 submit(ledger::Transaction tx) {
    const Hash256 hash = tx.tx_hash;
    const auto call = ledger::decode_call(tx);
    TxMetric metric;
    metric.tx_hash = hash;
    metric.label = call ? std::string(fabreg::kind_name(*call)) : "malformed";
    metric.submitted_at = tx.submitted_at;
    metric.tip_height_at_submission = chain_.height();

    if (config_.propagation_delay == 0) {
      chain_.submit_transaction(std::move(tx), queue_.now(), config_.inclusion_skip);
      pending_.emplace(hash, metric);
      log("tx-submitted", metric.label + " " + to_hex0x(hash));
      return hash;
    }
    pending_.emplace(hash, metric);
    log("tx-submitted", metric.label + " " + to_hex0x(hash));
    auto shared = std::make_shared<ledger::Transaction>(std::move(tx));
    queue_.schedule(queue_.now() + config_.propagation_delay, EventKind::TxArrival, [this, shared] {
      const Hash256 h = shared->tx_hash;
      try {
        chain_.submit_transaction(std::move(*shared), queue_.now(), config_.inclusion_skip);
        log("tx-arrival", to_hex0x(h));
      } catch (const ledger::SubmitRejected& e) {
        pending_.erase(h);
        log("tx-refused", to_hex0x(h) + " " + std::string(ledger::to_string(e.code())));
      }
    });
    return hash;
  }

  std::uint64_t next_interval() {
    if (config_.block_dist == BlockDist::Deterministic) return config_.d_block;
    // Inverse-CDF sampling on 53 random bits.
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double sample = -static_cast<double>(config_.d_block) * std::log1p(-u);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(sample)));
  }

  void schedule_next_block() {
    queue_.schedule(queue_.now() + next_interval(), EventKind::BlockProduction, [this] {
      if (!blocks_running_) return;
      const ledger::Block& block = chain_.produce_block(queue_.now());
      for (const auto& tx : block.transactions) {
        auto it = pending_.find(tx.tx_hash);
        if (it == pending_.end()) continue;
        TxMetric metric = it->second;
        pending_.erase(it);
        metric.included_at = block.timestamp;
        metric.inclusion_height = block.height;
        metric.d_tx = metric.included_at - metric.submitted_at;
        metric.n_until_included = block.height - metric.tip_height_at_submission;
        included_.emplace(metric.tx_hash, metric);
        inclusion_order_.push_back(metric);
      }
      log("block", "height=" + std::to_string(block.height) + " txs=" + std::to_string(block.transactions.size()) +
                       " hash=" + to_hex0x(block.block_hash));
      schedule_next_block();
    });
  }

  SimConfig config_;
  std::mt19937_64 rng_;
  EventQueue queue_;
  SimClock clock_;
  ledger::Chain chain_;
  Port port_;
  bool blocks_running_ = true;
  std::vector<LogEvent> events_;
  std::map<Hash256, TxMetric> pending_;
  std::map<Hash256, TxMetric> included_;
  std::vector<TxMetric> inclusion_order_;
};

Bytes random_model(std::mt19937_64& rng, std::size_t size) {
  Bytes model(size);
  for (auto& b : model) b = static_cast<std::uint8_t>(rng() >> 56);
  return model;
}

}  // namespace

SimResult run_sim(const SimConfig& config) {
  config.validate();
  World world(config);
  auto store = casstore::ContentStore::in_memory();
  agents::PrintClient client(derived_key("fabchain-sim-client", config.rng_seed));
  agents::PrintServer server(derived_key("fabchain-sim-server", config.rng_seed), config.poll_interval);

  std::vector<ClientJob> finished;
  std::optional<ClientJob> active;
  std::uint64_t started = 0;
  std::optional<std::uint64_t> print_wakeup;
  const std::uint64_t start_slots = std::max<std::uint64_t>(1, config.d_block / config.poll_interval);
  // Job starts land on a random poll slot within one block interval.
  const auto random_offset = [&] { return config.poll_interval * (world.rng()() % start_slots); };
  std::uint64_t next_start = random_offset();

  std::function<void()> run_server = [&] {
    server.poll(world.clock(), world.port(), store);
    const auto ends = server.print_step(world.clock(), world.port(), config.print_model);
    if (ends && ends != print_wakeup) {
      world.log("print-start", server.loop().printing->job_id.hex());
      print_wakeup = ends;
      world.queue().schedule(*ends, EventKind::PrintCompletion, [&] {
        world.log("print-complete", "");
        run_server();
      });
    }
  };

  std::function<void()> tick = [&] {
    const std::uint64_t now = world.queue().now();
    if (active) {
      const JobPhase before = active->phase;
      active = client.poll(world.clock(), world.port(), std::move(*active));
      if (active->phase != before)
        world.log("client-phase", to_hex0x(active->job_id.bytes) + " " + std::string(agents::to_string(active->phase)));
      if (active->phase == JobPhase::Failed)
        throw SimError("job " + active->job_id.hex() + " failed: " + active->failure_reason);
      if (active->phase == JobPhase::Done) {
        finished.push_back(std::move(*active));
        active.reset();
        next_start = now + config.poll_interval + random_offset();
      }
    }
    if (!active && started < config.n_jobs && now >= next_start) {
      const Bytes model = random_model(world.rng(), config.model_bytes);
      active = client.submit(world.clock(), world.port(), store, server.address(), model);
      ++started;
      world.log("client-submit", active->job_id.hex());
      if (active->phase == JobPhase::Failed)
        throw SimError("job submission refused: " + active->failure_reason);
    }
    run_server();

    if (finished.size() < config.n_jobs) {
      world.check_time();
      world.queue().schedule(now + config.poll_interval, EventKind::AgentTick, tick);
    }
  };

  world.start_blocks();
  world.queue().schedule(0, EventKind::AgentTick, tick);
  while (finished.size() < config.n_jobs) {
    if (world.queue().empty()) throw SimError("event queue drained before all jobs finished");
    world.queue().dispatch_next();
  }
  world.stop_blocks();

  std::vector<JobMetric> per_job;
  per_job.reserve(finished.size());
  const auto& included = world.included();
  for (const auto& job : finished) {
    JobMetric m;
    m.job_id = job.job_id;
    m.submitted_at = job.phase_timestamps.at(JobPhase::Submitted);
    m.approve_detected_at = job.phase_timestamps.at(JobPhase::AwaitingResponse);
    m.done_at = job.phase_timestamps.at(JobPhase::Done);
    const TxMetric& request = included.at(job.request_tx);
    const TxMetric& respond = included.at(server.loop().respond_txs.at(job.job_id));
    m.request_included_at = request.included_at;
    m.respond_submitted_at = respond.submitted_at;
    m.respond_included_at = respond.included_at;
    m.request_ms = request.d_tx;
    m.request_approve_ms = m.approve_detected_at - m.submitted_at;
    m.response_ms = respond.d_tx;
    m.all_phase_ms = m.done_at - m.submitted_at;
    per_job.push_back(m);
  }
  return world.finish(std::move(per_job), std::move(finished), server.loop().incidents);
}

SimResult run_latency_probe(const SimConfig& config, std::size_t n_txs) {
  config.validate();
  if (n_txs == 0) throw std::invalid_argument("n_txs must be positive");
  World world(config);
  agents::Wallet wallet(derived_key("fabchain-sim-probe", config.rng_seed));
  const identity::Address printer = derived_key("fabchain-sim-server", config.rng_seed).address();

  // Roughly four arrivals per block interval, uniform over the horizon.
  const std::uint64_t horizon = std::max<std::uint64_t>(1, n_txs * config.d_block / 4);
  std::vector<std::uint64_t> times(n_txs);
  for (auto& t : times) t = world.rng()() % horizon;
  std::sort(times.begin(), times.end());

  for (std::size_t i = 0; i < n_txs; ++i) {
    world.queue().schedule(times[i], EventKind::AgentTick, [&world, &wallet, printer, i] {
      Bytes tag;
      put_u64_be(tag, i);
      const fabreg::RequestRecord request{wallet.address(), printer, casstore::key_of(tag), world.queue().now()};
      wallet.submit(world.port(), fabreg::CreateJob{request}, world.queue().now());
    });
  }
  world.start_blocks();
  std::size_t submitted_events = n_txs;
  while (submitted_events > 0 || world.uncommitted() > 0) {
    if (world.queue().empty()) throw SimError("event queue drained before all transactions were included");
    const auto d = world.queue().dispatch_next();
    if (d.kind == EventKind::AgentTick) --submitted_events;
    world.check_time();
  }
  world.stop_blocks();
  return world.finish({}, {}, {});
}

// ---------------------------------------------------------------------------

BoundReport check_bound(const SimMetrics& metrics, const SimConfig& config) {
  BoundReport report;
  report.applicable = config.block_dist == BlockDist::Deterministic;
  if (!report.applicable) return report;
  for (const auto& tx : metrics.per_tx) {
    ++report.checked;
    const std::uint64_t bound = config.d_block * tx.n_until_included + config.propagation_delay;
    if (tx.d_tx > bound) report.violations.push_back(BoundViolation{tx.tx_hash, tx.d_tx, bound});
  }
  return report;
}

namespace {

template <class Range, class Proj>
std::optional<SummaryRow> summarize_column(std::string name, const Range& rows, Proj proj) {
  if (rows.empty()) return std::nullopt;
  SummaryRow row;
  row.quantity = std::move(name);
  row.count = rows.size();
  double sum = 0;
  row.min = static_cast<double>(proj(rows.front()));
  row.max = row.min;
  for (const auto& r : rows) {
    const auto v = static_cast<double>(proj(r));
    sum += v;
    row.min = std::min(row.min, v);
    row.max = std::max(row.max, v);
  }
  row.mean = sum / static_cast<double>(row.count);
  double sq = 0;
  for (const auto& r : rows) {
    const double d = static_cast<double>(proj(r)) - row.mean;
    sq += d * d;
  }
  row.stddev = std::sqrt(sq / static_cast<double>(row.count));
  return row;
}

}  // namespace

std::vector<SummaryRow> summarize(const SimMetrics& metrics) {
  std::vector<SummaryRow> rows;
  const auto add = [&](std::optional<SummaryRow> row) {
    if (row) rows.push_back(std::move(*row));
  };
  const auto& jobs = metrics.per_job;
  const auto& txs = metrics.per_tx;
  add(summarize_column("request_ms", jobs, [](const JobMetric& m) { return m.request_ms; }));
  add(summarize_column("request_approve_ms", jobs, [](const JobMetric& m) { return m.request_approve_ms; }));
  add(summarize_column("response_ms", jobs, [](const JobMetric& m) { return m.response_ms; }));
  add(summarize_column("all_phase_ms", jobs, [](const JobMetric& m) { return m.all_phase_ms; }));
  add(summarize_column("d_tx_ms", txs, [](const TxMetric& m) { return m.d_tx; }));
  add(summarize_column("n_until_included", txs, [](const TxMetric& m) { return m.n_until_included; }));
  return rows;
}

std::string jobs_csv(const SimMetrics& metrics) {
  std::ostringstream out;
  out << "job_id,request_ms,request_approve_ms,response_ms,all_phase_ms\n";
  for (const auto& m : metrics.per_job)
    out << m.job_id.hex() << ',' << m.request_ms << ',' << m.request_approve_ms << ',' << m.response_ms << ','
        << m.all_phase_ms << '\n';
  return out.str();
}

std::string txs_csv(const SimMetrics& metrics) {
  std::ostringstream out;
  out << "tx_hash,submitted_at,included_at,d_tx_ms,n_until_included\n";
  for (const auto& m : metrics.per_tx)
    out << to_hex0x(m.tx_hash) << ',' << m.submitted_at << ',' << m.included_at << ',' << m.d_tx << ','
        << m.n_until_included << '\n';
  return out.str();
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "quantity" << std::right << std::setw(7) << "count" << std::setw(14) << "mean"
      << std::setw(14) << "stddev" << std::setw(14) << "min" << std::setw(14) << "max" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& r : rows)
    out << std::left << std::setw(20) << r.quantity << std::right << std::setw(7) << r.count << std::setw(14)
        << r.mean << std::setw(14) << r.stddev << std::setw(14) << r.min << std::setw(14) << r.max << '\n';
  return out.str();
}

nlohmann::ordered_json summary_json(const std::vector<SummaryRow>& rows) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["quantity"] = r.quantity;
    j["count"] = r.count;
    j["mean"] = r.mean;
    j["stddev"] = r.stddev;
    j["min"] = r.min;
    j["max"] = r.max;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<SummaryRow> summary_from_json(const nlohmann::ordered_json& json) {
  std::vector<SummaryRow> rows;
  for (const auto& j : json) {
    rows.push_back(SummaryRow{j.at("quantity").get<std::string>(), j.at("count").get<std::size_t>(),
                              j.at("mean").get<double>(), j.at("stddev").get<double>(), j.at("min").get<double>(),
                              j.at("max").get<double>()});
  }
  return rows;
}

std::string event_log_text(const std::vector<LogEvent>& events) {
  std::ostringstream out;
  for (const auto& e : events) {
    out << e.at << ' ' << e.kind;
    if (!e.detail.empty()) out << ' ' << e.detail;
    out << '\n';
  }
  return out.str();
}

}  // namespace fabchain::simnet
