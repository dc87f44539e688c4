#include "support.hpp"

#include "fabchain/simnet.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numeric>

using namespace fabchain;
using namespace fabchain::simnet;

namespace {

SimConfig fast(std::uint64_t jobs) {
  SimConfig c;
  c.n_jobs = jobs;
  c.difficulty = 2;
  return c;
}

double mean_d_tx(const SimMetrics& m) {
  double sum = 0;
  for (const auto& tx : m.per_tx) sum += static_cast<double>(tx.d_tx);
  return sum / static_cast<double>(m.per_tx.size());
}

}  // namespace

TEST_CASE("event queue orders by time then insertion") {
  EventQueue q;
  std::vector<int> order;
  q.schedule(10, EventKind::AgentTick, [&] { order.push_back(2); });
  q.schedule(5, EventKind::BlockProduction, [&] { order.push_back(1); });
  q.schedule(10, EventKind::BlockProduction, [&] { order.push_back(3); });
  while (!q.empty()) q.dispatch_next();
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(q.now() == 10);
  CHECK_THROWS_AS(q.schedule(9, EventKind::AgentTick, [] {}), std::logic_error);
}

TEST_CASE("config validation") {
  SimConfig c;
  c.n_jobs = 0;
  CHECK_THROWS_AS(run_sim(c), std::invalid_argument);
  c = SimConfig{};
  c.d_block = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.inclusion_skip = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("deterministic 12 s blocks with skip 2 stay within the phase estimates") {
  SimConfig c = fast(100);
  c.rng_seed = 7;
  const SimResult r = run_sim(c);
  REQUIRE(r.metrics.per_job.size() == 100);
  for (const auto& m : r.metrics.per_job) {
    CHECK(m.request_approve_ms <= 48000);
    CHECK(m.response_ms <= 24000);
    CHECK(m.request_ms <= 24000);
    // Two sequential transactions, each waiting at least one full interval.
    CHECK(m.request_approve_ms >= 24000);
  }
  CHECK(check_bound(r.metrics, c).ok());
  CHECK(check_bound(r.metrics, c).checked == 300);
}

TEST_CASE("phase timeline is consistent") {
  SimConfig c = fast(20);
  c.rng_seed = 3;
  const SimResult r = run_sim(c);
  for (const auto& m : r.metrics.per_job) {
    CHECK(m.submitted_at <= m.request_included_at);
    CHECK(m.request_included_at <= m.approve_detected_at);
    CHECK(m.approve_detected_at <= m.respond_submitted_at);
    CHECK(m.respond_submitted_at <= m.respond_included_at);
    CHECK(m.respond_included_at <= m.done_at);
    CHECK(m.request_ms == m.request_included_at - m.submitted_at);
    CHECK(m.all_phase_ms == m.done_at - m.submitted_at);
    // The response tx is submitted once the print ends after approval is seen.
    CHECK(m.respond_submitted_at == m.approve_detected_at + 1000);
    CHECK(m.all_phase_ms >= m.request_approve_ms + 1000 + m.response_ms);
    CHECK(m.all_phase_ms < m.request_approve_ms + 1000 + m.response_ms + c.poll_interval);
  }
}

TEST_CASE("same seed gives identical metrics; different seed differs") {
  SimConfig c = fast(30);
  c.rng_seed = 11;
  const SimResult a = run_sim(c);
  const SimResult b = run_sim(c);
  CHECK(jobs_csv(a.metrics) == jobs_csv(b.metrics));
  CHECK(txs_csv(a.metrics) == txs_csv(b.metrics));
  CHECK(a.events == b.events);
  CHECK(a.chain.canonical_tip() == b.chain.canonical_tip());
  c.rng_seed = 12;
  CHECK(txs_csv(run_sim(c).metrics) != txs_csv(a.metrics));
}

TEST_CASE("bound holds with propagation delay and across skips") {
  for (std::uint64_t skip : {1, 2, 3}) {
    for (std::uint64_t delay : {0, 2500, 13000}) {
      SimConfig c = fast(15);
      c.inclusion_skip = skip;
      c.propagation_delay = delay;
      c.rng_seed = skip * 10 + delay;
      const SimResult r = run_sim(c);
      INFO("skip " << skip << " delay " << delay);
      CHECK(check_bound(r.metrics, c).ok());
      for (const auto& tx : r.metrics.per_tx) CHECK(tx.n_until_included >= skip);
    }
  }
}

TEST_CASE("exponential block intervals: bound not applicable, jobs complete") {
  SimConfig c = fast(20);
  c.block_dist = BlockDist::Exponential;
  c.rng_seed = 5;
  const SimResult r = run_sim(c);
  CHECK(r.metrics.per_job.size() == 20);
  CHECK_FALSE(check_bound(r.metrics, c).applicable);

  // Block intervals average roughly d_block.
  const auto path = r.chain.canonical_path();
  const double mean_interval = static_cast<double>(path.back()->timestamp - path[1]->timestamp) /
                               static_cast<double>(path.size() - 2);
  CHECK(mean_interval == Catch::Approx(12000).epsilon(0.25));
}

TEST_CASE("residual oracle: skip 1 gives mean d_tx of half an interval") {
  SimConfig c;
  c.d_block = 12000;
  c.inclusion_skip = 1;
  c.difficulty = 2;
  c.rng_seed = 21;
  const SimResult r = run_latency_probe(c, 1500);
  REQUIRE(r.metrics.per_tx.size() == 1500);
  const double oracle = static_cast<double>(c.d_block) / 2.0;
  CHECK(std::abs(mean_d_tx(r.metrics) - oracle) <= 0.1 * oracle);
  CHECK(check_bound(r.metrics, c).ok());
}

TEST_CASE("residual oracle: skip 2 shifts the mean by one interval") {
  SimConfig c;
  c.inclusion_skip = 2;
  c.difficulty = 2;
  c.rng_seed = 22;
  const SimResult r = run_latency_probe(c, 1200);
  const double oracle = 1.5 * static_cast<double>(c.d_block);
  CHECK(std::abs(mean_d_tx(r.metrics) - oracle) <= 0.1 * oracle);
}

TEST_CASE("propagation delay shifts the residual mean") {
  SimConfig c;
  c.d_block = 9170;
  c.inclusion_skip = 1;
  c.propagation_delay = 6000;
  c.difficulty = 2;
  c.rng_seed = 23;
  const SimResult r = run_latency_probe(c, 1000);
  const double oracle = 9170 / 2.0 + 6000;
  CHECK(std::abs(mean_d_tx(r.metrics) - oracle) <= 0.1 * oracle);
}

TEST_CASE("summary rows") {
  SimConfig c = fast(1);
  const SimResult one = run_sim(c);
  const auto rows = summarize(one.metrics);
  REQUIRE(rows.size() == 6);
  const std::vector<std::string> names{"request_ms", "request_approve_ms", "response_ms",
                                       "all_phase_ms", "d_tx_ms", "n_until_included"};
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].quantity == names[i]);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rows[i].count == 1);
    CHECK(rows[i].stddev == 0);
  }
  CHECK(summarize(SimMetrics{}).empty());
  CHECK(summary_table({}).find("quantity") == 0);

  // Population standard deviation, recomputed directly.
  const SimResult many = run_sim(fast(40));
  const auto stats = summarize(many.metrics);
  std::vector<double> v;
  for (const auto& m : many.metrics.per_job) v.push_back(static_cast<double>(m.request_approve_ms));
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double sq = 0;
  for (double x : v) sq += (x - mean) * (x - mean);
  CHECK(stats[1].mean == Catch::Approx(mean));
  CHECK(stats[1].stddev == Catch::Approx(std::sqrt(sq / v.size())));
  CHECK(stats[1].mean >= 12000);
  CHECK(stats[1].mean <= 48000);

  const auto back = summary_from_json(nlohmann::ordered_json::parse(summary_json(stats).dump()));
  REQUIRE(back.size() == stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) {
    CHECK(back[i].quantity == stats[i].quantity);
    CHECK(back[i].mean == stats[i].mean);
    CHECK(back[i].stddev == stats[i].stddev);
  }
}

TEST_CASE("csv layouts") {
  const SimResult r = run_sim(fast(3));
  const std::string jobs = jobs_csv(r.metrics);
  CHECK(jobs.rfind("job_id,request_ms,request_approve_ms,response_ms,all_phase_ms\n", 0) == 0);
  CHECK(std::count(jobs.begin(), jobs.end(), '\n') == 4);
  const std::string txs = txs_csv(r.metrics);
  CHECK(txs.rfind("tx_hash,submitted_at,included_at,d_tx_ms,n_until_included\n", 0) == 0);
  CHECK(std::count(txs.begin(), txs.end(), '\n') == 10);
}

TEST_CASE("done time matches the event log") {
  const SimResult r = run_sim(fast(5));
  for (std::size_t i = 0; i < r.jobs.size(); ++i) {
    const auto& job = r.jobs[i];
    const std::string detail = to_hex0x(job.job_id.bytes) + " done";
    const auto it = std::find_if(r.events.begin(), r.events.end(),
                                 [&](const LogEvent& e) { return e.kind == "client-phase" && e.detail == detail; });
    REQUIRE(it != r.events.end());
    CHECK(it->at == job.phase_timestamps.at(agents::JobPhase::Done));
    CHECK(r.metrics.per_job[i].all_phase_ms == it->at - job.phase_timestamps.at(agents::JobPhase::Submitted));
  }
}

TEST_CASE("the simulated chain verifies") {
  const SimResult r = run_sim(fast(10));
  CHECK(ledger::verify_chain(r.chain).ok);
  CHECK(r.incidents.empty());
  CHECK(r.chain.snapshot()->contract.size() == 10);
}

TEST_CASE("per-byte printer model lengthens all-phase time") {
  SimConfig c = fast(5);
  c.print_model = agents::PrinterModel::per_byte(10.0, 1000);
  const SimResult r = run_sim(c);
  for (const auto& m : r.metrics.per_job) CHECK(m.respond_submitted_at - m.approve_detected_at == 1000 + 20480);
}
