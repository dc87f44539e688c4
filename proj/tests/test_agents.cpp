#include "support.hpp"
#include "tamper.hpp"

#include "fabchain/agents.hpp"
#include "fabchain/simnet.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace fabchain;
using namespace fabchain::agents;
using testsupport::key;

namespace {

struct Rig {
  ledger::Chain chain{testsupport::fast_config(2)};
  ManualClock clock{1000};
  ChainPort port{chain, clock, 1};
  casstore::ContentStore store = casstore::ContentStore::in_memory();
  PrintClient client{key(1)};
  PrintServer server{key(2), 1000};

  void seal() { chain.produce_block(clock.now()); }
};

Bytes model_bytes(std::uint8_t tag, std::size_t n = 64) { return Bytes(n, tag); }

}  // namespace

TEST_CASE("client submit queues a CreateJob for the stored model") {
  Rig rig;
  const Bytes m = model_bytes(7);
  const ClientJob job = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), m);
  REQUIRE(rig.chain.mempool().size() == 1);
  const auto call = ledger::decode_call(rig.chain.mempool().front().tx);
  REQUIRE(call);
  const auto* create = std::get_if<fabreg::CreateJob>(&*call);
  REQUIRE(create);
  CHECK(create->request.model_hash.bytes == testsupport::oracle_sha256(m));
  CHECK(create->request.date == 1000);
  CHECK(job.job_id == fabreg::job_id_of(create->request));
  CHECK(rig.store.contains(create->request.model_hash));
  CHECK(job.phase == JobPhase::Submitted);

  rig.clock.advance(1);
  const ClientJob later = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), m);
  CHECK(later.job_id != job.job_id);
}

TEST_CASE("client poll advances with contract state") {
  Rig rig;
  ClientJob job = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  job = rig.client.poll(rig.clock, rig.port, job);
  CHECK(job.phase == JobPhase::Submitted);

  rig.seal();
  rig.clock.advance(1000);
  job = rig.client.poll(rig.clock, rig.port, job);
  CHECK(job.phase == JobPhase::AwaitingApproval);

  rig.server.poll(rig.clock, rig.port, rig.store);
  rig.clock.advance(1000);
  rig.seal();
  job = rig.client.poll(rig.clock, rig.port, job);
  CHECK(job.phase == JobPhase::AwaitingResponse);

  const PrinterModel printer = PrinterModel::fixed(500);
  rig.server.poll(rig.clock, rig.port, rig.store);
  const auto ends = rig.server.print_step(rig.clock, rig.port, printer);
  REQUIRE(ends);
  CHECK(*ends == rig.clock.now() + 500);
  rig.clock.set(*ends);
  CHECK_FALSE(rig.server.print_step(rig.clock, rig.port, printer));
  rig.seal();
  rig.clock.advance(1000);
  job = rig.client.poll(rig.clock, rig.port, job);
  CHECK(job.phase == JobPhase::Done);
  CHECK(job.phase_timestamps.at(JobPhase::Done) - job.phase_timestamps.at(JobPhase::Submitted) == 3500);

  const auto rec = fabreg::get_job(rig.chain.snapshot()->contract, job.job_id);
  CHECK(rec->print_date == *ends);
}

TEST_CASE("client sees rejected request") {
  Rig rig;
  // The same request twice in one millisecond: the second is a duplicate job.
  ClientJob a = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  ClientJob b = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  rig.seal();
  CHECK(rig.client.poll(rig.clock, rig.port, a).phase == JobPhase::AwaitingApproval);
  b = rig.client.poll(rig.clock, rig.port, b);
  CHECK(b.phase == JobPhase::Failed);
  CHECK(b.failure_reason == "duplicate-job");
}

TEST_CASE("client approval timeout") {
  ledger::Chain chain(testsupport::fast_config(2));
  ManualClock clock(0);
  ChainPort port(chain, clock);
  auto store = casstore::ContentStore::in_memory();
  PrintClient client(key(1), ClientOptions{5000});
  ClientJob job = client.submit(clock, port, store, key(2).address(), model_bytes(1));
  clock.set(4999);
  CHECK(client.poll(clock, port, job).phase == JobPhase::Submitted);
  clock.set(5000);
  job = client.poll(clock, port, job);
  CHECK(job.phase == JobPhase::Failed);
  CHECK(job.failure_reason == "timeout");
}

TEST_CASE("server approves only jobs with a verified blob") {
  Rig rig;
  rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  rig.seal();
  rig.server.poll(rig.clock, rig.port, rig.store);
  CHECK(rig.server.loop().approve_txs.size() == 1);
  CHECK(rig.chain.mempool().size() == 1);

  // A request whose model never reached this store.
  Rig missing;
  auto other_store = casstore::ContentStore::in_memory();
  const ClientJob job = missing.client.submit(missing.clock, missing.port, other_store, missing.server.address(),
                                              model_bytes(2));
  missing.seal();
  missing.server.poll(missing.clock, missing.port, missing.store);
  missing.server.poll(missing.clock, missing.port, missing.store);
  CHECK(missing.server.loop().approve_txs.empty());
  CHECK(missing.chain.mempool().empty());
  REQUIRE(missing.server.loop().incidents.size() == 1);
  CHECK(missing.server.loop().incidents[0].reason == "model blob missing");
  CHECK(fabreg::pending_jobs_for(missing.chain.snapshot()->contract, missing.server.address()) ==
        std::vector<JobId>{job.job_id});
}

TEST_CASE("server refuses a blob that fails verification") {
  testsupport::TempDir dir;
  Rig rig;
  auto disk = casstore::ContentStore::on_disk(dir / "store");
  const ClientJob job = rig.client.submit(rig.clock, rig.port, disk, rig.server.address(), model_bytes(3));
  rig.seal();
  const auto path = disk.path_for(job.request.model_hash);
  std::filesystem::resize_file(path, 10);
  rig.server.poll(rig.clock, rig.port, disk);
  CHECK(rig.server.loop().approve_txs.empty());
  REQUIRE(rig.server.loop().incidents.size() == 1);
  CHECK(rig.server.loop().incidents[0].reason == "model blob fails hash verification");
}

TEST_CASE("server approves in job order") {
  Rig rig;
  std::vector<JobId> ids;
  for (std::uint8_t i = 0; i < 3; ++i) {
    ids.push_back(rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(i)).job_id);
    rig.clock.advance(1);
  }
  rig.seal();
  rig.server.poll(rig.clock, rig.port, rig.store);
  std::vector<JobId> approved;
  for (const auto& entry : rig.chain.mempool()) {
    const auto call = ledger::decode_call(entry.tx);
    approved.push_back(std::get<fabreg::ApproveJob>(*call).job_id);
  }
  CHECK(approved == rig.chain.snapshot()->contract.job_order());
  CHECK(approved == ids);

  rig.seal();
  rig.server.poll(rig.clock, rig.port, rig.store);
  CHECK(rig.server.loop().print_queue.size() == 3);
  const auto ends = rig.server.print_step(rig.clock, rig.port, PrinterModel::fixed(10));
  CHECK(rig.server.loop().printing->job_id == ids[0]);
  CHECK(*ends == rig.clock.now() + 10);
  CHECK(rig.server.loop().print_queue.size() == 2);
}

TEST_CASE("hour-long print responds one virtual hour after approval is seen") {
  Rig rig;
  const ClientJob job = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  rig.seal();
  rig.server.poll(rig.clock, rig.port, rig.store);
  rig.clock.advance(1000);
  rig.seal();
  const std::uint64_t seen = rig.clock.now();
  rig.server.poll(rig.clock, rig.port, rig.store);
  const PrinterModel printer = PrinterModel::fixed(3'600'000);
  const auto ends = rig.server.print_step(rig.clock, rig.port, printer);
  CHECK(*ends == seen + 3'600'000);
  rig.clock.set(*ends);
  rig.server.print_step(rig.clock, rig.port, printer);
  REQUIRE(rig.chain.mempool().size() == 1);
  const auto call = ledger::decode_call(rig.chain.mempool().front().tx);
  CHECK(std::get<fabreg::RespondJob>(*call).job_id == job.job_id);
  CHECK(std::get<fabreg::RespondJob>(*call).print_date == seen + 3'600'000);
}

TEST_CASE("printer model durations") {
  CHECK(PrinterModel::fixed(5).duration(1000) == 5);
  CHECK(PrinterModel::per_byte(0.5, 10).duration(101) == 10 + 51);
  CHECK_THROWS_AS(PrinterModel::fixed(0), std::invalid_argument);
  CHECK_THROWS_AS(PrinterModel::per_byte(-1, 1), std::invalid_argument);
}

TEST_CASE("wallet nonce survives refused submissions") {
  ledger::Chain chain(testsupport::fast_config(2));
  ManualClock clock(0);
  ChainPort port(chain, clock);
  Wallet wallet(key(1));
  const fabreg::RequestRecord r{wallet.address(), key(2).address(), {}, 0};
  wallet.submit(port, fabreg::CreateJob{r}, 0);
  // A future-dated transaction is refused and must not burn a nonce.
  CHECK_THROWS_AS(wallet.submit(port, fabreg::ApproveJob{}, 10), ledger::SubmitRejected);
  wallet.submit(port, fabreg::ApproveJob{}, 0);
  CHECK(chain.next_nonce(wallet.address()) == 2);
}

TEST_CASE("audit trail of completed and pending jobs") {
  simnet::SimConfig cfg;
  cfg.n_jobs = 3;
  cfg.difficulty = 2;
  const auto result = simnet::run_sim(cfg);
  for (const auto& job : result.jobs) {
    const auto trail = audit_job(result.chain, job.job_id);
    REQUIRE(trail);
    REQUIRE(trail->entries.size() == 3);
    CHECK(trail->entries[0].phase == "request");
    CHECK(trail->entries[1].phase == "approve");
    CHECK(trail->entries[2].phase == "response");
    CHECK(trail->entries[0].height < trail->entries[1].height);
    CHECK(trail->entries[1].height < trail->entries[2].height);
    CHECK(trail->chain_ok());
    CHECK(trail->record->printed);
  }

  Rig rig;
  const ClientJob pending = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  rig.seal();
  const auto trail = audit_job(rig.chain, pending.job_id);
  REQUIRE(trail);
  CHECK(trail->entries.size() == 1);
  CHECK_FALSE(audit_job(rig.chain, JobId{}));
}

TEST_CASE("audit lists rejected attempts separately") {
  Rig rig;
  const ClientJob job = rig.client.submit(rig.clock, rig.port, rig.store, rig.server.address(), model_bytes(1));
  rig.seal();
  Wallet intruder(key(3));
  intruder.submit(rig.port, fabreg::ApproveJob{job.job_id}, rig.clock.now());
  rig.seal();
  const auto trail = audit_job(rig.chain, job.job_id);
  REQUIRE(trail);
  CHECK(trail->entries.size() == 1);
  REQUIRE(trail->rejected.size() == 1);
  CHECK(trail->rejected[0].rejection == "not-the-printer");
  CHECK(to_json(*trail)["rejected"][0]["rejection"] == "not-the-printer");
}

TEST_CASE("audit of a tampered chain is flagged") {
  auto blocks = testsupport::honest_ten_block_chain();
  const auto call = fabreg::decode_call(blocks[3].transactions[0].call_data);
  const JobId id = fabreg::target_job(*call);
  blocks[6].transactions[0].signature.bytes[0] ^= 1;
  const auto chain = ledger::Chain::import(blocks, testsupport::fast_config(4));
  const auto trail = audit_job(chain, id);
  REQUIRE(trail);
  CHECK_FALSE(trail->chain_ok());
  CHECK(trail->chain.height == 6);
  CHECK(to_json(*trail)["chain_ok"] == false);
}
