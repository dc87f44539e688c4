#include "fabchain/agents.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fabchain::agents {

std::uint64_t SystemClock::now() const {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

Hash256 ChainPort::submit(ledger::Transaction tx) {
  return chain_.submit_transaction(std::move(tx), clock_.now(), inclusion_skip_);
}

Hash256 Wallet::submit(LedgerPort& port, const fabreg::ContractCall& call, std::uint64_t now) {
  if (!next_nonce_) next_nonce_ = port.next_nonce(address_);
  ledger::Transaction tx = ledger::make_transaction(key_, *next_nonce_, call, now);
  const Hash256 hash = port.submit(std::move(tx));
  ++*next_nonce_;
  return hash;
}

std::string_view to_string(JobPhase phase) {
  switch (phase) {
    case JobPhase::Submitted: return "submitted";
    case JobPhase::AwaitingApproval: return "awaiting-approval";
    case JobPhase::AwaitingResponse: return "awaiting-response";
    case JobPhase::Done: return "done";
    case JobPhase::Failed: return "failed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Client

ClientJob PrintClient::submit(const Clock& clock, LedgerPort& ledger, casstore::ContentStore& store,
                              const Address& printer, ByteView model) {
  const std::uint64_t now = clock.now();
  ClientJob job;
  job.request = RequestRecord{wallet_.address(), printer, store.put(model), now};
  job.job_id = fabreg::job_id_of(job.request);
  job.phase_timestamps[JobPhase::Submitted] = now;
  try {
    job.request_tx = wallet_.submit(ledger, fabreg::CreateJob{job.request}, now);
  } catch (const ledger::SubmitRejected& e) {
    job.phase = JobPhase::Failed;
    job.failure_reason = std::string(ledger::to_string(e.code()));
    job.phase_timestamps[JobPhase::Failed] = now;
  }
  return job;
}

ClientJob PrintClient::poll(const Clock& clock, const LedgerPort& ledger, ClientJob job) const {
  if (job.finished()) return job;
  const std::uint64_t now = clock.now();
  const auto snapshot = ledger.snapshot();

  const auto fail = [&](std::string reason) {
    job.phase = JobPhase::Failed;
    job.failure_reason = std::move(reason);
    job.phase_timestamps[JobPhase::Failed] = now;
    return job;
  };

  if (const auto it = snapshot->receipts.find(job.request_tx); it != snapshot->receipts.end() && !it->second.ok())
    return fail(std::string(fabreg::to_string(*it->second.rejection)));

  const auto record = fabreg::get_job(snapshot->contract, job.job_id);
  const auto advance = [&](JobPhase next) {
    job.phase = next;
    job.phase_timestamps[next] = now;
  };
  if (record) {
    if (job.phase == JobPhase::Submitted) advance(JobPhase::AwaitingApproval);
    if (job.phase == JobPhase::AwaitingApproval && record->approved) advance(JobPhase::AwaitingResponse);
    if (job.phase == JobPhase::AwaitingResponse && record->printed) advance(JobPhase::Done);
  }

  if (options_.approval_timeout_ms &&
      (job.phase == JobPhase::Submitted || job.phase == JobPhase::AwaitingApproval) &&
      now - job.phase_timestamps.at(JobPhase::Submitted) >= *options_.approval_timeout_ms)
    return fail("timeout");
  return job;
}

// ---------------------------------------------------------------------------
// Printer model

PrinterModel PrinterModel::fixed(std::uint64_t ms) {
  if (ms == 0) throw std::invalid_argument("print duration must be positive");
  return PrinterModel(FixedDuration{ms});
}

PrinterModel PrinterModel::per_byte(double ms_per_byte, std::uint64_t base_ms) {
  if (!(ms_per_byte >= 0) || !std::isfinite(ms_per_byte))
    throw std::invalid_argument("ms_per_byte must be finite and non-negative");
  if (base_ms == 0) throw std::invalid_argument("base print duration must be positive");
  return PrinterModel(PerByteDuration{ms_per_byte, base_ms});
}

std::uint64_t PrinterModel::duration(std::size_t model_bytes) const {
  if (const auto* f = std::get_if<FixedDuration>(&model_)) return f->ms;
  const auto& p = std::get<PerByteDuration>(model_);
  return p.base_ms + static_cast<std::uint64_t>(std::ceil(p.ms_per_byte * static_cast<double>(model_bytes)));
}

std::string PrinterModel::describe() const {
  std::ostringstream out;
  if (const auto* f = std::get_if<FixedDuration>(&model_))
    out << "fixed(" << f->ms << " ms)";
  else {
    const auto& p = std::get<PerByteDuration>(model_);
    out << "per-byte(" << p.ms_per_byte << " ms/B + " << p.base_ms << " ms)";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Server

PrintServer::PrintServer(KeyPair key, std::uint64_t poll_interval) : wallet_(std::move(key)) {
  if (poll_interval == 0) throw std::invalid_argument("poll interval must be positive");
  loop_.printer_address = wallet_.address();
  loop_.poll_interval = poll_interval;
}

void PrintServer::log_incident(std::uint64_t at, const JobId& id, std::string reason) {
  if (logged_.emplace(id, reason).second) loop_.incidents.push_back(Incident{at, id, std::move(reason)});
}

void PrintServer::poll(const Clock& clock, LedgerPort& ledger, const casstore::ContentStore& store) {
  const std::uint64_t now = clock.now();
  const auto snapshot = ledger.snapshot();
  const auto& contract = snapshot->contract;

  for (const JobId& id : fabreg::pending_jobs_for(contract, loop_.printer_address)) {
    if (loop_.approve_submitted.contains(id)) continue;
    const fabreg::PrintJobRecord& record = contract.jobs().at(id);
    const auto blob = store.get(record.request.model_hash);
    if (!blob) {
      log_incident(now, id, "model blob missing");
      continue;
    }
    if (!casstore::verify(record.request.model_hash, *blob)) {
      log_incident(now, id, "model blob fails hash verification");
      continue;
    }
    try {
      loop_.approve_txs[id] = wallet_.submit(ledger, fabreg::ApproveJob{id}, now);
      loop_.approve_submitted.insert(id);
      loop_.model_sizes[id] = blob->size();
    } catch (const ledger::SubmitRejected& e) {
      log_incident(now, id, "approve refused by ledger: " + std::string(ledger::to_string(e.code())));
    }
  }

  // Approved on chain and not yet handled: queue for printing.
  for (const JobId& id : contract.job_order()) {
    const fabreg::PrintJobRecord& record = contract.jobs().at(id);
    if (record.request.printer != loop_.printer_address || !record.approved || record.printed) continue;
    if (loop_.responded.contains(id)) continue;
    if (loop_.printing && loop_.printing->job_id == id) continue;
    if (std::find(loop_.print_queue.begin(), loop_.print_queue.end(), id) != loop_.print_queue.end()) continue;
    if (!loop_.model_sizes.contains(id)) {
      const auto blob = store.get(record.request.model_hash);
      loop_.model_sizes[id] = blob ? blob->size() : 0;
    }
    loop_.print_queue.push_back(id);
  }
}

std::optional<std::uint64_t> PrintServer::print_step(const Clock& clock, LedgerPort& ledger,
                                                     const PrinterModel& printer) {
  const std::uint64_t now = clock.now();
  if (loop_.printing && now >= loop_.printing->ends_at) {
    const JobId id = loop_.printing->job_id;
    try {
      loop_.respond_txs[id] = wallet_.submit(ledger, fabreg::RespondJob{id, now}, now);
      loop_.responded.insert(id);
      loop_.printing.reset();
    } catch (const ledger::SubmitRejected& e) {
      // Keep the print marked finished-but-unreported; retried next step.
      log_incident(now, id, "respond refused by ledger: " + std::string(ledger::to_string(e.code())));
    }
  }
  if (!loop_.printing && !loop_.print_queue.empty()) {
    const JobId id = loop_.print_queue.front();
    loop_.print_queue.pop_front();
    const std::uint64_t duration = printer.duration(loop_.model_sizes[id]);
    loop_.printing = ActivePrint{id, now, now + duration};
  }
  if (loop_.printing) return loop_.printing->ends_at;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Audit

std::optional<AuditTrail> audit_job(const ledger::Chain& chain, const JobId& job_id) {
  AuditTrail trail;
  trail.job_id = job_id;
  const auto snapshot = chain.snapshot();

  for (const ledger::Block* block : chain.canonical_path()) {
    for (const auto& tx : block->transactions) {
      const auto call = ledger::decode_call(tx);
      if (!call || fabreg::target_job(*call) != job_id) continue;
      AuditEntry entry;
      const std::string_view kind = fabreg::kind_name(*call);
      entry.phase = kind == "create" ? "request" : kind == "approve" ? "approve" : "response";
      entry.tx_hash = tx.tx_hash;
      entry.sender = tx.sender;
      entry.height = block->height;
      entry.block_timestamp = block->timestamp;
      const auto receipt = snapshot->receipts.find(tx.tx_hash);
      if (receipt != snapshot->receipts.end() && !receipt->second.ok()) {
        entry.rejection = std::string(fabreg::to_string(*receipt->second.rejection));
        trail.rejected.push_back(std::move(entry));
      } else {
        trail.entries.push_back(std::move(entry));
      }
    }
  }
  if (trail.entries.empty() || trail.entries.front().phase != "request") return std::nullopt;
  trail.chain = ledger::verify_chain(chain);
  trail.record = fabreg::get_job(snapshot->contract, job_id);
  return trail;
}

namespace {

nlohmann::ordered_json entry_json(const AuditEntry& e) {
  nlohmann::ordered_json j;
  j["phase"] = e.phase;
  j["tx_hash"] = to_hex0x(e.tx_hash);
  j["sender"] = e.sender.hex();
  j["height"] = e.height;
  j["block_timestamp"] = e.block_timestamp;
  if (!e.rejection.empty()) j["rejection"] = e.rejection;
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const AuditTrail& trail) {
  nlohmann::ordered_json j;
  j["job_id"] = trail.job_id.hex();
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : trail.entries) j["entries"].push_back(entry_json(e));
  j["rejected"] = nlohmann::ordered_json::array();
  for (const auto& e : trail.rejected) j["rejected"].push_back(entry_json(e));
  j["record"] = trail.record ? fabreg::to_json(*trail.record) : nlohmann::ordered_json(nullptr);
  j["chain_ok"] = trail.chain.ok;
  if (!trail.chain.ok) {
    j["first_bad_height"] = trail.chain.height;
    j["first_bad_block"] = to_hex0x(*trail.chain.first_bad_block);
    j["reason"] = trail.chain.reason;
  }
  return j;
}

}  // namespace fabchain::agents
