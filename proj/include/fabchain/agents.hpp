#ifndef FABCHAIN_AGENTS_HPP
#define FABCHAIN_AGENTS_HPP

#include "fabchain/casstore.hpp"
#include "fabchain/fabreg.hpp"
#include "fabchain/ledger.hpp"

#include <json.hpp>

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

/// Print client and print server. Both agents only talk to the ledger
/// through a LedgerPort: they submit signed transactions and read contract
/// state snapshots. They never share mutable state.
namespace fabchain::agents {

using fabreg::JobId;
using fabreg::RequestRecord;
using identity::Address;
using identity::KeyPair;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::uint64_t now() const = 0;  // ms
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(std::uint64_t start = 0) : now_(start) {}
  std::uint64_t now() const override { return now_; }
  void set(std::uint64_t t) { now_ = t; }
  void advance(std::uint64_t dt) { now_ += dt; }

 private:
  std::uint64_t now_;
};

class SystemClock final : public Clock {
 public:
  std::uint64_t now() const override;
};

class LedgerPort {
 public:
  virtual ~LedgerPort() = default;
  // Throws ledger::SubmitRejected when the ledger refuses the transaction.
  virtual Hash256 submit(ledger::Transaction tx) = 0;
  virtual std::shared_ptr<const ledger::StateSnapshot> snapshot() const = 0;
  virtual std::uint64_t next_nonce(const Address& sender) const = 0;
};

// Port straight onto an in-process chain.
class ChainPort final : public LedgerPort {
 public:
  ChainPort(ledger::Chain& chain, const Clock& clock, std::uint64_t inclusion_skip = 1)
      : chain_(chain), clock_(clock), inclusion_skip_(inclusion_skip) {}

  Hash256 submit(ledger::Transaction tx) override;
  std::shared_ptr<const ledger::StateSnapshot> snapshot() const override { return chain_.snapshot(); }
  std::uint64_t next_nonce(const Address& sender) const override { return chain_.next_nonce(sender); }

 private:
  ledger::Chain& chain_;
  const Clock& clock_;
  std::uint64_t inclusion_skip_;
};

// Key plus a local nonce counter, seeded from the ledger on first use.
class Wallet {
 public:
  explicit Wallet(KeyPair key) : key_(std::move(key)), address_(key_.address()) {}

  const KeyPair& key() const { return key_; }
  const Address& address() const { return address_; }

  // The nonce is consumed only if the port accepts the transaction.
  Hash256 submit(LedgerPort& port, const fabreg::ContractCall& call, std::uint64_t now);

 private:
  KeyPair key_;
  Address address_;
  std::optional<std::uint64_t> next_nonce_;
};

enum class JobPhase { Submitted, AwaitingApproval, AwaitingResponse, Done, Failed };
std::string_view to_string(JobPhase phase);

struct ClientJob {
  RequestRecord request;
  JobId job_id;
  Hash256 request_tx{};
  JobPhase phase = JobPhase::Submitted;
  std::string failure_reason;
  std::map<JobPhase, std::uint64_t> phase_timestamps;

  bool finished() const { return phase == JobPhase::Done || phase == JobPhase::Failed; }
};

struct ClientOptions {
  // Moves a job that has not been approved within this time to Failed.
  std::optional<std::uint64_t> approval_timeout_ms;
};

class PrintClient {
 public:
  explicit PrintClient(KeyPair key, ClientOptions options = {}) : wallet_(std::move(key)), options_(options) {}

  const Address& address() const { return wallet_.address(); }

  /// Stores the model, then signs and submits a CreateJob for it with
  /// date = now. Ledger refusals yield a Failed job; store errors throw.
  ClientJob submit(const Clock& clock, LedgerPort& ledger, casstore::ContentStore& store, const Address& printer,
                   ByteView model);

  /// Reads contract state and moves the job forward. Every phase passed
  /// through is stamped with the detection time.
  ClientJob poll(const Clock& clock, const LedgerPort& ledger, ClientJob job) const;

 private:
  Wallet wallet_;
  ClientOptions options_;
};

struct FixedDuration {
  std::uint64_t ms = 0;
};
struct PerByteDuration {
  double ms_per_byte = 0;
  std::uint64_t base_ms = 0;
};

class PrinterModel {
 public:
  static PrinterModel fixed(std::uint64_t ms);
  static PrinterModel per_byte(double ms_per_byte, std::uint64_t base_ms);

  std::uint64_t duration(std::size_t model_bytes) const;
  const std::variant<FixedDuration, PerByteDuration>& model() const { return model_; }
  std::string describe() const;

 private:
  explicit PrinterModel(std::variant<FixedDuration, PerByteDuration> model) : model_(model) {}
  std::variant<FixedDuration, PerByteDuration> model_;
};

struct ActivePrint {
  JobId job_id;
  std::uint64_t started_at = 0;
  std::uint64_t ends_at = 0;
};

struct Incident {
  std::uint64_t at = 0;
  JobId job_id;
  std::string reason;
};

struct ServerLoop {
  Address printer_address;
  std::uint64_t poll_interval = 1000;
  std::deque<JobId> print_queue;
  std::optional<ActivePrint> printing;
  std::set<JobId> approve_submitted;
  std::set<JobId> responded;
  std::map<JobId, std::size_t> model_sizes;
  std::map<JobId, Hash256> approve_txs;
  std::map<JobId, Hash256> respond_txs;
  std::vector<Incident> incidents;
};

class PrintServer {
 public:
  PrintServer(KeyPair key, std::uint64_t poll_interval);

  const ServerLoop& loop() const { return loop_; }
  const Address& address() const { return wallet_.address(); }

  /// Approves every new pending job for this printer whose model blob is
  /// present and matches its hash, in job order. Jobs whose approval is
  /// visible in state join the print queue.
  void poll(const Clock& clock, LedgerPort& ledger, const casstore::ContentStore& store);

  /// Finishes the running print if due (submitting RespondJob with
  /// print_date = now), then starts the next queued job when idle. Returns
  /// the end time of the print in progress, if any.
  std::optional<std::uint64_t> print_step(const Clock& clock, LedgerPort& ledger, const PrinterModel& printer);

 private:
  void log_incident(std::uint64_t at, const JobId& id, std::string reason);

  Wallet wallet_;
  ServerLoop loop_;
  std::set<std::pair<JobId, std::string>> logged_;
};

struct AuditEntry {
  std::string phase;  // request | approve | response
  Hash256 tx_hash{};
  Address sender;
  std::uint64_t height = 0;
  std::uint64_t block_timestamp = 0;
  std::string rejection;  // empty for accepted calls
};

struct AuditTrail {
  JobId job_id;
  std::vector<AuditEntry> entries;   // accepted calls, chain order
  std::vector<AuditEntry> rejected;  // refused attempts touching the job
  ledger::VerificationReport chain;
  std::optional<fabreg::PrintJobRecord> record;

  bool chain_ok() const { return chain.ok; }
};

// Lifecycle of a job read back from the canonical chain; nullopt when no
// accepted CreateJob for it exists.
std::optional<AuditTrail> audit_job(const ledger::Chain& chain, const JobId& job_id);

nlohmann::ordered_json to_json(const AuditTrail& trail);

}  // namespace fabchain::agents

#endif
