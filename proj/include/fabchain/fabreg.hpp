#ifndef FABCHAIN_FABREG_HPP
#define FABCHAIN_FABREG_HPP

#include "fabchain/bytes.hpp"
#include "fabchain/casstore.hpp"
#include "fabchain/identity.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

/// The print-job registry contract: a deterministic state machine over
/// contract calls. Every transition is pure; rejected calls leave the state
/// untouched.
namespace fabchain::fabreg {

using identity::Address;
using casstore::ContentKey;

struct JobIdTag {};
using JobId = StrongBytes<JobIdTag, 32>;

struct RequestRecord {
  Address from;
  Address printer;
  ContentKey model_hash;
  std::uint64_t date = 0;  // ms

  bool operator==(const RequestRecord&) const = default;
};

// from || printer || model_hash || date (big-endian), 80 bytes.
Bytes encode_request(const RequestRecord& request);
JobId job_id_of(const RequestRecord& request);

struct PrintJobRecord {
  RequestRecord request;
  std::optional<std::uint64_t> print_date;
  bool approved = false;
  bool printed = false;

  bool operator==(const PrintJobRecord&) const = default;
};

struct CreateJob {
  RequestRecord request;
  bool operator==(const CreateJob&) const = default;
};
struct ApproveJob {
  JobId job_id;
  bool operator==(const ApproveJob&) const = default;
};
struct RespondJob {
  JobId job_id;
  std::uint64_t print_date = 0;
  bool operator==(const RespondJob&) const = default;
};

using ContractCall = std::variant<CreateJob, ApproveJob, RespondJob>;

enum class CallKind : std::uint8_t { CreateJob = 0x01, ApproveJob = 0x02, RespondJob = 0x03 };

// Wire form: 1-byte kind tag || fixed-size big-endian payload.
Bytes encode_call(const ContractCall& call);
// nullopt on unknown tag or wrong length.
std::optional<ContractCall> decode_call(ByteView bytes);
// Job a call refers to (for CreateJob, the id of its request).
JobId target_job(const ContractCall& call);
std::string_view kind_name(const ContractCall& call);

enum class Rejection {
  MalformedCall,
  SenderMismatch,
  DuplicateJob,
  UnknownJob,
  AlreadyApproved,
  NotThePrinter,
  NotApproved,
  AlreadyPrinted,
};

std::string_view to_string(Rejection rejection);
std::optional<Rejection> rejection_from_string(std::string_view text);

class ContractState {
 public:
  const std::map<JobId, PrintJobRecord>& jobs() const { return jobs_; }
  const std::vector<JobId>& job_order() const { return job_order_; }
  std::size_t size() const { return job_order_.size(); }

  bool operator==(const ContractState&) const = default;

 private:
  friend std::optional<Rejection> create_job(ContractState&, const Address&, const RequestRecord&);
  friend std::optional<Rejection> approve_job(ContractState&, const Address&, const JobId&);
  friend std::optional<Rejection> respond_job(ContractState&, const Address&, const JobId&, std::uint64_t);
  friend ContractState state_from_json(const nlohmann::ordered_json&);

  std::map<JobId, PrintJobRecord> jobs_;
  std::vector<JobId> job_order_;
};

// In-place transitions. On rejection the state is left exactly as it was.
std::optional<Rejection> create_job(ContractState& state, const Address& sender, const RequestRecord& request);
std::optional<Rejection> approve_job(ContractState& state, const Address& sender, const JobId& job_id);
std::optional<Rejection> respond_job(ContractState& state, const Address& sender, const JobId& job_id,
                                     std::uint64_t print_date);
std::optional<Rejection> apply_in_place(ContractState& state, const Address& sender, const ContractCall& call);

struct ApplyResult {
  ContractState state;
  std::optional<Rejection> rejection;
  bool ok() const { return !rejection; }
};

// Pure transition: returns the successor state, or the unchanged state plus
// the rejection.
ApplyResult apply(ContractState state, const Address& sender, const ContractCall& call);

std::optional<PrintJobRecord> get_job(const ContractState& state, const JobId& job_id);
// Jobs addressed to `printer` that are not yet approved, in creation order.
std::vector<JobId> pending_jobs_for(const ContractState& state, const Address& printer);

nlohmann::ordered_json to_json(const PrintJobRecord& record);
// Jobs listed in job_order; the dump of this value is the canonical state
// serialization.
nlohmann::ordered_json to_json(const ContractState& state);
ContractState state_from_json(const nlohmann::ordered_json& json);
std::string serialize(const ContractState& state);

}  // namespace fabchain::fabreg

#endif
