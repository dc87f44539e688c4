#include "fabchain/fabreg.hpp"

#include <stdexcept>

namespace fabchain::fabreg {

namespace {

constexpr std::size_t kRequestSize = 20 + 20 + 32 + 8;
constexpr std::size_t kJobIdSize = 32;

template <class T>
T read_fixed(ByteView bytes, std::size_t offset) {
  T out;
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
            bytes.begin() + static_cast<std::ptrdiff_t>(offset + T::size), out.bytes.begin());
  return out;
}

RequestRecord decode_request(ByteView bytes) {
  RequestRecord r;
  r.from = read_fixed<Address>(bytes, 0);
  r.printer = read_fixed<Address>(bytes, 20);
  r.model_hash = read_fixed<ContentKey>(bytes, 40);
  r.date = read_u64_be(bytes, 72);
  return r;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

Bytes encode_request(const RequestRecord& request) {
  Bytes out;
  out.reserve(kRequestSize);
  append(out, request.from.view());
  append(out, request.printer.view());
  append(out, request.model_hash.view());
  put_u64_be(out, request.date);
  return out;
}

JobId job_id_of(const RequestRecord& request) { return JobId{sha256(encode_request(request))}; }

Bytes encode_call(const ContractCall& call) {
  Bytes out;
  std::visit(Overloaded{
                 [&](const CreateJob& c) {
                   out.push_back(static_cast<std::uint8_t>(CallKind::CreateJob));
                   append(out, encode_request(c.request));
                 },
                 [&](const ApproveJob& c) {
                   out.push_back(static_cast<std::uint8_t>(CallKind::ApproveJob));
                   append(out, c.job_id.view());
                 },
                 [&](const RespondJob& c) {
                   out.push_back(static_cast<std::uint8_t>(CallKind::RespondJob));
                   append(out, c.job_id.view());
                   put_u64_be(out, c.print_date);
                 },
             },
             call);
  return out;
}

std::optional<ContractCall> decode_call(ByteView bytes) {
  if (bytes.empty()) return std::nullopt;
  const ByteView payload = bytes.subspan(1);
  switch (static_cast<CallKind>(bytes[0])) {
    case CallKind::CreateJob:
      if (payload.size() != kRequestSize) return std::nullopt;
      return CreateJob{decode_request(payload)};
    case CallKind::ApproveJob:
      if (payload.size() != kJobIdSize) return std::nullopt;
      return ApproveJob{read_fixed<JobId>(payload, 0)};
    case CallKind::RespondJob:
      if (payload.size() != kJobIdSize + 8) return std::nullopt;
      return RespondJob{read_fixed<JobId>(payload, 0), read_u64_be(payload, kJobIdSize)};
  }
  return std::nullopt;
}

JobId target_job(const ContractCall& call) {
  return std::visit(Overloaded{
                        [](const CreateJob& c) { return job_id_of(c.request); },
                        [](const ApproveJob& c) { return c.job_id; },
                        [](const RespondJob& c) { return c.job_id; },
                    },
                    call);
}

std::string_view kind_name(const ContractCall& call) {
  return std::visit(Overloaded{
                        [](const CreateJob&) { return std::string_view("create"); },
                        [](const ApproveJob&) { return std::string_view("approve"); },
                        [](const RespondJob&) { return std::string_view("respond"); },
                    },
                    call);
}

namespace {

constexpr std::pair<Rejection, std::string_view> kRejectionNames[] = {
    {Rejection::MalformedCall, "malformed-call"},
    {Rejection::SenderMismatch, "sender-mismatch"},
    {Rejection::DuplicateJob, "duplicate-job"},
    {Rejection::UnknownJob, "unknown-job"},
    {Rejection::AlreadyApproved, "already-approved"},
    {Rejection::NotThePrinter, "not-the-printer"},
    {Rejection::NotApproved, "not-approved"},
    {Rejection::AlreadyPrinted, "already-printed"},
};

}  // namespace

std::string_view to_string(Rejection rejection) {
  for (const auto& [r, name] : kRejectionNames)
    if (r == rejection) return name;
  return "unknown";
}

std::optional<Rejection> rejection_from_string(std::string_view text) {
  for (const auto& [r, name] : kRejectionNames)
    if (name == text) return r;
  return std::nullopt;
}

std::optional<Rejection> create_job(ContractState& state, const Address& sender, const RequestRecord& request) {
  if (sender != request.from) return Rejection::SenderMismatch;
  const JobId id = job_id_of(request);
  if (state.jobs_.contains(id)) return Rejection::DuplicateJob;
  state.jobs_.emplace(id, PrintJobRecord{request, std::nullopt, false, false});
  state.job_order_.push_back(id);
  return std::nullopt;
}

std::optional<Rejection> approve_job(ContractState& state, const Address& sender, const JobId& job_id) {
  const auto it = state.jobs_.find(job_id);
  if (it == state.jobs_.end()) return Rejection::UnknownJob;
  PrintJobRecord& record = it->second;
  if (sender != record.request.printer) return Rejection::NotThePrinter;
  if (record.approved) return Rejection::AlreadyApproved;
  record.approved = true;
  return std::nullopt;
}

std::optional<Rejection> respond_job(ContractState& state, const Address& sender, const JobId& job_id,
                                     std::uint64_t print_date) {
  const auto it = state.jobs_.find(job_id);
  if (it == state.jobs_.end()) return Rejection::UnknownJob;
  PrintJobRecord& record = it->second;
  if (sender != record.request.printer) return Rejection::NotThePrinter;
  if (record.printed) return Rejection::AlreadyPrinted;
  if (!record.approved) return Rejection::NotApproved;
  record.printed = true;
  record.print_date = print_date;
  return std::nullopt;
}

std::optional<Rejection> apply_in_place(ContractState& state, const Address& sender, const ContractCall& call) {
  return std::visit(Overloaded{
                        [&](const CreateJob& c) { return create_job(state, sender, c.request); },
                        [&](const ApproveJob& c) { return approve_job(state, sender, c.job_id); },
                        [&](const RespondJob& c) { return respond_job(state, sender, c.job_id, c.print_date); },
                    },
                    call);
}

ApplyResult apply(ContractState state, const Address& sender, const ContractCall& call) {
  ApplyResult result{std::move(state), std::nullopt};
  result.rejection = apply_in_place(result.state, sender, call);
  return result;
}

std::optional<PrintJobRecord> get_job(const ContractState& state, const JobId& job_id) {
  const auto it = state.jobs().find(job_id);
  if (it == state.jobs().end()) return std::nullopt;
  return it->second;
}

std::vector<JobId> pending_jobs_for(const ContractState& state, const Address& printer) {
  std::vector<JobId> out;
  for (const auto& id : state.job_order()) {
    const PrintJobRecord& record = state.jobs().at(id);
    if (record.request.printer == printer && !record.approved) out.push_back(id);
  }
  return out;
}

nlohmann::ordered_json to_json(const PrintJobRecord& record) {
  nlohmann::ordered_json j;
  j["job_id"] = job_id_of(record.request).hex();
  j["from"] = record.request.from.hex();
  j["printer"] = record.request.printer.hex();
  j["model_hash"] = record.request.model_hash.hex();
  j["date"] = record.request.date;
  j["print_date"] = record.print_date ? nlohmann::ordered_json(*record.print_date) : nlohmann::ordered_json(nullptr);
  j["approved"] = record.approved;
  j["printed"] = record.printed;
  return j;
}

nlohmann::ordered_json to_json(const ContractState& state) {
  nlohmann::ordered_json jobs = nlohmann::ordered_json::array();
  for (const auto& id : state.job_order()) jobs.push_back(to_json(state.jobs().at(id)));
  nlohmann::ordered_json j;
  j["jobs"] = std::move(jobs);
  return j;
}

ContractState state_from_json(const nlohmann::ordered_json& json) {
  ContractState state;
  for (const auto& j : json.at("jobs")) {
    PrintJobRecord record;
    record.request.from = Address::from_hex(j.at("from").get<std::string>());
    record.request.printer = Address::from_hex(j.at("printer").get<std::string>());
    record.request.model_hash = ContentKey::from_hex(j.at("model_hash").get<std::string>());
    record.request.date = j.at("date").get<std::uint64_t>();
    if (!j.at("print_date").is_null()) record.print_date = j.at("print_date").get<std::uint64_t>();
    record.approved = j.at("approved").get<bool>();
    record.printed = j.at("printed").get<bool>();

    const JobId id = job_id_of(record.request);
    if (JobId::from_hex(j.at("job_id").get<std::string>()) != id)
      throw std::invalid_argument("job_id does not match the request digest");
    if (state.jobs_.contains(id)) throw std::invalid_argument("duplicate job in state");
    state.jobs_.emplace(id, record);
    state.job_order_.push_back(id);
  }
  return state;
}

std::string serialize(const ContractState& state) { return to_json(state).dump(); }

}  // namespace fabchain::fabreg
