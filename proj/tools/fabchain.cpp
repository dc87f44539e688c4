// fabchain: command-line front end for the print-job ledger.
//
// Exit codes: 0 success, 1 usage/config error, 2 not found, 3 integrity
// failure.

#include "fabchain/agents.hpp"
#include "fabchain/block_log.hpp"
#include "fabchain/casstore.hpp"
#include "fabchain/identity.hpp"
#include "fabchain/ledger.hpp"
#include "fabchain/repro.hpp"
#include "fabchain/simnet.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace fabchain;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotFound = 2;
constexpr int kExitIntegrity = 3;

enum class Format { Text, Json, Csv };

struct GlobalOptions {
  std::string chain_path;
  std::string store_root;
  Format format = Format::Text;
  std::optional<std::uint64_t> seed;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  return Bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path require_chain_path(const GlobalOptions& g) {
  if (g.chain_path.empty()) throw UsageError("--chain is required");
  return g.chain_path;
}

casstore::ContentStore open_store(const GlobalOptions& g) {
  if (g.store_root.empty()) throw UsageError("--store is required");
  return casstore::ContentStore::on_disk(g.store_root);
}

std::string verdict_line(const ledger::VerificationReport& report) {
  if (report.ok) return "chain: OK";
  return "chain: FAILED at height " + std::to_string(report.height) + " (" + report.reason + ") block " +
         to_hex0x(*report.first_bad_block);
}

nlohmann::ordered_json verdict_json(const ledger::VerificationReport& report) {
  nlohmann::ordered_json j;
  j["ok"] = report.ok;
  if (!report.ok) {
    j["height"] = report.height;
    j["block"] = to_hex0x(*report.first_bad_block);
    j["reason"] = report.reason;
  }
  return j;
}

// Loads and verifies an existing chain log. Returns nullopt after printing a
// diagnostic when the log cannot be parsed.
std::optional<ledger::Chain> load_for_read(const fs::path& path, const GlobalOptions& g) {
  if (!fs::exists(path)) throw UsageError("chain log " + path.string() + " does not exist");
  try {
    return ledger::load_chain(path);
  } catch (const ledger::LogParseError& e) {
    if (g.format == Format::Json)
      std::cout << nlohmann::ordered_json{{"ok", false}, {"reason", "parse-error"}, {"detail", e.what()}}.dump()
                << '\n';
    else
      std::cout << "chain: FAILED parse error at " << e.what() << '\n';
    return std::nullopt;
  } catch (const std::invalid_argument& e) {
    std::cout << "chain: FAILED " << e.what() << '\n';
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------

int cmd_keygen(const GlobalOptions& g, const std::string& out) {
  const std::optional<identity::Seed> seed =
      g.seed ? std::optional(identity::seed_from_u64(*g.seed)) : std::nullopt;
  const auto key = identity::keygen(seed);
  if (fs::exists(out)) {
    std::cerr << "error: " << out << " already exists; refusing to overwrite\n";
    return kExitUsage;
  }
  identity::save_key_file(out, key);
  if (g.format == Format::Json)
    std::cout << nlohmann::ordered_json{{"address", key.address().hex()}, {"key_file", out}}.dump() << '\n';
  else
    std::cout << key.address().hex() << '\n';
  return kExitOk;
}

struct SimFlags {
  std::uint64_t d_block = 12000;
  std::uint64_t skip = 2;
  std::uint64_t jobs = 100;
  std::string dist = "deterministic";
  std::uint64_t propagation = 0;
  std::uint64_t poll = 1000;
  std::uint64_t print_ms = 1000;
  double print_ms_per_byte = 0;
  std::uint64_t difficulty = 8;
  std::size_t model_bytes = 2048;
  std::string out_dir;
  std::string events;
};

int cmd_run_sim(const GlobalOptions& g, const SimFlags& f) {
  simnet::SimConfig config;
  config.d_block = f.d_block;
  config.inclusion_skip = f.skip;
  config.n_jobs = f.jobs;
  config.block_dist = f.dist == "exponential" ? simnet::BlockDist::Exponential : simnet::BlockDist::Deterministic;
  config.propagation_delay = f.propagation;
  config.poll_interval = f.poll;
  config.rng_seed = g.seed.value_or(0);
  config.difficulty = static_cast<std::uint32_t>(f.difficulty);
  config.model_bytes = f.model_bytes;
  try {
    config.print_model = f.print_ms_per_byte > 0 ? agents::PrinterModel::per_byte(f.print_ms_per_byte, f.print_ms)
                                                 : agents::PrinterModel::fixed(f.print_ms);
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto result = simnet::run_sim(config);
  const auto rows = simnet::summarize(result.metrics);
  const auto bound = simnet::check_bound(result.metrics, config);

  nlohmann::ordered_json bound_json;
  bound_json["applicable"] = bound.applicable;
  bound_json["checked"] = bound.checked;
  bound_json["violations"] = bound.violations.size();
  nlohmann::ordered_json summary;
  summary["config"] = {{"d_block", config.d_block},
                       {"block_dist", simnet::to_string(config.block_dist)},
                       {"skip", config.inclusion_skip},
                       {"propagation_delay", config.propagation_delay},
                       {"jobs", config.n_jobs},
                       {"seed", config.rng_seed},
                       {"poll_interval", config.poll_interval},
                       {"print_model", config.print_model.describe()}};
  summary["summary"] = simnet::summary_json(rows);
  summary["bound"] = bound_json;

  std::string bound_text = "bound d_tx <= d_block * n_until_included: ";
  if (!bound.applicable)
    bound_text += "not applicable (exponential block intervals)";
  else
    bound_text += std::to_string(bound.violations.size()) + " violations in " + std::to_string(bound.checked) +
                  " transactions";

  if (!f.out_dir.empty()) {
    fs::create_directories(f.out_dir);
    const fs::path dir = f.out_dir;
    write_file(dir / "jobs.csv", simnet::jobs_csv(result.metrics));
    write_file(dir / "txs.csv", simnet::txs_csv(result.metrics));
    write_file(dir / "summary.txt", simnet::summary_table(rows) + bound_text + "\n");
    write_file(dir / "summary.json", summary.dump(2) + "\n");
  }
  if (!f.events.empty()) write_file(f.events, simnet::event_log_text(result.events));
  if (!g.chain_path.empty()) {
    const auto blocks = ledger::export_blocks(result.chain);
    ledger::write_block_log(g.chain_path, blocks);
  }

  switch (g.format) {
    case Format::Json: std::cout << summary.dump(2) << '\n'; break;
    case Format::Csv: std::cout << simnet::jobs_csv(result.metrics); break;
    case Format::Text: std::cout << simnet::summary_table(rows) << bound_text << '\n'; break;
  }
  return bound.ok() ? kExitOk : kExitIntegrity;
}

// Opens (or creates) the chain log for writing. Existing logs must verify.
std::optional<ledger::Chain> open_for_write(const fs::path& path, const GlobalOptions& g,
                                            const ledger::LedgerConfig& config) {
  if (!fs::exists(path) || fs::file_size(path) == 0) {
    ledger::Chain chain(config);
    ledger::append_block(path, chain.genesis());
    return chain;
  }
  auto chain = load_for_read(path, g);
  if (!chain) return std::nullopt;
  const auto report = ledger::verify_chain(*chain);
  if (!report.ok) {
    std::cout << verdict_line(report) << '\n';
    return std::nullopt;
  }
  return ledger::Chain::import(ledger::export_blocks(*chain), config);
}

struct NodeFlags {
  std::string key;
  std::optional<std::uint64_t> now;
  std::uint64_t difficulty = 8;
};

int cmd_submit(const GlobalOptions& g, const NodeFlags& n, const std::string& printer_hex, const std::string& model) {
  const fs::path path = require_chain_path(g);
  const auto key = identity::load_key_file(n.key);
  identity::Address printer;
  try {
    printer = identity::Address::from_hex(printer_hex);
  } catch (const std::invalid_argument& e) {
    throw UsageError("--printer: " + std::string(e.what()));
  }
  const Bytes blob = read_file(model);
  auto store = open_store(g);

  const fs::path lock_path = path.string() + ".lock";
  ledger::FileLock lock(lock_path);
  const ledger::LedgerConfig config{static_cast<std::uint32_t>(n.difficulty)};
  auto chain = open_for_write(path, g, config);
  if (!chain) return kExitIntegrity;

  agents::ManualClock clock(n.now.value_or(agents::SystemClock().now()));
  agents::ChainPort port(*chain, clock);
  agents::PrintClient client(key);
  const auto job = client.submit(clock, port, store, printer, blob);
  if (job.phase == agents::JobPhase::Failed) {
    std::cerr << "error: ledger refused the request: " << job.failure_reason << '\n';
    return kExitUsage;
  }
  const ledger::Block& block = chain->produce_block(clock.now());
  ledger::append_block(path, block);

  if (g.format == Format::Json)
    std::cout << nlohmann::ordered_json{{"job_id", job.job_id.hex()},
                                        {"tx_hash", to_hex0x(job.request_tx)},
                                        {"height", block.height},
                                        {"model_hash", job.request.model_hash.hex()}}
                     .dump()
              << '\n';
  else
    std::cout << job.job_id.hex() << '\n';
  return kExitOk;
}

int cmd_serve(const GlobalOptions& g, const NodeFlags& n, std::uint64_t print_ms) {
  const fs::path path = require_chain_path(g);
  const auto key = identity::load_key_file(n.key);
  auto store = open_store(g);
  agents::PrinterModel printer = agents::PrinterModel::fixed(std::max<std::uint64_t>(1, print_ms));

  const fs::path lock_path = path.string() + ".lock";
  ledger::FileLock lock(lock_path);
  const ledger::LedgerConfig config{static_cast<std::uint32_t>(n.difficulty)};
  auto chain = open_for_write(path, g, config);
  if (!chain) return kExitIntegrity;

  agents::ManualClock clock(n.now.value_or(agents::SystemClock().now()));
  agents::ChainPort port(*chain, clock);
  agents::PrintServer server(key, 1000);
  std::vector<ledger::Block> produced;
  const auto seal = [&] {
    if (!chain->mempool().empty()) produced.push_back(chain->produce_block(clock.now()));
  };

  // Approve, then print and respond to everything approved.
  server.poll(clock, port, store);
  seal();
  server.poll(clock, port, store);
  while (true) {
    const auto ends = server.print_step(clock, port, printer);
    if (!ends) break;
    clock.set(std::max(clock.now(), *ends));
  }
  seal();
  for (const auto& block : produced) ledger::append_block(path, block);

  const auto& loop = server.loop();
  if (g.format == Format::Json) {
    nlohmann::ordered_json j;
    j["printer"] = server.address().hex();
    j["approved"] = nlohmann::ordered_json::array();
    for (const auto& [id, tx] : loop.approve_txs) j["approved"].push_back(id.hex());
    j["responded"] = nlohmann::ordered_json::array();
    for (const auto& [id, tx] : loop.respond_txs) j["responded"].push_back(id.hex());
    j["incidents"] = nlohmann::ordered_json::array();
    for (const auto& inc : loop.incidents) j["incidents"].push_back({{"job_id", inc.job_id.hex()}, {"reason", inc.reason}});
    j["blocks"] = produced.size();
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "printer " << server.address().hex() << ": approved " << loop.approve_txs.size() << ", responded "
              << loop.respond_txs.size() << ", blocks " << produced.size() << '\n';
    for (const auto& inc : loop.incidents) std::cout << "incident " << inc.job_id.hex() << ": " << inc.reason << '\n';
  }
  return kExitOk;
}

int cmd_audit(const GlobalOptions& g, const std::string& job_hex) {
  const fs::path path = require_chain_path(g);
  fabreg::JobId job_id;
  try {
    job_id = fabreg::JobId::from_hex(job_hex);
  } catch (const std::invalid_argument& e) {
    throw UsageError("--job: " + std::string(e.what()));
  }
  const auto chain = load_for_read(path, g);
  if (!chain) return kExitIntegrity;

  const auto trail = agents::audit_job(*chain, job_id);
  const auto report = ledger::verify_chain(*chain);
  if (!trail) {
    std::cout << "job " << job_id.hex() << ": not found\n" << verdict_line(report) << '\n';
    return report.ok ? kExitNotFound : kExitIntegrity;
  }

  if (g.format == Format::Json) {
    std::cout << agents::to_json(*trail).dump(2) << '\n';
  } else if (g.format == Format::Csv) {
    std::cout << "phase,tx_hash,height,block_timestamp\n";
    for (const auto& e : trail->entries)
      std::cout << e.phase << ',' << to_hex0x(e.tx_hash) << ',' << e.height << ',' << e.block_timestamp << '\n';
  } else {
    std::cout << "job " << job_id.hex() << '\n';
    for (const auto& e : trail->entries) {
      char line[96];
      std::snprintf(line, sizeof line, "  %-9s height %-6llu t=%-14llu ", e.phase.c_str(),
                    static_cast<unsigned long long>(e.height), static_cast<unsigned long long>(e.block_timestamp));
      std::cout << line << "tx " << to_hex0x(e.tx_hash) << '\n';
    }
    for (const auto& e : trail->rejected)
      std::cout << "  rejected " << e.phase << " at height " << e.height << " by " << e.sender.hex() << ": "
                << e.rejection << '\n';
    std::cout << verdict_line(report) << '\n';
  }
  return report.ok ? kExitOk : kExitIntegrity;
}

int cmd_verify_chain(const GlobalOptions& g) {
  const fs::path path = require_chain_path(g);
  const auto chain = load_for_read(path, g);
  if (!chain) return kExitIntegrity;
  const auto report = ledger::verify_chain(*chain);
  if (g.format == Format::Json) {
    auto j = verdict_json(report);
    j["blocks"] = chain->insertion_order().size();
    j["tip_height"] = chain->height();
    j["tip"] = to_hex0x(chain->canonical_tip());
    std::cout << j.dump() << '\n';
  } else {
    std::cout << verdict_line(report);
    if (report.ok)
      std::cout << " (" << chain->insertion_order().size() << " blocks, height " << chain->height() << ", tip "
                << to_hex0x(chain->canonical_tip()) << ")";
    std::cout << '\n';
  }
  return report.ok ? kExitOk : kExitIntegrity;
}

int cmd_report(const GlobalOptions& g) {
  const fs::path path = require_chain_path(g);
  const auto chain = load_for_read(path, g);
  if (!chain) return kExitIntegrity;
  const auto report = ledger::verify_chain(*chain);
  const auto snapshot = chain->snapshot();
  std::size_t txs = 0;
  std::size_t rejected = 0;
  for (const auto& [hash, receipt] : snapshot->receipts) {
    ++txs;
    if (!receipt.ok()) ++rejected;
  }

  switch (g.format) {
    case Format::Json: {
      nlohmann::ordered_json j;
      j["chain"] = verdict_json(report);
      j["tip_height"] = chain->height();
      j["tip"] = to_hex0x(chain->canonical_tip());
      j["transactions"] = txs;
      j["rejected"] = rejected;
      j["state"] = fabreg::to_json(snapshot->contract);
      std::cout << j.dump(2) << '\n';
      break;
    }
    case Format::Csv:
      std::cout << "job_id,from,printer,model_hash,date,approved,printed,print_date\n";
      for (const auto& id : snapshot->contract.job_order()) {
        const auto& r = snapshot->contract.jobs().at(id);
        std::cout << id.hex() << ',' << r.request.from.hex() << ',' << r.request.printer.hex() << ','
                  << r.request.model_hash.hex() << ',' << r.request.date << ',' << (r.approved ? 1 : 0) << ','
                  << (r.printed ? 1 : 0) << ',' << (r.print_date ? std::to_string(*r.print_date) : "") << '\n';
      }
      break;
    case Format::Text:
      std::cout << "height " << chain->height() << ", " << txs << " transactions (" << rejected << " rejected), "
                << snapshot->contract.size() << " jobs\n";
      for (const auto& id : snapshot->contract.job_order()) {
        const auto& r = snapshot->contract.jobs().at(id);
        const char* status = r.printed ? "printed" : r.approved ? "approved" : "pending";
        std::cout << "  " << id.hex() << "  " << status << "  printer " << r.request.printer.hex() << '\n';
      }
      std::cout << verdict_line(report) << '\n';
      break;
  }
  return report.ok ? kExitOk : kExitIntegrity;
}

int cmd_repro(const GlobalOptions& g, const std::string& which, std::uint64_t skip, const std::string& out) {
  const std::uint64_t seed = g.seed.value_or(7);
  const repro::Report report = which == "mainnet" ? repro::mainnet_estimate(seed, skip) : repro::ropsten_context(seed);
  if (!out.empty()) {
    const fs::path p = out;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_file(p, report.markdown);
  }
  std::cout << report.markdown;
  return report.pass ? kExitOk : kExitIntegrity;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fabchain: audit-able print-job ledger, agents and latency simulator"};
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);

  GlobalOptions g;
  std::map<std::string, Format> formats{{"text", Format::Text}, {"json", Format::Json}, {"csv", Format::Csv}};
  app.add_option("--chain", g.chain_path, "Chain log (one JSON block per line)");
  app.add_option("--store", g.store_root, "Content-addressed model store directory");
  app.add_option("--format", g.format, "Output format: text|json|csv")
      ->transform(CLI::CheckedTransformer(formats, CLI::ignore_case));
  app.add_option("--seed", g.seed, "Deterministic seed");

  auto* keygen = app.add_subcommand("keygen", "Create a key file and print its address");
  std::string key_out;
  keygen->add_option("--out", key_out, "Key file to create")->required();

  auto* run_sim = app.add_subcommand("run-sim", "Run the print-job latency simulation");
  SimFlags sim;
  run_sim->add_option("--d-block", sim.d_block, "Mean block interval (ms)")->check(CLI::PositiveNumber);
  run_sim->add_option("--skip", sim.skip, "Blocks after submission before a tx is eligible")->check(CLI::PositiveNumber);
  run_sim->add_option("--jobs", sim.jobs, "Number of print jobs")->check(CLI::PositiveNumber);
  run_sim->add_option("--dist", sim.dist, "Block interval distribution")
      ->check(CLI::IsMember({"deterministic", "exponential"}));
  run_sim->add_option("--propagation", sim.propagation, "Transaction propagation delay (ms)");
  run_sim->add_option("--poll", sim.poll, "Agent poll interval (ms)")->check(CLI::PositiveNumber);
  run_sim->add_option("--print-ms", sim.print_ms, "Print duration, or base duration with --print-ms-per-byte")
      ->check(CLI::PositiveNumber);
  run_sim->add_option("--print-ms-per-byte", sim.print_ms_per_byte, "Per-byte print duration (ms)");
  run_sim->add_option("--difficulty", sim.difficulty, "PoW difficulty in leading zero bits")->check(CLI::Range(0, 32));
  run_sim->add_option("--model-bytes", sim.model_bytes, "Size of generated model blobs");
  run_sim->add_option("--out-dir", sim.out_dir, "Directory for jobs.csv, txs.csv, summary.txt, summary.json");
  run_sim->add_option("--events", sim.events, "Write the event log to this file");

  NodeFlags node;
  auto* submit = app.add_subcommand("submit", "Submit a print request and seal it into a block");
  std::string printer_hex;
  std::string model_path;
  submit->add_option("--key", node.key, "Client key file")->required()->check(CLI::ExistingFile);
  submit->add_option("--printer", printer_hex, "Printer address (0x + 40 hex)")->required();
  submit->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  submit->add_option("--now", node.now, "Timestamp (ms) instead of the system clock");
  submit->add_option("--difficulty", node.difficulty, "PoW difficulty")->check(CLI::Range(0, 32));

  auto* serve = app.add_subcommand("serve", "One print-server pass: approve, print, respond");
  std::uint64_t print_ms = 1000;
  serve->add_option("--key", node.key, "Printer key file")->required()->check(CLI::ExistingFile);
  serve->add_option("--now", node.now, "Timestamp (ms) instead of the system clock");
  serve->add_option("--print-ms", print_ms, "Simulated print duration (ms)")->check(CLI::PositiveNumber);
  serve->add_option("--difficulty", node.difficulty, "PoW difficulty")->check(CLI::Range(0, 32));

  auto* audit = app.add_subcommand("audit", "Show the on-chain history of a print job");
  std::string job_hex;
  audit->add_option("--job", job_hex, "Print job id (0x + 64 hex)")->required();

  auto* verify = app.add_subcommand("verify-chain", "Verify every hash link, PoW and signature");
  auto* report = app.add_subcommand("report", "List print jobs held in the contract state");

  auto* repro_cmd = app.add_subcommand("repro", "Write a latency reproduction report");
  std::string which;
  std::uint64_t repro_skip = 2;
  std::string repro_out;
  repro_cmd->add_option("which", which, "mainnet | ropsten")->required()->check(CLI::IsMember({"mainnet", "ropsten"}));
  repro_cmd->add_option("--skip", repro_skip, "Inclusion skip for the mainnet estimate")->check(CLI::PositiveNumber);
  repro_cmd->add_option("--out", repro_out, "Markdown output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*keygen) return cmd_keygen(g, key_out);
    if (*run_sim) return cmd_run_sim(g, sim);
    if (*submit) return cmd_submit(g, node, printer_hex, model_path);
    if (*serve) return cmd_serve(g, node, print_ms);
    if (*audit) return cmd_audit(g, job_hex);
    if (*verify) return cmd_verify_chain(g);
    if (*report) return cmd_report(g);
    if (*repro_cmd) return cmd_repro(g, which, repro_skip, repro_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
