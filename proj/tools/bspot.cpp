// bspot: run small imperative programs under byte-level taint tracking,
// enumerate input blind spots from the recorded trace, and check the
// classification by mutation testing.
//
// Exit codes: 0 success, 1 validation found a misclassified blind byte,
// 2 usage error, 3 runtime or file-format error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bspot/bspot.hpp"

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  if (is.bad()) throw std::runtime_error("failed reading " + path);
  return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (is.bad()) throw std::runtime_error("failed reading " + path);
  return data;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << content;
  if (!os) throw std::runtime_error("failed writing " + path);
}

std::map<std::string, std::vector<std::uint8_t>> load_inputs(
    const std::vector<std::string>& bindings) {
  std::map<std::string, std::vector<std::uint8_t>> inputs;
  for (const std::string& b : bindings) {
    const std::size_t eq = b.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--input", "expected name=file, got '" + b + "'");
    const std::string name = b.substr(0, eq);
    if (inputs.count(name))
      throw CLI::ValidationError("--input", "source '" + name + "' bound twice");
    inputs[name] = read_binary_file(b.substr(eq + 1));
  }
  return inputs;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty())
    std::cout << content;
  else
    write_file(out_path, content);
}

struct CommonArgs {
  std::string program_path;
  std::vector<std::string> input_bindings;
  std::uint64_t step_limit = 10'000'000;
};

void add_program_options(CLI::App* cmd, CommonArgs& args, bool inputs_required = true) {
  cmd->add_option("--program", args.program_path, "program source file (.spl)")
      ->required();
  auto* in = cmd->add_option("--input", args.input_bindings,
                             "bind an input source, name=file (repeatable)");
  if (inputs_required) in->required();
  cmd->add_option("--step-limit", args.step_limit, "execution step budget")
      ->check(CLI::PositiveNumber);
}

int cmd_run(const CommonArgs& args, const std::string& trace_path,
            const std::string& out_path, const std::string& policy) {
  bspot::RunConfig cfg;
  cfg.cf_policy = policy == "off" ? bspot::CfPolicy::Off : bspot::CfPolicy::Accumulate;
  cfg.step_limit = args.step_limit;
  cfg.inputs = load_inputs(args.input_bindings);

  const bspot::Program program = bspot::parse_program(read_text_file(args.program_path));
  const bspot::RunResult result = bspot::run(program, cfg);

  if (!trace_path.empty()) bspot::write_trace_file(result.trace, trace_path);
  if (!out_path.empty()) {
    const std::vector<std::uint8_t> bytes = result.trace.output_bytes();
    std::ofstream os(out_path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  }

  std::cout << "status: " << bspot::to_string(result.trace.status) << "\n";
  if (!result.diagnostic.empty()) std::cout << "detail: " << result.diagnostic << "\n";
  std::cout << "labels: " << result.trace.labels.count() << "\n";
  std::cout << "output bytes: " << result.trace.events.size() << "\n";
  for (const bspot::SourceInfo& s : result.trace.sources)
    std::cout << "source " << s.name << ": " << s.read_count() << "/" << s.length()
              << " bytes read\n";
  return 0;
}

int cmd_blindspots(const std::string& trace_path, const std::string& format,
                   const std::string& out_path) {
  const bspot::TraceArtifact trace = bspot::read_trace_file(trace_path);
  const bspot::BlindSpotReport report = bspot::blind_spots(trace);
  if (format == "csv") {
    std::ostringstream os;
    bspot::report_to_csv(report, os);
    emit(out_path, os.str());
  } else {
    emit(out_path, bspot::report_to_json(report).dump(2) + "\n");
  }
  return 0;
}

int cmd_validate(const CommonArgs& args, const std::string& trace_path,
                 const std::string& mode, std::uint32_t samples, std::uint64_t seed,
                 const std::string& out_path) {
  const bspot::Program program = bspot::parse_program(read_text_file(args.program_path));
  const auto inputs = load_inputs(args.input_bindings);
  const bspot::TraceArtifact trace = bspot::read_trace_file(trace_path);
  const bspot::BlindSpotReport report = bspot::blind_spots(trace);
  const bspot::MutationMode m =
      mode == "sampled" ? bspot::MutationMode::Sampled : bspot::MutationMode::Exhaustive;
  const bspot::ValidationReport vr =
      bspot::validate(program, inputs, report, m, seed, samples, args.step_limit);
  emit(out_path, bspot::validation_to_json(vr).dump(2) + "\n");
  return vr.type1_violations.empty() ? 0 : 1;
}

int cmd_oracle(const CommonArgs& args, std::uint64_t budget, const std::string& out_path) {
  const bspot::Program program = bspot::parse_program(read_text_file(args.program_path));
  const auto inputs = load_inputs(args.input_bindings);
  const std::set<bspot::SourceOffset> blind =
      bspot::oracle_blind_spots(program, inputs, budget, args.step_limit);

  const auto by_source = bspot::merge_ranges(blind);
  nlohmann::json j;
  j["budget"] = budget;
  j["sources"] = nlohmann::json::array();
  std::uint32_t index = 0;
  for (const auto& [name, bytes] : inputs) {
    nlohmann::json sj;
    sj["name"] = name;
    sj["length"] = bytes.size();
    auto it = by_source.find(index);
    sj["oracle_blind"] = bspot::ranges_to_json(
        it == by_source.end() ? std::vector<bspot::Range>{} : it->second);
    j["sources"].push_back(sj);
    ++index;
  }
  emit(out_path, j.dump(2) + "\n");
  return 0;
}

int cmd_report(const std::string& corpus_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::string suffix = ".blindspots.json";
  std::vector<fs::path> report_files;
  for (const auto& entry : fs::directory_iterator(corpus_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      report_files.push_back(entry.path());
  }
  std::sort(report_files.begin(), report_files.end());
  if (report_files.empty())
    throw std::runtime_error("no *" + suffix + " files in " + corpus_dir);

  std::vector<std::pair<std::vector<std::uint8_t>, bspot::BlindSpotReport>> entries;
  for (const fs::path& rp : report_files) {
    std::string input_name = rp.filename().string();
    input_name.resize(input_name.size() - suffix.size());
    const fs::path input_path = rp.parent_path() / input_name;
    if (!fs::exists(input_path))
      throw std::runtime_error("missing input file " + input_path.string() + " for " +
                               rp.string());
    const nlohmann::json j = nlohmann::json::parse(read_text_file(rp.string()));
    entries.emplace_back(read_binary_file(input_path.string()),
                         bspot::report_from_json(j));
  }

  const bspot::CorpusStats stats = bspot::corpus_stats(entries);
  bspot::emit_csv(stats, out_dir);
  write_file((fs::path(out_dir) / "summary.json").string(),
             bspot::stats_to_json(stats).dump(2) + "\n");
  std::cout << "aggregated " << entries.size() << " entries, " << stats.total_ranges
            << " blind ranges, " << stats.total_blind_bytes << " blind bytes\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"byte-level taint tracing and input blind-spot analysis"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_trace, run_out, run_policy = "accumulate";
  CLI::App* run = app.add_subcommand("run", "execute a program and record a trace");
  add_program_options(run, run_args);
  run->add_option("--trace", run_trace, "write the .bspt trace here");
  run->add_option("--out", run_out, "write raw output bytes here");
  run->add_option("--cf-policy", run_policy, "control-flow taint policy")
      ->check(CLI::IsMember({"accumulate", "off"}));

  std::string bs_trace, bs_format = "json", bs_out;
  CLI::App* bs = app.add_subcommand("blindspots", "enumerate blind spots from a trace");
  bs->add_option("--trace", bs_trace, "trace file (.bspt)")->required();
  bs->add_option("--format", bs_format, "output format")
      ->check(CLI::IsMember({"json", "csv"}));
  bs->add_option("--out", bs_out, "output path (default stdout)");

  CommonArgs val_args;
  std::string val_trace, val_mode = "exhaustive", val_out;
  std::uint32_t val_samples = 8;
  std::uint64_t val_seed = 1;
  CLI::App* val = app.add_subcommand("validate", "mutation-test a blind-spot report");
  add_program_options(val, val_args);
  val->add_option("--trace", val_trace, "trace file (.bspt)")->required();
  val->add_option("--mode", val_mode, "mutation mode inside blind spots")
      ->check(CLI::IsMember({"exhaustive", "sampled"}));
  val->add_option("--samples", val_samples, "values tried per sampled byte")
      ->check(CLI::PositiveNumber);
  val->add_option("--seed", val_seed, "sampling seed");
  val->add_option("--out", val_out, "report path (default stdout)");

  CommonArgs ora_args;
  std::uint64_t ora_budget = 256;
  std::string ora_out;
  CLI::App* ora = app.add_subcommand("oracle", "brute-force ground-truth blind spots");
  add_program_options(ora, ora_args);
  ora->add_option("--budget", ora_budget, "max total input bytes")
      ->check(CLI::PositiveNumber);
  ora->add_option("--out", ora_out, "output path (default stdout)");

  std::string rep_dir, rep_out = ".";
  CLI::App* rep = app.add_subcommand("report", "aggregate corpus statistics");
  rep->add_option("corpus", rep_dir, "directory of input files with *.blindspots.json")
      ->required();
  rep->add_option("--out", rep_out, "directory for CSVs and summary.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (*run) return cmd_run(run_args, run_trace, run_out, run_policy);
    if (*bs) return cmd_blindspots(bs_trace, bs_format, bs_out);
    if (*val)
      return cmd_validate(val_args, val_trace, val_mode, val_samples, val_seed, val_out);
    if (*ora) return cmd_oracle(ora_args, ora_budget, ora_out);
    if (*rep) return cmd_report(rep_dir, rep_out);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
