// End-to-end tests that drive the installed command-line binary the way a
// user would: real processes, real files, exit codes and stdout contents.
#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspot/bspot.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using testsupport::read_file_bytes;
using testsupport::read_file_text;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "bspot_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult cli(const std::string& args) {
  static int counter = 0;
  const fs::path o = work_dir() / ("stdout." + std::to_string(++counter));
  const fs::path e = work_dir() / ("stderr." + std::to_string(counter));
  const std::string cmd =
      testsupport::cli_path() + " " + args + " >" + o.string() + " 2>" + e.string();
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
  r.out = read_file_text(o.string());
  r.err = read_file_text(e.string());
  return r;
}

std::string sample(const std::string& name) {
  return testsupport::samples_dir() + "/" + name + ".spl";
}

std::string input_file(const std::string& name) {
  return testsupport::samples_dir() + "/inputs/" + name + ".bin";
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  REQUIRE(os.good());
}

}  // namespace

TEST_CASE("run: the adder demo records the three-label trace") {
  const fs::path trace = work_dir() / "golden.bspt";
  const fs::path out = work_dir() / "golden.out";
  const CliResult r =
      cli("run --program " + sample("sum_threshold") + " --input in=" +
          input_file("sum_threshold_40_12") + " --trace " + trace.string() + " --out " +
          out.string());

  CHECK(r.code == 0);
  CHECK(r.out.find("status: halted\n") != std::string::npos);
  CHECK(r.out.find("labels: 3\n") != std::string::npos);
  CHECK(r.out.find("output bytes: 1\n") != std::string::npos);
  CHECK(r.out.find("source in: 2/2 bytes read\n") != std::string::npos);

  CHECK(read_file_bytes(out.string()) == std::vector<std::uint8_t>{5});

  const bspot::TraceArtifact t = bspot::read_trace_file(trace);
  CHECK(t.labels.count() == 3);
  REQUIRE(t.events.size() == 1);
  CHECK(t.events[0].label == 3);
}

TEST_CASE("run: abnormal terminations are reported but still exit 0") {
  const fs::path bad = work_dir() / "bad_checksum.bin";
  write_bytes(bad, {1, 2, 3, 4, 11, 99, 98});  // checksum should be 10
  const CliResult r =
      cli("run --program " + sample("checksum_guard") + " --input in=" + bad.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("status: assert-failed\n") != std::string::npos);
  CHECK(r.out.find("detail: line") != std::string::npos);
}

TEST_CASE("run: traces are byte-identical across invocations") {
  const fs::path t1 = work_dir() / "det1.bspt";
  const fs::path t2 = work_dir() / "det2.bspt";
  const std::string base = "run --program " + sample("comment_kv") + " --input in=" +
                           input_file("comment_kv_demo") + " --trace ";
  REQUIRE(cli(base + t1.string()).code == 0);
  REQUIRE(cli(base + t2.string()).code == 0);
  CHECK(read_file_bytes(t1.string()) == read_file_bytes(t2.string()));
}

TEST_CASE("run: the control-flow policy flag changes event labels") {
  const fs::path trace = work_dir() / "nocf.bspt";
  const CliResult r =
      cli("run --program " + sample("sum_threshold") + " --input in=" +
          input_file("sum_threshold_40_12") + " --cf-policy off --trace " + trace.string());
  REQUIRE(r.code == 0);
  const bspot::TraceArtifact t = bspot::read_trace_file(trace);
  REQUIRE(t.events.size() == 1);
  CHECK(t.events[0].label == bspot::kUntainted);
  CHECK(t.labels.record(3).affects_cf);
}

TEST_CASE("run: multiple sources bind independently") {
  const fs::path prog = work_dir() / "two_sources.spl";
  {
    std::ofstream os(prog);
    os << "a := get_input(\"a\")\nb := get_input(\"b\")\noutput(b)\nhalt\n";
  }
  const fs::path fa = work_dir() / "a.bin";
  const fs::path fb = work_dir() / "b.bin";
  write_bytes(fa, {1});
  write_bytes(fb, {2});
  const CliResult r = cli("run --program " + prog.string() + " --input a=" + fa.string() +
                          " --input b=" + fb.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("source a: 1/1 bytes read\n") != std::string::npos);
  CHECK(r.out.find("source b: 1/1 bytes read\n") != std::string::npos);

  const CliResult dup = cli("run --program " + prog.string() + " --input a=" + fa.string() +
                            " --input a=" + fb.string());
  CHECK(dup.code == 2);
}

TEST_CASE("blindspots: JSON and CSV agree with the library") {
  const fs::path trace = work_dir() / "skip.bspt";
  REQUIRE(cli("run --program " + sample("skip_field") + " --input in=" +
              input_file("skip_field_demo") + " --trace " + trace.string())
              .code == 0);

  const CliResult js = cli("blindspots --trace " + trace.string());
  REQUIRE(js.code == 0);
  const json j = json::parse(js.out);
  REQUIRE(j["sources"].size() == 1);
  CHECK(j["sources"][0]["name"] == "in");
  CHECK(j["sources"][0]["ranges"] == json::parse("[[1,3]]"));
  CHECK(j["sources"][0]["not_read"] == json::parse("[[2,3]]"));
  CHECK(j["sources"][0]["not_in_output"] == json::parse("[[1,2]]"));
  CHECK(j["totals"]["blind"] == 2);
  CHECK(j["counters"]["inspections"] == 2);

  const CliResult cs = cli("blindspots --trace " + trace.string() + " --format csv");
  REQUIRE(cs.code == 0);
  CHECK(cs.out ==
        "source,start,end,length,category\n"
        "in,2,3,1,not_read\n"
        "in,1,2,1,not_in_output\n");

  const fs::path outf = work_dir() / "report.json";
  REQUIRE(cli("blindspots --trace " + trace.string() + " --out " + outf.string()).code == 0);
  CHECK(read_file_text(outf.string()) == js.out);
}

TEST_CASE("validate: a faithful report passes with exit 0") {
  const fs::path trace = work_dir() / "val_skip.bspt";
  REQUIRE(cli("run --program " + sample("skip_field") + " --input in=" +
              input_file("skip_field_demo") + " --trace " + trace.string())
              .code == 0);
  const CliResult r =
      cli("validate --program " + sample("skip_field") + " --input in=" +
          input_file("skip_field_demo") + " --trace " + trace.string() + " --mode exhaustive");
  CHECK(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["mode"] == "exhaustive");
  CHECK(j["fp_rate"] == 0.0);
  CHECK(j["blind_bytes_tested"] == 2);
  CHECK(j["type1_violations"].empty());
}

TEST_CASE("validate: drifted inputs are caught with exit 1") {
  const fs::path trace = work_dir() / "val_len.bspt";
  REQUIRE(cli("run --program " + sample("length_prefixed") + " --input in=" +
              input_file("length_prefixed_demo") + " --trace " + trace.string())
              .code == 0);
  // Same byte count, but the longer length prefix pulls offset 3 into output.
  const CliResult r =
      cli("validate --program " + sample("length_prefixed") + " --input in=" +
          input_file("length_prefixed_alt") + " --trace " + trace.string());
  CHECK(r.code == 1);
  const json j = json::parse(r.out);
  CHECK(j["type1_violations"].size() == 255);
  CHECK(j["type1_violations"][0]["offset"] == 3);
  CHECK(j["type1_violations"][0]["value"] == 0);
}

TEST_CASE("validate: sampled mode reproduces the documented seed-7 candidates") {
  const fs::path trace = work_dir() / "val_kv.bspt";
  REQUIRE(cli("run --program " + sample("comment_kv") + " --input in=" +
              input_file("comment_kv_demo") + " --trace " + trace.string())
              .code == 0);
  const CliResult r =
      cli("validate --program " + sample("comment_kv") + " --input in=" +
          input_file("comment_kv_demo") + " --trace " + trace.string() +
          " --mode sampled --seed 7");
  CHECK(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["seed"] == 7);
  CHECK(j["mode"] == "sampled");
  REQUIRE(j["type2_candidates"].size() == 1);
  CHECK(j["type2_candidates"][0]["source"] == "in");
  CHECK(j["type2_candidates"][0]["offset"] == 1);

  const CliResult again =
      cli("validate --program " + sample("comment_kv") + " --input in=" +
          input_file("comment_kv_demo") + " --trace " + trace.string() +
          " --mode sampled --seed 7");
  CHECK(again.out == r.out);
}

TEST_CASE("oracle: ground truth for the bundled demos") {
  const CliResult skip = cli("oracle --program " + sample("skip_field") + " --input in=" +
                             input_file("skip_field_demo"));
  REQUIRE(skip.code == 0);
  const json js = json::parse(skip.out);
  CHECK(js["sources"][0]["oracle_blind"] == json::parse("[[1,3]]"));

  const CliResult kv = cli("oracle --program " + sample("comment_kv") + " --input in=" +
                           input_file("comment_kv_demo"));
  REQUIRE(kv.code == 0);
  const json jkv = json::parse(kv.out);
  CHECK(jkv["sources"][0]["oracle_blind"] == json::parse("[[1,2],[4,5]]"));
}

TEST_CASE("report: aggregates a corpus directory") {
  const fs::path corpus = work_dir() / "corpus";
  const fs::path outdir = work_dir() / "corpus_out";
  fs::create_directories(corpus);

  write_bytes(corpus / "a.bin", {'A', 'B', 'C', 'D'});
  const json ja = {{"sources",
                    json::array({{{"name", "in"},
                                  {"length", 4},
                                  {"read", 4},
                                  {"ranges", json::parse("[[2,4]]")},
                                  {"not_read", json::parse("[]")},
                                  {"not_in_output", json::parse("[[2,4]]")}}})}};
  {
    std::ofstream os(corpus / "a.bin.blindspots.json");
    os << ja.dump(2);
  }
  write_bytes(corpus / "b.bin", {'A', 'B', 'A', 'B'});
  const json jb = {{"sources",
                    json::array({{{"name", "in"},
                                  {"length", 4},
                                  {"read", 4},
                                  {"ranges", json::parse("[]")},
                                  {"not_read", json::parse("[]")},
                                  {"not_in_output", json::parse("[]")}}})}};
  {
    std::ofstream os(corpus / "b.bin.blindspots.json");
    os << jb.dump(2);
  }

  const CliResult r = cli("report " + corpus.string() + " --out " + outdir.string());
  REQUIRE(r.code == 0);
  CHECK(r.out == "aggregated 2 entries, 1 blind ranges, 2 blind bytes\n");

  CHECK(read_file_text((outdir / "prefixes.csv").string()) ==
        "sequence,blind_count,corpus_frequency\n"
        "\"C\",1,1\n"
        "\"CD\",1,1\n");
  const json summary = json::parse(read_file_text((outdir / "summary.json").string()));
  CHECK(summary["totals"]["inputs"] == 2);
  CHECK(summary["totals"]["blind_bytes"] == 2);
  // "B" precedes the blind range once and occurs three times corpus-wide.
  bool found = false;
  for (const auto& row : summary["top_preceding"])
    if (row["sequence"] == "B") {
      found = true;
      CHECK(row["blind_count"] == 1);
      CHECK(row["corpus_frequency"] == 3);
    }
  CHECK(found);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli("").code == 2);                      // a subcommand is required
  CHECK(cli("frobnicate").code == 2);            // unknown subcommand
  CHECK(cli("run").code == 2);                   // missing --program/--input
  CHECK(cli("run --program " + sample("skip_field") + " --input in=" +
            input_file("skip_field_demo") + " --cf-policy sometimes")
            .code == 2);
  CHECK(cli("run --program " + sample("skip_field") + " --input noequalsign").code == 2);
  CHECK(cli("blindspots").code == 2);            // missing --trace
  CHECK(cli("validate --program " + sample("skip_field") + " --input in=" +
            input_file("skip_field_demo") + " --trace x.bspt --samples 0")
            .code == 2);
}

TEST_CASE("runtime and format failures exit 3 with a diagnostic") {
  const CliResult missing =
      cli("run --program /nonexistent.spl --input in=" + input_file("skip_field_demo"));
  CHECK(missing.code == 3);
  CHECK(missing.err.find("error:") != std::string::npos);

  const fs::path garbage = work_dir() / "garbage.bspt";
  write_bytes(garbage, {'n', 'o', 'n', 's', 'e', 'n', 's', 'e'});
  CHECK(cli("blindspots --trace " + garbage.string()).code == 3);

  const fs::path badprog = work_dir() / "bad.spl";
  {
    std::ofstream os(badprog);
    os << "x := $\n";
  }
  CHECK(cli("run --program " + badprog.string() + " --input in=" +
            input_file("skip_field_demo"))
            .code == 3);

  const fs::path big = work_dir() / "big.bin";
  write_bytes(big, std::vector<std::uint8_t>(300, 7));
  CHECK(cli("oracle --program " + sample("copy_through") + " --input in=" + big.string())
            .code == 3);

  CHECK(cli("report " + (work_dir() / "no_such_corpus").string()).code == 3);
}
