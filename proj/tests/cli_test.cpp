#include "config_file.hpp"

#include "pelrec/errors.hpp"
#include "pelrec/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace pelrec;

namespace {

const fs::path kWork = fs::temp_directory_path() / "pelrec_cli_test";

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt";
  const fs::path err = kWork / "stderr.txt";
  const std::string cmd = std::string("\"") + PELREC_TOOL + "\" " + args + " > \"" +
                          out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

std::string dir(const std::string& name) {
  const fs::path p = kWork / name;
  fs::remove_all(p);
  return p.string();
}

// Strict RFC 4180 parser: CRLF records, quoted fields with doubled quotes,
// no stray quotes, every record the same width. Throws on any violation.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  std::size_t i = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("csv: " + why + " at " + std::to_string(i));
  };
  while (i < text.size()) {
    if (text[i] == '"') {
      ++i;
      for (;;) {
        if (i >= text.size()) fail("unterminated quote");
        if (text[i] == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field += '"';
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          field += text[i++];
        }
      }
    } else {
      while (i < text.size() && text[i] != ',' && text[i] != '\r' && text[i] != '\n') {
        if (text[i] == '"') fail("quote inside unquoted field");
        field += text[i++];
      }
    }
    if (i < text.size() && text[i] == ',') {
      row.push_back(std::move(field));
      field.clear();
      ++i;
    } else if (i + 1 < text.size() && text[i] == '\r' && text[i + 1] == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      i += 2;
    } else {
      fail("expected comma or CRLF");
    }
  }
  if (!row.empty() || !field.empty()) fail("last record lacks CRLF");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) fail("ragged record");
  }
  return rows;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  return parse_csv(io::read_file(p));
}

std::map<std::string, std::string> key_values(const std::string& line) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const auto end = line.find_first_of(" \n", pos);
    const std::string tok = line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    const auto eq = tok.find('=');
    if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return out;
}

std::size_t count_files(const fs::path& d, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(d)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("config file parsing and merging") {
  const auto kv = cli::parse_key_values("# comment\n\nwidth = 32\nregion=1,2,3,4,5,6\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::pair<std::string, std::string>{"width", "32"});
  CHECK_THROWS_AS(cli::parse_key_values("novalue\n"), ConfigError);

  fs::create_directories(kWork);
  const fs::path cfg = kWork / "merge.cfg";
  io::write_file_atomic(cfg, "width=16\nheight=20\n");
  const auto merged =
      cli::merge_config({"synth", "--config", cfg.string(), "--width=24"}, {"width", "height"});
  CHECK(merged == std::vector<std::string>{"synth", "--height=20", "--width=24"});
  CHECK_THROWS_AS(cli::merge_config({"synth", "--config", cfg.string()}, {"width"}), ConfigError);
  CHECK_THROWS_AS(cli::merge_config({"synth", "--config"}, {"width"}), ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("synth --width banana --out-dir " + dir("bad")).code == 2);

  const std::string missing = dir("missing_out");
  const RunResult r = run("estimate /nonexistent/a.pgm /nonexistent/b.pgm --out-dir " + missing);
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(missing));

  fs::create_directories(kWork);
  io::write_file_atomic(kWork / "corrupt.pgm", "P7 not a pgm");
  const RunResult bad = run("estimate " + (kWork / "corrupt.pgm").string() + " " +
                            (kWork / "corrupt.pgm").string() + " --out-dir " + dir("corrupt_out"));
  CHECK(bad.code == 1);
  CHECK(bad.err.find("PGM") != std::string::npos);
}

TEST_CASE("synth writes a reproducible sequence and manifest") {
  const std::string a = dir("synth_a");
  const std::string b = dir("synth_b");
  const std::string args = "synth --width 32 --height 24 --frames 3 --seed 7 --noise-seed 3 "
                           "--snr-db 25 --velocity 0.5,-0.25 --out-dir ";
  REQUIRE(run(args + a).code == 0);
  REQUIRE(run(args + b).code == 0);
  CHECK(count_files(a, ".pgm") == 3);
  CHECK(count_files(a, ".flo") == 2);
  CHECK(fs::exists(fs::path(a) / "manifest.txt"));
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(io::read_file(e.path()) == io::read_file(fs::path(b) / e.path().filename()));
  }
  const DisplacementField t = io::read_flow(fs::path(a) / "truth_0001.flo");
  CHECK(t(5, 5) == DisplacementVector{0.5, -0.25});

  // the manifest replays the run
  const std::string c = dir("synth_c");
  REQUIRE(run("synth --config " + (fs::path(a) / "manifest.txt").string() + " --out-dir " + c).code == 0);
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(io::read_file(e.path()) == io::read_file(fs::path(c) / e.path().filename()));
  }
}

TEST_CASE("config precedence and validation") {
  fs::create_directories(kWork);
  const fs::path cfg = kWork / "synth.cfg";
  io::write_file_atomic(cfg, "width=16\nheight=16\nframes=2\n");
  const std::string out = dir("cfg_out");
  REQUIRE(run("synth --config " + cfg.string() + " --width 24 --out-dir " + out).code == 0);
  const Frame f = io::read_pgm(fs::path(out) / "frame_0000.pgm");
  CHECK(f.width() == 24);
  CHECK(f.height() == 16);

  io::write_file_atomic(cfg, "colour=blue\n");
  CHECK(run("synth --config " + cfg.string() + " --out-dir " + dir("cfg_bad")).code == 2);
}

TEST_CASE("estimate on identical frames reports 0 dB") {
  const std::string s = dir("ident_src");
  REQUIRE(run("synth --width 24 --height 24 --frames 1 --out-dir " + s).code == 0);
  const std::string frame = (fs::path(s) / "frame_0000.pgm").string();
  const std::string out = dir("ident_out");
  const RunResult r = run("estimate " + frame + " " + frame + " --out-dir " + out);
  REQUIRE(r.code == 0);
  const auto kv = key_values(r.out);
  CHECK(std::stod(kv.at("sequence_imc_db")) == 0.0);
  CHECK(kv.at("pairs") == "1");
  const auto rows = read_csv(fs::path(out) / "metrics.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"frame_index", "imc_db", "mean_epe", "valid_fraction",
                                            "converged_fraction"});
  CHECK(std::stod(rows[1][1]) == 0.0);
}

TEST_CASE("estimate recovers a synthetic translation") {
  const std::string s = dir("trans_src");
  REQUIRE(run("synth --width 48 --height 48 --frames 3 --velocity 1,0.5 --out-dir " + s).code == 0);
  const std::string out = dir("trans_out");
  const RunResult r = run("estimate " + s + " --estimator pcr2 --out-dir " + out);
  REQUIRE(r.code == 0);
  const auto kv = key_values(r.out);
  CHECK(std::stod(kv.at("sequence_imc_db")) >= 20.0);
  CHECK(std::stod(kv.at("mean_epe")) < 0.3);
  CHECK(count_files(out, ".flo") == 2);
  const DisplacementField f = io::read_flow(fs::path(out) / "flow_0001.flo");
  CHECK(std::abs(f(24, 24).dx - 1.0) < 0.1);
  CHECK(std::abs(f(24, 24).dy - 0.5) < 0.1);
}

TEST_CASE("estimate output is byte-reproducible") {
  const std::string s = dir("repro_src");
  REQUIRE(run("synth --width 32 --height 32 --frames 3 --snr-db 20 --out-dir " + s).code == 0);
  const std::string a = dir("repro_a");
  const std::string b = dir("repro_b");
  REQUIRE(run("estimate " + s + " --out-dir " + a).code == 0);
  REQUIRE(run("estimate " + s + " --out-dir " + b).code == 0);
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK(io::read_file(e.path()) == io::read_file(fs::path(b) / e.path().filename()));
  }
}

TEST_CASE("compare tabulates every estimator") {
  const std::string out = dir("compare_out");
  const RunResult r = run("compare --width 40 --height 40 --frames 4 --snr-db 20 --out-dir " + out);
  REQUIRE(r.code == 0);
  const auto rows = read_csv(fs::path(out) / "compare.csv");
  REQUIRE(rows.size() == 1 + 4 * 3);
  CHECK(rows[0] == std::vector<std::string>{"estimator", "frame_index", "imc_db", "mean_epe"});
  std::map<std::string, std::vector<double>> imc;
  for (std::size_t i = 1; i < rows.size(); ++i) imc[rows[i][0]].push_back(std::stod(rows[i][2]));
  REQUIRE(imc.size() == 4);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(imc["ols"][k] - imc["pcr1"][k]) <= 1e-6);
  }
  const auto summary = read_csv(fs::path(out) / "compare_summary.csv");
  CHECK(summary.size() == 5);
  for (const char* name : {"ols", "rls", "pcr1", "pcr2"}) {
    CHECK(r.out.find(name) != std::string::npos);
  }
}

TEST_CASE("cluster fits labelled classes and writes consistent ellipses") {
  const std::string s = dir("cluster_src");
  REQUIRE(run("synth --width 48 --height 48 --frames 2 --snr-db 30 "
              "--region 0,0,24,24,1,0 --region 24,0,24,24,0,1 "
              "--region 0,24,24,24,-1,0 --region 24,24,24,24,0.5,-0.5 --out-dir " + s)
              .code == 0);
  const std::string est = dir("cluster_est");
  REQUIRE(run("estimate " + s + " --out-dir " + est).code == 0);

  // label by quadrant, excluding a band around the motion boundaries
  std::string labels;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      const bool edge = std::abs(x - 24) < 5 || std::abs(y - 24) < 5 || x < 3 || y < 3 ||
                        x > 44 || y > 44;
      const int q = (x >= 24) + 2 * (y >= 24);
      labels += std::to_string(edge ? -1 : q) + (x == 47 ? "\n" : " ");
    }
  }
  fs::create_directories(kWork);
  io::write_file_atomic(kWork / "labels.txt", labels);

  const std::string out = dir("cluster_out");
  const std::string flow = (fs::path(est) / "flow_0001.flo").string();
  const RunResult r = run("cluster --flow " + flow + " --labels " + (kWork / "labels.txt").string() +
                          " --out-dir " + out);
  REQUIRE(r.code == 0);
  const auto ellipses = read_csv(fs::path(out) / "ellipses.csv");
  REQUIRE(ellipses.size() == 5);

  // orientation oracle: closed-form principal angle of each class's score covariance
  const auto scores = read_csv(fs::path(out) / "scores.csv");
  for (int c = 0; c < 4; ++c) {
    double m0 = 0, m1 = 0;
    long n = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (std::stoi(scores[i][2]) != c) continue;
      m0 += std::stod(scores[i][0]);
      m1 += std::stod(scores[i][1]);
      ++n;
    }
    m0 /= double(n);
    m1 /= double(n);
    double a = 0, b = 0, d = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (std::stoi(scores[i][2]) != c) continue;
      const double u = std::stod(scores[i][0]) - m0, v = std::stod(scores[i][1]) - m1;
      a += u * u;
      b += u * v;
      d += v * v;
    }
    const double expected = 0.5 * std::atan2(2 * b, a - d);
    const auto& row = ellipses[std::size_t(c) + 1];
    CHECK(std::stol(row[7]) == n);
    CHECK(std::abs(std::stod(row[1]) - m0) <= 1e-9);
    CHECK(std::abs(std::sin(std::stod(row[5]) - expected)) <= 1e-6);
  }

  const auto verdicts = read_csv(fs::path(out) / "verdicts.csv");
  CHECK(verdicts.size() == 1 + 48 * 48);

  const std::string single = dir("cluster_single");
  REQUIRE(run("cluster --flow " + flow + " --out-dir " + single).code == 0);
  CHECK(read_csv(fs::path(single) / "ellipses.csv").size() == 2);
}

TEST_CASE("cluster input errors") {
  CHECK(run("cluster --flow /nonexistent.flo --out-dir " + dir("c1")).code == 2);
  const std::string s = dir("cluster_const");
  REQUIRE(run("synth --width 16 --height 16 --frames 2 --out-dir " + s).code == 0);
  // a uniform truth field has no variance to project
  const RunResult r =
      run("cluster --flow " + (fs::path(s) / "truth_0001.flo").string() + " --out-dir " + dir("c2"));
  CHECK(r.code == 1);
}
