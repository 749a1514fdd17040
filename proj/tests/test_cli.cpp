#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

std::string cli_path() {
  const char* path = std::getenv("SML_CLI_PATH");
  REQUIRE(path != nullptr);
  return path;
}

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "sml_cli_tests";
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args, const std::string& stdout_file,
            const std::string& extra_env = "") {
  std::string command;
  if (!extra_env.empty()) command += extra_env + " ";
  command += "\"" + cli_path() + "\" " + args + " > \"" + stdout_file + "\" 2>/dev/null";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("covfit reports the fGn decay model", "[cli]") {
  const auto dir = scratch_dir();
  const auto out = (dir / "covfit.json").string();
  const int code = run_cli("covfit --model fgn --hurst 0.75 --tmax 10000", out);
  CHECK(code == 0);
  const auto report = nlohmann::json::parse(slurp(out));
  CHECK(std::abs(report["alpha"].get<double>() - 0.5) < 0.05);
  CHECK(std::abs(report["M"].get<double>() - 0.375) < 0.0375);
  CHECK_FALSE(report["integrable"].get<bool>());
  CHECK(report.contains("content_hash"));
}

TEST_CASE("covfit exit codes for degenerate and integrable models", "[cli]") {
  const auto dir = scratch_dir();
  const auto out = (dir / "covfit2.json").string();
  CHECK(run_cli("covfit --model fgn --hurst 0.5", out) == 2);
  CHECK(run_cli("covfit --model fgn --hurst 0.25", out) == 0);
  const auto report = nlohmann::json::parse(slurp(out));
  CHECK(report["integrable"].get<bool>());
  CHECK(run_cli("covfit --model fgn --hurst 1.5", out) == 1);
  CHECK(run_cli("covfit --definitely-not-a-flag", out) == 1);
}

TEST_CASE("clt-sweep rejects subordinators outside the admissible class", "[cli]") {
  const auto dir = scratch_dir();
  const auto out = (dir / "sweep_reject.csv").string();
  const int code = run_cli(
      "--n 64 clt-sweep --model fgn --hurst 0.75 --f x2 --tlist 16,32 --dt 0.25", out);
  CHECK(code == 2);
}

TEST_CASE("clt-sweep emits the fixed CSV schema and manifest", "[cli]") {
  const auto dir = scratch_dir();
  const auto csv = dir / "sweep.csv";
  const int code = run_cli("--n 128 --seed 5 --out \"" + csv.string() +
                               "\" clt-sweep --model fgn --hurst 0.75 --f x "
                               "--tlist 16,32 --dt 0.25",
                           (dir / "sweep_stdout.txt").string());
  CHECK(code == 0);
  const std::string content = slurp(csv);
  CHECK(content.rfind("T,sigma_sq_limit,empirical_variance,empirical_dW,"
                      "predicted_rate,bound_term_1,bound_term_2,n,seed\n",
                      0) == 0);
  const auto manifest = nlohmann::json::parse(slurp(csv.string() + ".manifest.json"));
  CHECK(manifest["command"] == "clt-sweep");
  CHECK(manifest["n"] == 128);
  CHECK(manifest.contains("content_hash"));
  CHECK_FALSE(manifest.contains("timestamp"));
}

TEST_CASE("smalljump outputs are byte-identical across runs and workers", "[cli]") {
  const auto dir = scratch_dir();
  const auto a = dir / "sj_a.csv";
  const auto b = dir / "sj_b.csv";
  const std::string args = "--n 300 --seed 9 smalljump --delta 0 --epsilons 0.2,0.1";
  CHECK(run_cli("--out \"" + a.string() + "\" " + args,
                (dir / "sj_a_out.txt").string(), "SML_WORKERS=1") == 0);
  CHECK(run_cli("--out \"" + b.string() + "\" " + args,
                (dir / "sj_b_out.txt").string(), "SML_WORKERS=8") == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a.string() + ".manifest.json") == slurp(b.string() + ".manifest.json"));
  CHECK(slurp(a).rfind("epsilon,dW,se,n\n", 0) == 0);
}

TEST_CASE("flp writes paths and the kernel check", "[cli]") {
  const auto dir = scratch_dir();
  const auto out = dir / "flp.csv";
  const int code = run_cli("--n 4 --seed 3 --out \"" + out.string() +
                               "\" flp --hurst 0.75 --epsilon 0.2 --tmax 1 "
                               "--n-points 17",
                           (dir / "flp_stdout.txt").string());
  CHECK(code == 0);
  const auto kernel = nlohmann::json::parse(slurp(out.string() + ".kernel.json"));
  CHECK(kernel["kernel_covariance_error"].get<double>() < 1e-8);
  CHECK(kernel["small_jump_ratio"].get<double>() > 0.0);
  CHECK(slurp(out).rfind("replicate,t,value\n", 0) == 0);

  const auto bin = dir / "flp.bin";
  CHECK(run_cli("--n 4 --seed 3 --out \"" + bin.string() +
                    "\" flp --hurst 0.75 --epsilon 0.2 --tmax 1 --n-points 17 "
                    "--format bin",
                (dir / "flp_stdout2.txt").string()) == 0);
  CHECK(slurp(bin).substr(0, 4) == "FLP1");
}

TEST_CASE("ou-product emits CSV plus bounds JSON deterministically", "[cli]") {
  const auto dir = scratch_dir();
  const auto a = dir / "ou_a.csv";
  const auto b = dir / "ou_b.csv";
  const std::string args =
      "--n 200 --seed 11 ou-product --lambda 1 --tlist 8,16,32,64 --dt 0.5";
  CHECK(run_cli("--out \"" + a.string() + "\" " + args,
                (dir / "ou_a_out.txt").string(), "SML_WORKERS=2") == 0);
  CHECK(run_cli("--out \"" + b.string() + "\" " + args,
                (dir / "ou_b_out.txt").string(), "SML_WORKERS=7") == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a.string() + ".bounds.json") == slurp(b.string() + ".bounds.json"));
  const auto bounds = nlohmann::json::parse(slurp(a.string() + ".bounds.json"));
  CHECK(bounds["predicted_rate_exponent"].get<double>() == -0.25);
  CHECK(bounds["conjectured_rate_exponent"].get<double>() == -0.5);
  const std::string content = slurp(a);
  CHECK(content.rfind("T,dW,se,var_analytic,var_empirical,term_dF4,term_cube,"
                      "term_contraction,term_d2sq\n",
                      0) == 0);
}

TEST_CASE("covfit ingests a tabulated covariance CSV", "[cli]") {
  const auto dir = scratch_dir();
  const auto csv = dir / "tab_cov.csv";
  {
    std::ofstream out(csv);
    out << "lag,value\n0,1.0\n";
    for (int t = 1; t <= 64; ++t)
      out << t << "," << 1.0 / std::sqrt(static_cast<double>(t)) << "\n";
  }
  const auto out = (dir / "tab_cov.json").string();
  const int code = run_cli(
      "covfit --model tabulated --cov-csv \"" + csv.string() + "\" --tmax 64", out);
  CHECK(code == 0);
  const auto report = nlohmann::json::parse(slurp(out));
  CHECK(std::abs(report["alpha"].get<double>() - 0.5) < 0.01);
  CHECK(std::abs(report["M"].get<double>() - 1.0) < 0.02);
}

TEST_CASE("a config file reproduces the flag run byte for byte", "[cli]") {
  const auto dir = scratch_dir();
  const auto flag_out = dir / "cfg_flags.json";
  CHECK(run_cli("--out \"" + flag_out.string() +
                    "\" covfit --model fgn --hurst 0.25 --tmax 4096",
                (dir / "cfg_stdout1.txt").string()) == 0);

  const auto cfg = dir / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "out=\"" << (dir / "cfg_file.json").string() << "\"\n";
    out << "[covfit]\n";
    out << "model=fgn\n";
    out << "hurst=0.25\n";
    out << "tmax=4096\n";
  }
  CHECK(run_cli("--config \"" + cfg.string() + "\" covfit",
                (dir / "cfg_stdout2.txt").string()) == 0);
  CHECK(slurp(flag_out) == slurp(dir / "cfg_file.json"));
}
