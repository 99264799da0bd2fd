#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = STRUCTURA_TEST_TMP;

std::string write(const std::string& name, const std::string& text) {
  fs::create_directories(kTmp);
  fs::path p = kTmp / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args) {
  fs::create_directories(kTmp);
  const fs::path out = kTmp / "stdout.txt", err = kTmp / "stderr.txt";
  std::string cmd = std::string(STRUCTURA_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                    err.string();
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

const char* kXor = R"({"num_variables": 3, "eta": [0.5, 0.3, 0.1],
  "factors": [{"type": "xor", "vars": [0, 1, 2]}]})";

const char* kMatching = R"({"num_variables": 4, "eta": [0.3, 0.1, 0.2, 0.9],
  "factors": [{"type": "xor", "vars": [0, 1]}, {"type": "xor", "vars": [2, 3]},
              {"type": "atmostone", "vars": [0, 2]}, {"type": "atmostone", "vars": [1, 3]}]})";

}  // namespace

TEST_CASE("solve") {
  auto in = write("xor.json", kXor);
  Run r = run("solve " + in + " --gamma 0 --max-iter 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("\"mu\": [0.53333333333333") != std::string::npos);
  CHECK(r.out.find("0.33333333333333") != std::string::npos);
  CHECK(r.out.find("\"status\": \"converged\"") != std::string::npos);

  auto out = (kTmp / "xor_out.json").string();
  Run f = run("solve " + in + " -o " + out);
  CHECK(f.code == 0);
  CHECK(slurp(out).find("\"mu\"") != std::string::npos);

  Run g = run("solve " + in + " --force-generic");
  CHECK(g.code == 0);
}

TEST_CASE("exit codes") {
  auto bad = write("bad.json", R"({"num_variables": 2, "eta": [0, 0], "factors": [
      {"type": "xor", "vars": [0, 1]}, {"type": "knapsack", "vars": [0, 1], "costs": [1]}]})");
  Run r = run("solve " + bad);
  CHECK(r.code == 1);
  CHECK(r.err.find("factors[1]") != std::string::npos);

  CHECK(run("solve " + (kTmp / "missing.json").string()).code == 1);
  CHECK(run("solve").code == 1);
  CHECK(run("solve " + write("xor.json", kXor) + " --gamma -1").code == 1);

  auto m = write("matching.json", kMatching);
  Run capped = run("solve " + m + " --max-iter 2");
  CHECK(capped.code == 2);
  CHECK(capped.out.find("\"status\": \"max_iter\"") != std::string::npos);
}

TEST_CASE("loss") {
  auto in = write("xor.json", kXor);
  auto gold = write("gold.json", R"({"y": [1, 0, 0]})");
  Run r = run("loss " + in + " " + gold + " --gamma 0 --max-iter 1");
  CHECK(r.code == 0);
  CHECK(r.out.find("\"loss\": 0.1733333333333") != std::string::npos);
  CHECK(r.out.find("\"grad_eta_m\": [-0.466666666666") != std::string::npos);

  auto at = write("xor_sharp.json", R"({"num_variables": 3, "eta": [10, 0, 0],
      "factors": [{"type": "xor", "vars": [0, 1, 2]}]})");
  Run z = run("loss " + at + " " + gold);
  CHECK(z.code == 0);
  CHECK(z.out.find("\"loss\": 0,") != std::string::npos);
  CHECK(z.out.find("\"grad_eta_m\": [0, 0, 0]") != std::string::npos);

  auto bad = write("gold_bad.json", R"({"y": [1, 1, 0]})");
  Run b = run("loss " + in + " " + bad);
  CHECK(b.code == 1);
  CHECK_FALSE(b.err.empty());
}

TEST_CASE("gradcheck") {
  auto in = write("xor.json", kXor);
  Run r = run("gradcheck " + in + " --trials 5 --seed 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);

  Run none = run("gradcheck " + in + " --trials 0");
  CHECK(none.code == 0);
  CHECK(none.out.empty());

  auto m = write("matching.json", kMatching);
  CHECK(run("gradcheck " + m + " --max-iter 2").code == 2);
}

TEST_CASE("repeated runs write identical files") {
  auto m = write("matching.json", kMatching);
  auto a = (kTmp / "run_a.json").string();
  auto b = (kTmp / "run_b.json").string();
  CHECK(run("solve " + m + " -o " + a).code == 0);
  CHECK(run("solve " + m + " -o " + b).code == 0);
  CHECK(slurp(a) == slurp(b));
}
