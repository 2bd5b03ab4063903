#include <cstdlib>
#include <filesystem>
#include <string>

#include "blpinn/io.hpp"
#include "doctest.h"

#ifdef _WIN32
#error "the CLI harness assumes a POSIX shell"
#endif
#include <sys/wait.h>

using namespace blpinn;

namespace {

namespace fs = std::filesystem;

std::string cli_binary() {
  const char* env = std::getenv("BLPINN_CLI");
  REQUIRE_MESSAGE(env != nullptr, "BLPINN_CLI must point at the CLI binary");
  return env;
}

int run(const std::string& args) {
  const std::string cmd =
      "'" + cli_binary() + "' " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Fresh scratch directory per test case; contents survive for debugging
// until the next run of the same case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("blpinn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string micro_ini() {
  return "[run]\n"
         "seed = 3\n"
         "[scenario]\n"
         "snapshot_times = 0.2,0.5\n"
         "eval_nx = 16\n"
         "[sampling]\n"
         "n = 40\n"
         "n0 = 10\n"
         "nb = 10\n"
         "nr = 60\n"
         "[network]\n"
         "widths = 8\n"
         "[training]\n"
         "epochs = 12\n"
         "batch = 16\n"
         "log_every = 4\n"
         "[gan]\n"
         "epochs = 4\n"
         "batch_data = 8\n"
         "batch_collocation = 4\n"
         "gen_widths = 6\n"
         "disc_widths = 6\n"
         "post_widths = 6\n"
         "log_every = 2\n"
         "[uq]\n"
         "members = 8\n";
}

std::string write_config(const fs::path& dir) {
  const std::string path = (dir / "run.ini").string();
  write_text_file(path, micro_ini());
  return path;
}

std::size_t line_count(const std::string& path) {
  const std::string text = read_text_file(path);
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

} // namespace

TEST_CASE("cli rejects malformed invocations and configs") {
  const fs::path dir = scratch("args");
  CHECK(run("") == 2);                  // missing subcommand
  CHECK(run("frobnicate") == 2);        // unknown subcommand
  CHECK(run("train --mode banana --out '" + (dir / "x").string() + "'") == 2);

  const std::string bad = (dir / "bad.ini").string();
  write_text_file(bad, "[scenario\neval_nx = 16\n");
  CHECK(run("gen-data --config '" + bad + "' --out '" +
            (dir / "o").string() + "'") == 2);
  write_text_file(bad, "[training]\nepochs = banana\n");
  CHECK(run("gen-data --config '" + bad + "' --out '" +
            (dir / "o").string() + "'") == 2);
}

TEST_CASE("gen-data is byte-deterministic and respects --force") {
  const fs::path dir = scratch("gendata");
  const std::string cfg = write_config(dir);
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(run("gen-data --config '" + cfg + "' --out '" + a + "'") == 0);
  REQUIRE(run("gen-data --config '" + cfg + "' --out '" + b + "'") == 0);
  CHECK(read_text_file(a + "/samples.csv") ==
        read_text_file(b + "/samples.csv"));
  CHECK(read_text_file(a + "/oracle.csv") ==
        read_text_file(b + "/oracle.csv"));
  CHECK(line_count(a + "/samples.csv") == 1 + 40 + 10 + 10 + 60);
  CHECK(line_count(a + "/oracle.csv") == 1 + 2 * 16);

  // Existing outputs are refused without --force.
  CHECK(run("gen-data --config '" + cfg + "' --out '" + a + "'") == 2);
  CHECK(run("gen-data --config '" + cfg + "' --out '" + a + "' --force") ==
        0);

  // A different root seed changes the sampled set.
  const std::string c = (dir / "c").string();
  REQUIRE(run("gen-data --config '" + cfg + "' --seed 4 --out '" + c +
              "'") == 0);
  CHECK(read_text_file(a + "/samples.csv") !=
        read_text_file(c + "/samples.csv"));
}

TEST_CASE("train evaluate and transfer round trip") {
  const fs::path dir = scratch("train");
  const std::string cfg = write_config(dir);
  const std::string data = (dir / "data").string();
  REQUIRE(run("gen-data --config '" + cfg + "' --out '" + data + "'") == 0);
  const std::string samples = data + "/samples.csv";

  CHECK(run("train --config '" + cfg + "' --out '" + (dir / "x").string() +
            "'") == 2); // no dataset anywhere

  const std::string fit = (dir / "fit").string();
  REQUIRE(run("train --config '" + cfg + "' --data '" + samples +
              "' --out '" + fit + "'") == 0);
  CHECK(fs::exists(fit + "/net.ckpt"));
  CHECK(fs::exists(fit + "/history.csv"));
  const std::string report = read_text_file(fit + "/error_report.txt");
  CHECK(report.find("mse_data ") != std::string::npos);
  CHECK(report.find("m_hat ") != std::string::npos);

  const std::string eval = (dir / "eval").string();
  REQUIRE(run("evaluate --config '" + cfg + "' --checkpoint '" + fit +
              "/net.ckpt' --out '" + eval + "'") == 0);
  CHECK(line_count(eval + "/eval.csv") == 1 + 2 * 16);
  const std::string header = read_text_file(eval + "/eval.csv");
  CHECK(header.find("t,x,s_pred,s_true\n") == 0);

  CHECK(run("train --config '" + cfg + "' --data '" + samples +
            "' --mode transfer --out '" + (dir / "x2").string() + "'") ==
        2); // transfer without a checkpoint
  REQUIRE(run("train --config '" + cfg + "' --data '" + samples +
              "' --mode transfer --checkpoint '" + fit +
              "/net.ckpt' --out '" + (dir / "xfer").string() + "'") == 0);
  CHECK(fs::exists((dir / "xfer" / "net.ckpt").string()));
}

TEST_CASE("gan training and uncertainty propagation round trip") {
  const fs::path dir = scratch("gan");
  const std::string cfg = write_config(dir);
  const std::string data = (dir / "data").string();
  REQUIRE(run("gen-data --config '" + cfg + "' --out '" + data + "'") == 0);

  const std::string fit = (dir / "fit").string();
  REQUIRE(run("train --config '" + cfg + "' --data '" + data +
              "/samples.csv' --mode gan --out '" + fit + "'") == 0);
  CHECK(fs::exists(fit + "/generator.ckpt"));
  CHECK(fs::exists(fit + "/discriminator.ckpt"));
  CHECK(fs::exists(fit + "/posterior.ckpt"));
  CHECK(read_text_file(fit + "/history.csv")
            .find("epoch,d_loss,") == 0);

  const std::string uq = (dir / "uq").string();
  REQUIRE(run("uq --config '" + cfg + "' --checkpoint '" + fit +
              "/generator.ckpt' --out '" + uq + "'") == 0);
  CHECK(line_count(uq + "/ensemble.csv") == 1 + 2 * 16);
  CHECK(read_text_file(uq + "/ensemble.csv")
            .find("t,x,mean,std,lo2sd,hi2sd\n") == 0);

  // A plain (x,t) surrogate has no latent inputs to propagate.
  const std::string flat = (dir / "flat.ckpt").string();
  write_text_file(flat,
                  "net input_dim=2 widths=1 activation=tanh frozen=0 "
                  "count=3\n0\n0\n0\n");
  CHECK(run("uq --config '" + cfg + "' --checkpoint '" + flat +
            "' --out '" + (dir / "bad").string() + "'") == 2);

  // Generator ensembles are reproducible per seed.
  const std::string uq2 = (dir / "uq2").string();
  REQUIRE(run("uq --config '" + cfg + "' --checkpoint '" + fit +
              "/generator.ckpt' --out '" + uq2 + "'") == 0);
  CHECK(read_text_file(uq + "/ensemble.csv") ==
        read_text_file(uq2 + "/ensemble.csv"));
}
