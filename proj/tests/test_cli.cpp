#include "slkato/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace slkato;
namespace fs = std::filesystem;

namespace {

fs::path out_dir(const std::string& name) { return fs::temp_directory_path() / "slkato_test_cli" / name; }

int run(const std::string& args, const fs::path& out) {
  fs::remove_all(out);
  const std::string cmd =
      std::string("\"") + SLKATO_CLI_PATH + "\" " + args + " --out \"" + out.string() + "\" > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

KeyValues manifest(const fs::path& out) { return read_key_values(out / "manifest.txt"); }

}  // namespace

TEST(Cli, AssembleTwoCellDirichletStiffness) {
  const auto out = out_dir("assemble");
  ASSERT_EQ(run("assemble --problem laplace --n 2", out), 0);
  const CsvTable k0 = read_csv(out / "K0.csv");
  EXPECT_EQ(k0.header, (std::vector<std::string>{"i", "j", "re", "im"}));
  ASSERT_EQ(k0.rows.size(), 1u);
  EXPECT_EQ(k0.rows[0], (std::vector<std::string>{"0", "0", "4", "0"}));
  EXPECT_EQ(manifest(out).at("exit_code"), "0");
}

TEST(Cli, VerifyKatoDefaultProblem) {
  const auto out = out_dir("kato");
  ASSERT_EQ(run("verify-kato", out), 0);
  const auto m = manifest(out);
  EXPECT_LE(std::stod(m.at("kato_identity.max_identity_error")), 1e-9);
  EXPECT_EQ(m.at("checks"), "kato_identity,two_step");
}

TEST(Cli, LionsHalfPowerIsDivergent) {
  const auto out = out_dir("lions");
  ASSERT_EQ(run("kappa-study --problem lions --alpha 0.5", out), 0);
  const CsvTable t = read_csv(out / "kappa.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"n", "E", "alpha", "min_ratio", "max_ratio", "kappa", "verdict"}));
  for (const auto& row : t.rows) EXPECT_EQ(row.back(), "divergent");
  EXPECT_EQ(manifest(out).at("growth_threshold"), "1.5");
}

TEST(Cli, ConfigFileAndFlagOverride) {
  const auto out = out_dir("config");
  fs::create_directories(out.parent_path());
  const fs::path cfg = out.parent_path() / "study.cfg";
  {
    std::ofstream os(cfg);
    os << "# refinement study\nproblem = lions\nalpha = 0.25\nn_list = 16, 32, 64\n";
  }
  ASSERT_EQ(run("kappa-study --config \"" + cfg.string() + "\" --alpha 0.5", out), 0);
  const CsvTable t = read_csv(out / "kappa.csv");
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][2], "0.5");
  EXPECT_EQ(manifest(out).at("config.n-list"), "16, 32, 64");
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(run("kappa-study --alpha 1.5", out_dir("e1")), 2);
  EXPECT_EQ(run("assemble --interval sideways", out_dir("e2")), 2);
  EXPECT_EQ(run("assemble --left notanangle", out_dir("e3")), 2);
  EXPECT_EQ(run("assemble --problem nosuchfamily", out_dir("e4")), 2);
  EXPECT_EQ(run("no-such-command", out_dir("e5")), 2);
  EXPECT_EQ(run("assemble --unknown-flag 3", out_dir("e6")), 2);
  const fs::path bad = out_dir("e7").parent_path() / "bad.cfg";
  {
    std::ofstream os(bad);
    os << "colour = blue\n";
  }
  EXPECT_EQ(run("assemble --config \"" + bad.string() + "\"", out_dir("e7")), 2);
}

TEST(Cli, AbortedCheckExitsOne) {
  // Below the safe shift the square-root kernel is refused.
  const auto out = out_dir("aborted");
  EXPECT_EQ(run("verify-krein --left neumann --E 0.5 --n-list 16,32,64", out), 1);
  EXPECT_EQ(manifest(out).at("passed"), "false");
}

TEST(Cli, CoefficientCsvInput) {
  const auto out = out_dir("custom");
  fs::create_directories(out.parent_path());
  const fs::path q = out.parent_path() / "q.csv";
  {
    std::ofstream os(q);
    os << "x,re,im\n0,1,0\n1,3,0.5\n";
  }
  ASSERT_EQ(run("assemble --problem custom --n 4 --q-csv \"" + q.string() + "\"", out), 0);
  const CsvTable k3 = read_csv(out / "K3.csv");
  EXPECT_FALSE(k3.rows.empty());
}

TEST(Cli, KernelDumpSchemas) {
  const auto out = out_dir("kernels");
  ASSERT_EQ(run("kernel-dump --left 1+0.5i --n 16", out), 0);
  EXPECT_EQ(read_csv(out / "green_kernel.csv").header, (std::vector<std::string>{"x", "xp", "re", "im"}));
  EXPECT_EQ(read_csv(out / "sqrt_kernel.csv").header, (std::vector<std::string>{"x", "xp", "re", "im"}));
  EXPECT_EQ(read_csv(out / "bessel_profile.csv").header, (std::vector<std::string>{"E", "lhs", "rhs"}));
}
