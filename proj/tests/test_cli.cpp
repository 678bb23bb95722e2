#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "ssdl/cli.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kGolden = GOLDEN_DIR;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Numbers are rounded to 12 significant digits before comparison, and values
// below 1e-12 in magnitude count as zero. Everything else must match exactly.
std::string canonical(const std::string& text) {
  static const std::regex number(R"([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)");
  std::string out;
  auto it = std::sregex_iterator(text.begin(), text.end(), number);
  std::size_t last = 0;
  for (; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    const auto pos = static_cast<std::size_t>(m.position());
    // Digits glued to a word (ids such as u13) are part of that word.
    if (pos > 0 && std::isalpha(static_cast<unsigned char>(text[pos - 1]))) continue;
    out.append(text, last, pos - last);
    char buf[64];
    const double v = std::stod(m.str());
    std::snprintf(buf, sizeof buf, "%.12g", std::abs(v) < 1e-12 ? 0.0 : v);
    out += std::string(buf) == "-0" ? "0" : buf;
    last = pos + static_cast<std::size_t>(m.length());
  }
  out.append(text, last, std::string::npos);
  return out;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ssdl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return ssdl::cli::dispatch(args, out_, err_);
  }

  std::string in(const std::string& name) const { return (kGolden / name).string(); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }

  // Compare produced text with golden/<name>; SSDL_UPDATE_GOLDEN=1 rewrites it.
  void expect_golden(const std::string& name, const std::string& produced) {
    const auto path = kGolden / "expected" / name;
    if (std::getenv("SSDL_UPDATE_GOLDEN")) {
      fs::create_directories(path.parent_path());
      write_file(path, produced);
    }
    ASSERT_TRUE(fs::exists(path)) << "missing golden file " << path;
    EXPECT_EQ(canonical(read_file(path)), canonical(produced)) << name;
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST(CanonicalNumbers, TwelveSignificantDigits) {
  EXPECT_EQ(canonical("a,0.1234567890123456\n"), canonical("a,0.1234567890124\n"));
  EXPECT_NE(canonical("a,0.12345678901\n"), canonical("a,0.12345678902\n"));
  EXPECT_EQ(canonical("u13,2e-3"), "u13,0.002");
  EXPECT_EQ(canonical("1.48e-16 -3e-17"), "0 0");
}

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_NE(out_.str().find("fit-density"), std::string::npos);
  EXPECT_EQ(run({"score", "--help"}), 0);
  EXPECT_NE(out_.str().find("--mcd-passes"), std::string::npos);
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"dedim", "--a", in("labelled.csv"), "--b", in("labelled.csv"), "--bogus-flag"}), 1);
  EXPECT_NE(err_.str().find("--bogus-flag"), std::string::npos);
  EXPECT_EQ(run({"filter", "--in", in("unlabelled.csv")}), 1);
  EXPECT_EQ(run({"score", "--method", "fh", "--in", in("unlabelled.csv"), "--out", tmp("s.csv")}), 1);
  EXPECT_EQ(run({"score", "--method", "entropy", "--in", in("unlabelled.csv"), "--out", tmp("s.csv")}), 1);
}

TEST_F(Cli, DataErrorsExitTwo) {
  write_file(tmp("bad.csv"), "id,f0\na,1\nb,nan\n");
  EXPECT_EQ(run({"fit-density", "--labelled", tmp("bad.csv"), "--out", tmp("m.txt")}), 2);
  EXPECT_NE(err_.str().find("line 3"), std::string::npos);
  // Batch larger than either table.
  EXPECT_EQ(run({"dedim", "--a", in("labelled.csv"), "--b", in("test.csv"), "--batch", "40"}), 2);
  // Model dimension differs from the input.
  write_file(tmp("wide.csv"), "id,f0,f1\na,1,2\nb,3,5\nc,0,1\n");
  ASSERT_EQ(run({"fit-gaussian", "--labelled", tmp("wide.csv"), "--out", tmp("g.txt")}), 0);
  EXPECT_EQ(run({"score", "--method", "mahalanobis", "--model", tmp("g.txt"), "--in", in("unlabelled.csv"), "--out",
                 tmp("s.csv")}),
            2);
  write_file(tmp("junk.txt"), "standardizer 1\nmeans 0\nstddevs 1\nnot-a-model\n");
  EXPECT_EQ(run({"score", "--method", "fh", "--model", tmp("junk.txt"), "--in", in("unlabelled.csv"), "--out",
                 tmp("s.csv")}),
            2);
  write_file(tmp("scores.csv"), "id,harm\nu0,1\n");
  EXPECT_EQ(run({"filter", "--in", in("unlabelled.csv"), "--scores", tmp("scores.csv"), "--drop-frac", "0.5", "--out",
                 tmp("f.csv")}),
            2);
}

TEST_F(Cli, FitDensityGolden) {
  ASSERT_EQ(run({"fit-density", "--labelled", in("labelled.csv"), "--bins", "4", "--out", tmp("density.model")}), 0)
      << err_.str();
  expect_golden("density.model", read_file(tmp("density.model")));
}

TEST_F(Cli, FitGaussianGolden) {
  ASSERT_EQ(run({"fit-gaussian", "--labelled", in("labelled.csv"), "--shrinkage", "0.2", "--out", tmp("gauss.model")}), 0)
      << err_.str();
  expect_golden("gaussian.model", read_file(tmp("gauss.model")));
}

TEST_F(Cli, ScoreGoldenAllMethods) {
  ASSERT_EQ(run({"fit-density", "--labelled", in("labelled.csv"), "--out", tmp("d.model")}), 0);
  ASSERT_EQ(run({"fit-gaussian", "--labelled", in("labelled.csv"), "--out", tmp("g.model")}), 0);
  ASSERT_EQ(run({"score", "--method", "fh", "--model", tmp("d.model"), "--in", in("unlabelled.csv"), "--out",
                 tmp("fh.csv")}),
            0)
      << err_.str();
  expect_golden("scores_fh.csv", read_file(tmp("fh.csv")));
  ASSERT_EQ(run({"score", "--method", "mahalanobis", "--model", tmp("g.model"), "--in", in("unlabelled.csv"), "--out",
                 tmp("m.csv")}),
            0)
      << err_.str();
  expect_golden("scores_mahalanobis.csv", read_file(tmp("m.csv")));
  const std::vector<std::string> head{"--labelled", in("labelled.csv"), "--in", in("unlabelled.csv"), "--epochs", "5",
                                      "--seed", "3"};
  auto args = std::vector<std::string>{"score", "--method", "softmax", "--out", tmp("s.csv")};
  args.insert(args.end(), head.begin(), head.end());
  ASSERT_EQ(run(args), 0) << err_.str();
  expect_golden("scores_softmax.csv", read_file(tmp("s.csv")));
  args = {"score", "--method", "mcd", "--mcd-passes", "5", "--out", tmp("c.csv")};
  args.insert(args.end(), head.begin(), head.end());
  ASSERT_EQ(run(args), 0) << err_.str();
  const auto first = read_file(tmp("c.csv"));
  expect_golden("scores_mcd.csv", first);
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(read_file(tmp("c.csv")), first);
}

TEST_F(Cli, FilterGolden) {
  ASSERT_EQ(run({"fit-density", "--labelled", in("labelled.csv"), "--out", tmp("d.model")}), 0);
  ASSERT_EQ(run({"score", "--method", "fh", "--model", tmp("d.model"), "--in", in("unlabelled.csv"), "--out",
                 tmp("fh.csv")}),
            0);
  ASSERT_EQ(run({"filter", "--in", in("unlabelled.csv"), "--scores", tmp("fh.csv"), "--drop-frac", "0.35", "--out",
                 tmp("kept.csv")}),
            0)
      << err_.str();
  expect_golden("filter_stdout.txt", out_.str());
  expect_golden("filtered.csv", read_file(tmp("kept.csv")));
}

TEST_F(Cli, DedimGolden) {
  ASSERT_EQ(run({"dedim", "--a", in("labelled.csv"), "--b", in("unlabelled.csv"), "--batch", "20", "--batches", "5",
                 "--bins", "8", "--seed", "11"}),
            0)
      << err_.str();
  expect_golden("dedim_stdout.txt", out_.str());
}

TEST_F(Cli, TrainGolden) {
  ASSERT_EQ(run({"train", "--labelled", in("labelled.csv"), "--unlabelled", in("unlabelled.csv"), "--test",
                 in("test.csv"), "--epochs", "4", "--seed", "5", "--out", tmp("net.model"), "--history",
                 tmp("history.csv")}),
            0)
      << err_.str();
  expect_golden("train_stdout.txt", out_.str());
  expect_golden("train_history.csv", read_file(tmp("history.csv")));
  expect_golden("train_net.model", read_file(tmp("net.model")));
  // Supervised-only when no unlabelled file is given.
  ASSERT_EQ(run({"train", "--labelled", in("labelled.csv"), "--test", in("test.csv"), "--epochs", "4"}), 0);
  EXPECT_EQ(out_.str().rfind("test_accuracy,", 0), 0u);
}

TEST_F(Cli, BenchGolden) {
  ASSERT_EQ(run({"bench", "--config", in("bench.cfg"), "--out-dir", tmp("bench")}), 0) << err_.str();
  expect_golden("bench_stdout.txt", out_.str());
  expect_golden("bench_records.csv", read_file(tmp("bench/records.csv")));
  expect_golden("bench_summary.csv", read_file(tmp("bench/summary.csv")));
  EXPECT_TRUE(fs::exists(tmp("bench/report.md")));
}
