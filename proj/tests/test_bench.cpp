#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssdl/bench.hpp"

using namespace ssdl;

namespace {

BenchConfig parse(const std::string& text) {
  std::istringstream in(text);
  return read_bench_config(in);
}

BenchConfig tiny() {
  return parse(
      "d = 4\n"
      "n_l = 20\nn_u = 30\nn_test = 20\n"
      "fractions = 0, 0.5\n"
      "seeds = 0,1,2,3,4\n"
      "epochs = 3\nhidden = 8\n"
      "mcd_passes = 4\n"
      "dedim_batch_size = 10\ndedim_batches = 3\n");
}

}  // namespace

TEST(BenchConfigParse, DefaultsMatchDocumentedValues) {
  const auto c = parse("# nothing but a comment\n\n");
  EXPECT_EQ(c.fractions, (std::vector<double>{0.0, 0.35, 0.65, 1.0}));
  EXPECT_EQ(c.seeds.size(), 10u);
  EXPECT_EQ(c.scorers, kScorers);
  EXPECT_EQ(c.mixmatch.k, 2);
  EXPECT_EQ(c.mixmatch.temperature, 0.25);
  EXPECT_EQ(c.mixmatch.gamma, 200.0);
  EXPECT_EQ(c.mixmatch.train.epochs, 50u);
  EXPECT_EQ(c.mixmatch.train.weight_decay, 0.001);
  EXPECT_EQ(c.dedim.batch_size, 40u);
  EXPECT_EQ(c.dedim.n_batches, 10u);
  EXPECT_EQ(c.data.d, 16u);
  EXPECT_EQ(c.data.shift, 4.0);
}

TEST(BenchConfigParse, KeysListsAndComments) {
  const auto c = parse(
      "shift = 2.5   # trailing comment\n"
      "scorers = none, fh\n"
      "hidden = 32,16\n"
      "optimizer = sgd\n"
      "zero_init_output = 0\n"
      "seeds = 3, 9\n");
  EXPECT_EQ(c.data.shift, 2.5);
  EXPECT_EQ(c.scorers, (std::vector<std::string>{"none", "fh"}));
  EXPECT_EQ(c.mixmatch.train.hidden, (std::vector<int>{32, 16}));
  EXPECT_EQ(c.mixmatch.train.optimizer, Optimizer::sgd);
  EXPECT_FALSE(c.mixmatch.train.zero_init_output);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 9}));
}

TEST(BenchConfigParse, Errors) {
  EXPECT_THROW(parse("bogus = 1\n"), ParseError);
  EXPECT_THROW(parse("epochs\n"), ParseError);
  EXPECT_THROW(parse("shift = far\n"), ParseError);
  EXPECT_THROW(parse("seeds = -1\n"), ParseError);
  EXPECT_THROW(parse("optimizer = lbfgs\n"), ParseError);
  EXPECT_THROW(parse("scorers = none, magic\n"), DataError);
  EXPECT_THROW(parse("fractions = 1.5\n"), DataError);
  EXPECT_THROW(parse("mcd_passes = 1\n"), DataError);
  try {
    parse("d = 4\n\nbogus = 1\n");
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Benchmark, RecordCountsAndContents) {
  const auto c = tiny();
  const auto r = run_benchmark(c);
  ASSERT_EQ(r.records.size(), c.fractions.size() * c.seeds.size() * c.scorers.size());
  EXPECT_EQ(r.supervised.size(), c.seeds.size());
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.status, "ok");
    EXPECT_GE(rec.accuracy, 0.0);
    EXPECT_LE(rec.accuracy, 1.0);
    EXPECT_EQ(rec.n_unlabelled, 30u - round_half_up_count(rec.scorer == "none" ? 0.0 : rec.fraction, 30));
    if (rec.scorer == "none" || rec.fraction == 0.0) {
      EXPECT_TRUE(std::isnan(rec.auroc));
    } else {
      EXPECT_GE(rec.auroc, 0.0);
      EXPECT_LE(rec.auroc, 1.0);
    }
    EXPECT_GE(rec.dedim_mean, 0.0);
  }
  // Nothing is dropped at c = 0, so every scorer trains on the same rows.
  for (const auto& rec : r.records) {
    if (rec.fraction != 0.0) continue;
    for (const auto& other : r.records) {
      if (other.fraction == 0.0 && other.seed == rec.seed) {
        EXPECT_EQ(other.accuracy, rec.accuracy);
      }
    }
  }
  // Pairwise tests between the four filters at the single interior fraction.
  EXPECT_EQ(r.tests.size(), 6u);
}

TEST(Benchmark, DeterministicOutputs) {
  auto c = tiny();
  c.fractions = {0.5};
  c.seeds = {0, 1};
  c.scorers = {"none", "mahalanobis"};
  const auto a = run_benchmark(c), b = run_benchmark(c);
  std::ostringstream sa, sb;
  write_records_csv(sa, a);
  write_records_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Benchmark, DedimSkippedWhenTooFewRows) {
  auto c = tiny();
  c.fractions = {0.5};
  c.seeds = {0, 1};
  c.scorers = {"none", "fh"};
  c.dedim.batch_size = 100;  // larger than every unlabelled set
  const auto r = run_benchmark(c);
  EXPECT_EQ(r.records.size(), 4u);
  for (const auto& rec : r.records) {
    EXPECT_TRUE(std::isnan(rec.dedim_mean));
    EXPECT_EQ(rec.status, "ok");
  }
}

TEST(Benchmark, WritesAllOutputs) {
  auto c = tiny();
  c.fractions = {0.0, 1.0};
  c.seeds = {0, 1};
  c.scorers = {"none", "fh"};
  const auto r = run_benchmark(c);
  const auto dir = std::filesystem::temp_directory_path() / "ssdl_bench_outputs_test";
  std::filesystem::remove_all(dir);
  write_bench_outputs(dir, r);
  for (const char* name : {"records.csv", "summary.csv", "report.md"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  std::ifstream rec(dir / "records.csv");
  std::string header;
  std::getline(rec, header);
  EXPECT_EQ(header, "fraction,seed,scorer,accuracy,dedim_mean,dedim_std,auroc,n_unlabelled,status");
  std::size_t lines = 0;
  for (std::string line; std::getline(rec, line);) ++lines;
  EXPECT_EQ(lines, r.records.size());
  std::ifstream md(dir / "report.md");
  std::stringstream text;
  text << md.rdbuf();
  EXPECT_NE(text.str().find("Supervised only"), std::string::npos);
  std::filesystem::remove_all(dir);
}
