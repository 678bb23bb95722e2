#pragma once

// Contamination benchmark over the synthetic mismatch fixture: for every
// (fraction, seed, scorer) cell build the unlabelled set, filter it, train
// MixMatch and record test accuracy, DeDiM and the scorer's OOD AUROC.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssdl/baselines.hpp"
#include "ssdl/curation.hpp"
#include "ssdl/dedim.hpp"
#include "ssdl/density.hpp"
#include "ssdl/gaussian.hpp"
#include "ssdl/mixmatch.hpp"
#include "ssdl/stats.hpp"
#include "ssdl/synthetic.hpp"

namespace ssdl {

inline const std::vector<std::string> kScorers = {"none", "fh", "mahalanobis", "softmax", "mcd"};

struct BenchConfig {
  SyntheticSpec data{};
  MixMatchConfig mixmatch{};
  std::vector<double> fractions = {0.0, 0.35, 0.65, 1.0};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<std::string> scorers = kScorers;
  int bins = kDefaultBins;
  double shrinkage = kDefaultShrinkage;
  std::size_t mcd_passes = kDefaultMcdPasses;
  DedimOptions dedim{};
};

inline void validate(const BenchConfig& c) {
  validate(c.data);
  validate(c.mixmatch);
  if (c.fractions.empty()) throw DataError("bench: no contamination fractions");
  if (c.seeds.empty()) throw DataError("bench: no seeds");
  if (c.scorers.empty()) throw DataError("bench: no scorers");
  for (double f : c.fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw DataError("bench: fraction outside [0, 1]");
  }
  for (const auto& s : c.scorers) {
    if (std::find(kScorers.begin(), kScorers.end(), s) == kScorers.end()) {
      throw DataError("bench: unknown scorer '" + s + "'");
    }
  }
  if (c.bins < 1) throw DataError("bench: bins must be >= 1");
  if (!(c.shrinkage >= 0.0 && c.shrinkage <= 1.0)) throw DataError("bench: shrinkage must lie in [0, 1]");
  if (c.mcd_passes < 2) throw DataError("bench: mcd_passes must be >= 2");
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline double config_real(const std::string& key, const std::string& v, std::size_t line) {
  const auto x = parse_real(v);
  if (!x) throw ParseError("'" + key + "' expects a number, got '" + v + "'", line);
  return *x;
}

inline std::uint64_t config_count(const std::string& key, const std::string& v, std::size_t line) {
  const auto x = parse_int(v);
  if (!x || *x < 0) throw ParseError("'" + key + "' expects a non-negative integer, got '" + v + "'", line);
  return static_cast<std::uint64_t>(*x);
}

}  // namespace detail

// Flat key=value text; '#' starts a comment. Lists are comma separated.
inline BenchConfig read_bench_config(std::istream& in) {
  BenchConfig c;
  auto& tc = c.mixmatch.train;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text(detail::trim(raw));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line);
    const std::string key(detail::trim(std::string_view(text).substr(0, eq)));
    const std::string val(detail::trim(std::string_view(text).substr(eq + 1)));
    auto real = [&] { return detail::config_real(key, val, line); };
    auto count = [&] { return detail::config_count(key, val, line); };
    if (key == "d") c.data.d = count();
    else if (key == "separation") c.data.separation = real();
    else if (key == "spread") c.data.spread = real();
    else if (key == "positive_spread") c.data.positive_spread = real();
    else if (key == "shift") c.data.shift = real();
    else if (key == "n_l") c.data.n_l = count();
    else if (key == "n_u") c.data.n_u = count();
    else if (key == "n_test") c.data.n_test = count();
    else if (key == "pool_size") c.data.pool_size = count();
    else if (key == "fractions") {
      c.fractions.clear();
      for (const auto& s : detail::split_list(val)) c.fractions.push_back(detail::config_real(key, s, line));
    } else if (key == "seeds") {
      c.seeds.clear();
      for (const auto& s : detail::split_list(val)) c.seeds.push_back(detail::config_count(key, s, line));
    } else if (key == "scorers") c.scorers = detail::split_list(val);
    else if (key == "k") c.mixmatch.k = static_cast<int>(count());
    else if (key == "temperature") c.mixmatch.temperature = real();
    else if (key == "gamma") c.mixmatch.gamma = real();
    else if (key == "alpha") c.mixmatch.alpha = real();
    else if (key == "aug_sigma") c.mixmatch.aug_sigma = real();
    else if (key == "gamma_rampup") c.mixmatch.gamma_rampup = real();
    else if (key == "epochs") tc.epochs = count();
    else if (key == "batch_size") tc.batch_size = count();
    else if (key == "lr_max") tc.schedule.lr_max = real();
    else if (key == "weight_decay") tc.weight_decay = real();
    else if (key == "dropout") tc.dropout = real();
    else if (key == "hidden") {
      tc.hidden.clear();
      for (const auto& s : detail::split_list(val)) tc.hidden.push_back(static_cast<int>(detail::config_count(key, s, line)));
    } else if (key == "zero_init_output") tc.zero_init_output = count() != 0;
    else if (key == "optimizer") {
      if (val == "adam") tc.optimizer = Optimizer::adam;
      else if (val == "sgd") tc.optimizer = Optimizer::sgd;
      else throw ParseError("optimizer must be adam or sgd", line);
    } else if (key == "bins") c.bins = static_cast<int>(count());
    else if (key == "shrinkage") c.shrinkage = real();
    else if (key == "mcd_passes") c.mcd_passes = count();
    else if (key == "dedim_batch_size") c.dedim.batch_size = count();
    else if (key == "dedim_batches") c.dedim.n_batches = count();
    else throw ParseError("unknown key '" + key + "'", line);
  }
  validate(c);
  return c;
}

inline BenchConfig load_bench_config(const std::string& path) {
  auto in = detail::open_input(path);
  return read_bench_config(in);
}

struct BenchRecord {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  std::string scorer;
  double accuracy = std::nan("");
  double dedim_mean = std::nan("");  // over the unlabelled rows actually used; NaN if fewer than a DeDiM batch
  double dedim_std = std::nan("");
  double auroc = std::nan("");  // NaN for "none" and when the set holds a single source
  std::size_t n_unlabelled = 0;
  std::string status = "ok";
};

struct PairedTest {
  double fraction = 0.0;
  std::string scorer;
  std::string versus;
  std::size_t n = 0;
  double p_value = std::nan("");
  std::string note;
};

struct BenchReport {
  std::vector<BenchRecord> records;
  std::vector<double> supervised;  // per seed, gamma 0 and no unlabelled data
  double pearson_dedim_accuracy = std::nan("");
  std::vector<PairedTest> tests;
};

namespace detail {

inline std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

inline double final_accuracy(const MixMatchResult& r) { return r.history.test_accuracy.back(); }

struct SeedData {
  FeatureTable labelled, test, in_pool, ood_pool;
};

inline SeedData standardized_data(const BenchConfig& config, std::uint64_t seed) {
  const auto raw = gen_synthetic(config.data, seed);
  const auto stats = fit_standardizer(raw.labelled);
  return {apply_standardizer(raw.labelled, stats), apply_standardizer(raw.test, stats),
          apply_standardizer(raw.in_dist_pool, stats), apply_standardizer(raw.ood_pool, stats)};
}

}  // namespace detail

inline MixMatchConfig seeded_mixmatch(const BenchConfig& config, std::uint64_t seed) {
  MixMatchConfig mc = config.mixmatch;
  mc.train.seed = derive_seed(seed, 99);
  return mc;
}

// Labelled-only reference: the same trainer with gamma 0 and no unlabelled rows.
inline double supervised_accuracy(const BenchConfig& config, std::uint64_t seed) {
  const auto data = detail::standardized_data(config, seed);
  MixMatchConfig mc = seeded_mixmatch(config, seed);
  mc.gamma = 0.0;
  const FeatureTable none({}, Matrix(0, static_cast<Eigen::Index>(data.labelled.d())));
  return detail::final_accuracy(train_mixmatch(data.labelled, none, data.test, mc));
}

// Harm scores for the unlabelled rows; higher means more likely harmful.
inline std::vector<double> harm_scores(const std::string& scorer, const FeatureTable& labelled,
                                       const FeatureTable& unlabelled, const BenchConfig& config,
                                       std::uint64_t seed) {
  if (scorer == "fh") return score_table_fh(fit_feature_histograms(labelled, config.bins), unlabelled);
  if (scorer == "mahalanobis") return score_table_mahalanobis(fit_gaussian(labelled, config.shrinkage), unlabelled);
  TrainConfig tc = config.mixmatch.train;
  tc.seed = derive_seed(seed, 7);
  const auto head = train_baseline_head(labelled, tc);
  if (scorer == "softmax") return score_table_softmax(head, unlabelled);
  if (scorer == "mcd") return score_table_mcd(head, unlabelled, config.mcd_passes, derive_seed(seed, 8));
  throw DataError("unknown scorer '" + scorer + "'");
}

inline BenchReport run_benchmark(const BenchConfig& config) {
  validate(config);
  BenchReport report;
  for (auto seed : config.seeds) report.supervised.push_back(supervised_accuracy(config, seed));

  for (double fraction : config.fractions) {
    for (auto seed : config.seeds) {
      const auto data = detail::standardized_data(config, seed);
      const auto mixed = contaminate(data.in_pool, data.ood_pool, fraction, config.data.n_u, derive_seed(seed, 5));
      const bool two_sources = std::count(mixed.ood.begin(), mixed.ood.end(), true) > 0 &&
                               std::count(mixed.ood.begin(), mixed.ood.end(), false) > 0;
      const MixMatchConfig mc = seeded_mixmatch(config, seed);
      DedimOptions dopt = config.dedim;
      dopt.seed = derive_seed(seed, 6);

      // Filtering keeps the same rows whenever nothing or everything is dropped,
      // so those cells share one training run.
      std::map<std::vector<std::string>, std::pair<double, std::string>> trained;
      for (const auto& scorer : config.scorers) {
        BenchRecord rec;
        rec.fraction = fraction;
        rec.seed = seed;
        rec.scorer = scorer;
        try {
          FeatureTable unlabelled = mixed.table;
          if (scorer != "none") {
            const auto harm = harm_scores(scorer, data.labelled, mixed.table, config, seed);
            if (two_sources) rec.auroc = auroc(harm, mixed.ood);
            unlabelled = apply_filter(mixed.table, rank_and_filter(attach_ids(mixed.table, harm), fraction));
          }
          rec.n_unlabelled = unlabelled.n();
          if (unlabelled.n() >= dopt.batch_size) {
            const auto dd = dedim_cosine(data.labelled, unlabelled, dopt);
            rec.dedim_mean = dd.mean;
            rec.dedim_std = dd.std;
          }
          auto it = trained.find(unlabelled.ids());
          if (it == trained.end()) {
            try {
              it = trained.emplace(unlabelled.ids(), std::pair{detail::final_accuracy(train_mixmatch(
                                                                    data.labelled, unlabelled, data.test, mc)),
                                                                std::string("ok")})
                       .first;
            } catch (const Error& e) {
              it = trained.emplace(unlabelled.ids(), std::pair{std::nan(""), detail::one_line(e.what())}).first;
            }
          }
          rec.accuracy = it->second.first;
          rec.status = it->second.second;
        } catch (const Error& e) {
          rec.status = detail::one_line(e.what());
        }
        report.records.push_back(std::move(rec));
      }
    }
  }

  std::vector<double> dd, acc;
  for (const auto& r : report.records) {
    if (r.scorer == "none" && std::isfinite(r.dedim_mean) && std::isfinite(r.accuracy)) {
      dd.push_back(r.dedim_mean);
      acc.push_back(r.accuracy);
    }
  }
  try {
    report.pearson_dedim_accuracy = pearson(dd, acc);
  } catch (const Error&) {
  }

  auto accuracies = [&](double fraction, const std::string& scorer) {
    std::vector<double> out;
    for (const auto& r : report.records) {
      if (r.fraction == fraction && r.scorer == scorer) out.push_back(r.accuracy);
    }
    return out;
  };
  for (double fraction : config.fractions) {
    if (fraction <= 0.0 || fraction >= 1.0) continue;
    for (std::size_t i = 0; i < config.scorers.size(); ++i) {
      for (std::size_t j = i + 1; j < config.scorers.size(); ++j) {
        const auto& a = config.scorers[i];
        const auto& b = config.scorers[j];
        if (a == "none" || b == "none") continue;
        PairedTest t{fraction, a, b, 0, std::nan(""), {}};
        const auto xa = accuracies(fraction, a), xb = accuracies(fraction, b);
        std::vector<double> pa, pb;
        for (std::size_t k = 0; k < xa.size(); ++k) {
          if (std::isfinite(xa[k]) && std::isfinite(xb[k])) {
            pa.push_back(xa[k]);
            pb.push_back(xb[k]);
          }
        }
        try {
          const auto w = wilcoxon_signed_rank(pa, pb);
          t.n = w.n;
          t.p_value = w.p_value;
        } catch (const Error& e) {
          t.note = detail::one_line(e.what());
        }
        report.tests.push_back(std::move(t));
      }
    }
  }
  return report;
}

inline void write_records_csv(std::ostream& out, const BenchReport& report) {
  out << "fraction,seed,scorer,accuracy,dedim_mean,dedim_std,auroc,n_unlabelled,status\n";
  for (const auto& r : report.records) {
    out << format_real(r.fraction) << ',' << r.seed << ',' << r.scorer << ',' << format_real(r.accuracy) << ','
        << format_real(r.dedim_mean) << ',' << format_real(r.dedim_std) << ',' << format_real(r.auroc) << ','
        << r.n_unlabelled << ',' << r.status << '\n';
  }
}

namespace detail {

template <class Pick>
std::vector<double> collect(const BenchReport& report, double fraction, const std::string& scorer, Pick pick) {
  std::vector<double> out;
  for (const auto& r : report.records) {
    if (r.fraction == fraction && r.scorer == scorer) out.push_back(pick(r));
  }
  return out;
}

inline std::vector<double> unique_fractions(const BenchReport& report) {
  std::vector<double> out;
  for (const auto& r : report.records) {
    if (std::find(out.begin(), out.end(), r.fraction) == out.end()) out.push_back(r.fraction);
  }
  return out;
}

inline std::vector<std::string> unique_scorers(const BenchReport& report) {
  std::vector<std::string> out;
  for (const auto& r : report.records) {
    if (std::find(out.begin(), out.end(), r.scorer) == out.end()) out.push_back(r.scorer);
  }
  return out;
}

inline std::size_t count_finite(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return std::isfinite(x); }));
}

}  // namespace detail

inline void write_summary_csv(std::ostream& out, const BenchReport& report) {
  out << "metric,fraction,scorer,versus,n,mean,std,value\n";
  const auto row = [&](const std::string& metric, const std::string& fraction, const std::string& scorer,
                       const std::string& versus, const std::vector<double>& xs, double value) {
    const auto ms = mean_std(xs);
    out << metric << ',' << fraction << ',' << scorer << ',' << versus << ',' << detail::count_finite(xs) << ','
        << format_real(ms.mean) << ',' << format_real(ms.std) << ',' << format_real(value) << '\n';
  };
  const double nan = std::nan("");
  for (double f : detail::unique_fractions(report)) {
    for (const auto& s : detail::unique_scorers(report)) {
      const auto fs = format_real(f);
      row("accuracy", fs, s, "", detail::collect(report, f, s, [](const BenchRecord& r) { return r.accuracy; }), nan);
      row("dedim", fs, s, "", detail::collect(report, f, s, [](const BenchRecord& r) { return r.dedim_mean; }), nan);
      if (s != "none") {
        row("auroc", fs, s, "", detail::collect(report, f, s, [](const BenchRecord& r) { return r.auroc; }), nan);
      }
    }
  }
  row("supervised_accuracy", "", "", "", report.supervised, nan);
  out << "pearson_dedim_accuracy,,none,,,,," << format_real(report.pearson_dedim_accuracy) << '\n';
  for (const auto& t : report.tests) {
    out << "wilcoxon_p," << format_real(t.fraction) << ',' << t.scorer << ',' << t.versus << ',' << t.n << ",,,"
        << format_real(t.p_value) << '\n';
  }
}

namespace detail {

inline std::string fixed(double v, int digits = 3) {
  if (!std::isfinite(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pm(const std::vector<double>& xs) {
  const auto ms = mean_std(xs);
  if (!std::isfinite(ms.mean)) return "n/a";
  return fixed(ms.mean) + " ± " + fixed(ms.std);
}

}  // namespace detail

inline void write_report_md(std::ostream& out, const BenchReport& report) {
  const auto fractions = detail::unique_fractions(report);
  const auto scorers = detail::unique_scorers(report);
  const auto header = [&](const std::string& first) {
    out << "| " << first << " |";
    for (double f : fractions) out << " c = " << detail::fixed(f, 2) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < fractions.size(); ++i) out << "---|";
    out << '\n';
  };

  out << "# Contamination benchmark\n\n";
  out << "Seeds per cell: " << report.supervised.size() << ". Drop fraction equals contamination fraction c.\n\n";
  out << "## Test accuracy (mean ± std)\n\n";
  header("filter");
  for (const auto& s : scorers) {
    out << "| " << s << " |";
    for (double f : fractions) {
      out << ' ' << detail::pm(detail::collect(report, f, s, [](const BenchRecord& r) { return r.accuracy; })) << " |";
    }
    out << '\n';
  }
  out << "\nSupervised only (no unlabelled data): " << detail::pm(report.supervised) << "\n\n";

  out << "## OOD AUROC of the harm scores\n\n";
  header("scorer");
  for (const auto& s : scorers) {
    if (s == "none") continue;
    out << "| " << s << " |";
    for (double f : fractions) {
      out << ' ' << detail::pm(detail::collect(report, f, s, [](const BenchRecord& r) { return r.auroc; })) << " |";
    }
    out << '\n';
  }

  out << "\n## DeDiM between labelled and unlabelled sets (unfiltered)\n\n";
  header("");
  out << "| DeDiM |";
  for (double f : fractions) {
    out << ' ' << detail::pm(detail::collect(report, f, "none", [](const BenchRecord& r) { return r.dedim_mean; }))
        << " |";
  }
  out << "\n\nPearson r between DeDiM and unfiltered accuracy: " << detail::fixed(report.pearson_dedim_accuracy)
      << "\n\n";

  if (!report.tests.empty()) {
    out << "## Wilcoxon signed-rank, paired over seeds (two-sided p)\n\n";
    out << "| c | filter | versus | n | p |\n|---|---|---|---|---|\n";
    for (const auto& t : report.tests) {
      out << "| " << detail::fixed(t.fraction, 2) << " | " << t.scorer << " | " << t.versus << " | " << t.n << " | "
          << (t.note.empty() ? detail::fixed(t.p_value, 4) : t.note) << " |\n";
    }
  }

  std::size_t failed = 0;
  for (const auto& r : report.records) failed += r.status != "ok";
  if (failed) out << "\nFailed cells: " << failed << " (see records.csv)\n";
}

inline void write_bench_outputs(const std::filesystem::path& dir, const BenchReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  {
    auto out = detail::open_output((dir / "records.csv").string());
    write_records_csv(out, report);
  }
  {
    auto out = detail::open_output((dir / "summary.csv").string());
    write_summary_csv(out, report);
  }
  auto out = detail::open_output((dir / "report.md").string());
  write_report_md(out, report);
}

}  // namespace ssdl
