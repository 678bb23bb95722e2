#pragma once

// Command-line front end. dispatch() returns the process exit code:
// 0 success, 1 usage error, 2 data or validation error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ssdl/baselines.hpp"
#include "ssdl/bench.hpp"
#include "ssdl/curation.hpp"
#include "ssdl/dedim.hpp"
#include "ssdl/density.hpp"
#include "ssdl/gaussian.hpp"
#include "ssdl/mixmatch.hpp"

namespace ssdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// Model files carry the labelled standardization in front of the model body,
// so scoring applies exactly the transform used at fit time.
inline void save_density(const std::string& path, const StandardizationStats& st, const DensityModel& m) {
  auto out = detail::open_output(path);
  write_standardizer(out, st);
  write_density_model(out, m);
}

inline void save_gaussian(const std::string& path, const StandardizationStats& st, const GaussianModel& m) {
  auto out = detail::open_output(path);
  write_standardizer(out, st);
  write_gaussian_model(out, m);
}

inline void save_net(const std::string& path, const StandardizationStats& st, const MlpNet& net) {
  auto out = detail::open_output(path);
  write_standardizer(out, st);
  write_mlp(out, net);
}

template <class Model, class Reader>
std::pair<StandardizationStats, Model> load_model(const std::string& path, Reader read) {
  auto in = detail::open_input(path);
  TokenReader tr(in);
  auto st = read_standardizer(tr);
  Model m = read(tr);
  if (!tr.at_end()) throw DataError("model file '" + path + "' has trailing content");
  if (static_cast<std::size_t>(st.means.size()) != m.d()) {
    throw DataError("model file '" + path + "': standardizer and model dimensions differ");
  }
  return {std::move(st), std::move(m)};
}

inline void check_dim(const FeatureTable& t, std::size_t d, const std::string& what) {
  if (t.d() != d) {
    throw DataError(what + " has " + std::to_string(t.d()) + " features, expected " + std::to_string(d));
  }
}

struct Options {
  std::string labelled, unlabelled, test, in, out, model, scores, method, a, b, config, out_dir, history;
  int bins = kDefaultBins;
  double shrinkage = kDefaultShrinkage;
  double drop_frac = 0.0;
  std::uint64_t seed = 0;
  std::size_t batch = 40, batches = 10, mcd_passes = kDefaultMcdPasses;
  MixMatchConfig mm{};
  std::string optimizer = "adam";
};

inline void add_train_flags(CLI::App* sub, Options& o) {
  auto& tc = o.mm.train;
  sub->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", tc.batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--lr-max", tc.schedule.lr_max, "Peak one-cycle learning rate")->capture_default_str();
  sub->add_option("--weight-decay", tc.weight_decay, "Decoupled weight decay")->capture_default_str();
  sub->add_option("--dropout", tc.dropout, "Hidden-layer dropout probability")->capture_default_str();
  sub->add_option("--optimizer", o.optimizer, "adam or sgd")
      ->capture_default_str()
      ->check(CLI::IsMember({"adam", "sgd"}));
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
}

inline void apply_optimizer(Options& o) {
  o.mm.train.optimizer = o.optimizer == "sgd" ? Optimizer::sgd : Optimizer::adam;
  o.mm.train.seed = o.seed;
}

inline void run_fit_density(const Options& o, std::ostream&) {
  const auto lab = load_feature_table(o.labelled, false);
  const auto st = fit_standardizer(lab);
  save_density(o.out, st, fit_feature_histograms(apply_standardizer(lab, st), o.bins));
}

inline void run_fit_gaussian(const Options& o, std::ostream&) {
  const auto lab = load_feature_table(o.labelled, false);
  const auto st = fit_standardizer(lab);
  save_gaussian(o.out, st, fit_gaussian(apply_standardizer(lab, st), o.shrinkage));
}

inline void run_score(Options o, std::ostream&) {
  apply_optimizer(o);
  const auto in = load_feature_table(o.in, false);
  std::vector<double> harm;
  if (o.method == "fh" || o.method == "mahalanobis") {
    if (o.model.empty()) throw CLI::RequiredError("--model is required for --method " + o.method);
    if (o.method == "fh") {
      const auto [st, m] = load_model<DensityModel>(o.model, [](TokenReader& t) { return read_density_model(t); });
      check_dim(in, m.d(), "--in");
      harm = score_table_fh(m, apply_standardizer(in, st));
    } else {
      const auto [st, m] = load_model<GaussianModel>(o.model, [](TokenReader& t) { return read_gaussian_model(t); });
      check_dim(in, m.d(), "--in");
      harm = score_table_mahalanobis(m, apply_standardizer(in, st));
    }
  } else {
    if (o.labelled.empty()) throw CLI::RequiredError("--labelled is required for --method " + o.method);
    const auto lab = load_feature_table(o.labelled, true);
    check_dim(in, lab.d(), "--in");
    const auto st = fit_standardizer(lab);
    const auto head = train_baseline_head(apply_standardizer(lab, st), o.mm.train);
    const auto x = apply_standardizer(in, st);
    harm = o.method == "softmax" ? score_table_softmax(head, x)
                                 : score_table_mcd(head, x, o.mcd_passes, derive_seed(o.seed, 1));
  }
  save_score_csv(o.out, attach_ids(in, harm));
}

inline void run_filter(const Options& o, std::ostream& out) {
  const auto in = load_feature_table(o.in, false);
  const auto scores = align_scores(in, load_score_csv(o.scores));
  const auto decision = rank_and_filter(scores, o.drop_frac);
  save_feature_table(o.out, apply_filter(in, decision));
  out << "kept," << decision.kept.size() << "\ndropped," << decision.dropped.size() << '\n';
}

inline void run_dedim(const Options& o, std::ostream& out) {
  const auto a = load_feature_table(o.a, false);
  const auto b = load_feature_table(o.b, false);
  DedimOptions opt;
  opt.batch_size = o.batch;
  opt.n_batches = o.batches;
  opt.bins = o.bins;
  opt.seed = o.seed;
  const auto r = dedim_cosine(a.without_labels(), b.without_labels(), opt);
  out << "mean,std\n" << format_real(r.mean) << ',' << format_real(r.std) << '\n';
}

inline void run_train(Options o, std::ostream& out) {
  apply_optimizer(o);
  const auto lab = load_feature_table(o.labelled, true);
  const auto st = fit_standardizer(lab);
  FeatureTable unl({}, Matrix(0, static_cast<Eigen::Index>(lab.d())));
  if (!o.unlabelled.empty()) unl = load_feature_table(o.unlabelled, false).without_labels();
  FeatureTable test;
  if (!o.test.empty()) {
    test = load_feature_table(o.test, true);
    check_dim(test, lab.d(), "--test");
  }
  check_dim(unl, lab.d(), "--unlabelled");
  const auto res = train_mixmatch(apply_standardizer(lab, st), apply_standardizer(unl, st),
                                  test.empty() ? test : apply_standardizer(test, st), o.mm);
  if (!o.out.empty()) save_net(o.out, st, res.net);
  const auto& h = res.history;
  if (!o.history.empty()) {
    auto hist = detail::open_output(o.history);
    hist << "epoch,supervised_loss,unsupervised_loss,test_accuracy\n";
    for (std::size_t e = 0; e < h.test_accuracy.size(); ++e) {
      hist << e + 1 << ',' << format_real(h.supervised_loss[e]) << ',' << format_real(h.unsupervised_loss[e]) << ','
           << format_real(h.test_accuracy[e]) << '\n';
    }
  }
  out << "test_accuracy," << format_real(h.test_accuracy.back()) << '\n';
}

inline void run_bench(const Options& o, std::ostream& out) {
  const auto config = load_bench_config(o.config);
  const auto report = run_benchmark(config);
  write_bench_outputs(o.out_dir, report);
  out << "records," << report.records.size() << "\npearson_dedim_accuracy," << format_real(report.pearson_dedim_accuracy)
      << '\n';
}

inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harm scoring, filtering and evaluation of unlabelled data for semi-supervised learning", "ssdl"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;

  auto* fd = app.add_subcommand("fit-density", "Fit per-feature histograms to a labelled feature CSV");
  fd->add_option("--labelled", o.labelled, "Labelled feature CSV")->required()->check(CLI::ExistingFile);
  fd->add_option("--bins", o.bins, "Bins per feature")->capture_default_str()->check(CLI::PositiveNumber);
  fd->add_option("--out", o.out, "Model output path")->required();

  auto* fg = app.add_subcommand("fit-gaussian", "Fit a shrunk Gaussian to a labelled feature CSV");
  fg->add_option("--labelled", o.labelled, "Labelled feature CSV")->required()->check(CLI::ExistingFile);
  fg->add_option("--shrinkage", o.shrinkage, "Shrinkage weight toward the scaled identity")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  fg->add_option("--out", o.out, "Model output path")->required();

  auto* sc = app.add_subcommand("score", "Write harm scores (id,harm) sorted by descending harm");
  sc->add_option("--method", o.method, "fh, mahalanobis, softmax or mcd")
      ->required()
      ->check(CLI::IsMember({"fh", "mahalanobis", "softmax", "mcd"}));
  sc->add_option("--model", o.model, "Model from fit-density / fit-gaussian")->check(CLI::ExistingFile);
  sc->add_option("--labelled", o.labelled, "Labelled CSV for the softmax/mcd head")->check(CLI::ExistingFile);
  sc->add_option("--in", o.in, "Feature CSV to score")->required()->check(CLI::ExistingFile);
  sc->add_option("--out", o.out, "Score CSV output path")->required();
  sc->add_option("--mcd-passes", o.mcd_passes, "Dropout passes for mcd")->capture_default_str()->check(CLI::Range(2, 100000));
  add_train_flags(sc, o);

  auto* fl = app.add_subcommand("filter", "Drop the highest-harm fraction of a feature CSV");
  fl->add_option("--in", o.in, "Feature CSV")->required()->check(CLI::ExistingFile);
  fl->add_option("--scores", o.scores, "Score CSV covering every id")->required()->check(CLI::ExistingFile);
  fl->add_option("--drop-frac", o.drop_frac, "Fraction of rows to drop")->required()->check(CLI::Range(0.0, 1.0));
  fl->add_option("--out", o.out, "Filtered CSV output path")->required();

  auto* dd = app.add_subcommand("dedim", "Cosine DeDiM between two feature CSVs; prints mean,std");
  dd->add_option("--a", o.a, "First feature CSV")->required()->check(CLI::ExistingFile);
  dd->add_option("--b", o.b, "Second feature CSV")->required()->check(CLI::ExistingFile);
  dd->add_option("--batch", o.batch, "Rows per batch")->capture_default_str()->check(CLI::PositiveNumber);
  dd->add_option("--batches", o.batches, "Number of batches")->capture_default_str()->check(CLI::PositiveNumber);
  dd->add_option("--bins", o.bins, "Histogram bins per feature")->capture_default_str()->check(CLI::PositiveNumber);
  dd->add_option("--seed", o.seed, "Random seed")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train MixMatch; prints final test accuracy");
  tr->add_option("--labelled", o.labelled, "Labelled feature CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--unlabelled", o.unlabelled, "Unlabelled feature CSV (omit for supervised)")
      ->check(CLI::ExistingFile);
  tr->add_option("--test", o.test, "Labelled test CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--gamma", o.mm.gamma, "Unsupervised loss weight")->capture_default_str();
  tr->add_option("--k", o.mm.k, "Augmentations per unlabelled row")->capture_default_str();
  tr->add_option("--temp", o.mm.temperature, "Sharpening temperature")->capture_default_str();
  tr->add_option("--alpha", o.mm.alpha, "MixUp Beta parameter")->capture_default_str();
  tr->add_option("--aug-sigma", o.mm.aug_sigma, "Gaussian augmentation scale")->capture_default_str();
  tr->add_option("--gamma-rampup", o.mm.gamma_rampup, "Fraction of steps over which gamma ramps up")
      ->capture_default_str();
  tr->add_option("--out", o.out, "Network output path");
  tr->add_option("--history", o.history, "Per-epoch history CSV output path");
  add_train_flags(tr, o);

  auto* bn = app.add_subcommand("bench", "Run the contamination benchmark");
  bn->add_option("--config", o.config, "key=value config file")->required()->check(CLI::ExistingFile);
  bn->add_option("--out-dir", o.out_dir, "Directory for records.csv, summary.csv, report.md")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fd->parsed()) run_fit_density(o, out);
    else if (fg->parsed()) run_fit_gaussian(o, out);
    else if (sc->parsed()) run_score(o, out);
    else if (fl->parsed()) run_filter(o, out);
    else if (dd->parsed()) run_dedim(o, out);
    else if (tr->parsed()) run_train(o, out);
    else if (bn->parsed()) run_bench(o, out);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace ssdl::cli
