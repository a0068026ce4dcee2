// Command-line surface: dataset generation, training, sampling, evaluation,
// and plotting, each writing a manifest describing how to reproduce it.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "clot/ablation.hpp"
#include "clot/baselines.hpp"
#include "clot/checkpoint.hpp"
#include "clot/dataset_io.hpp"
#include "clot/hash.hpp"
#include "clot/metrics.hpp"
#include "clot/semicircle.hpp"
#include "clot/training.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumeric = 4;

std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const std::string& artifact_path, json body) {
  body["library_version"] = clot::kVersion;
  body["written_at"] = iso_utc_now();
  std::ofstream os(artifact_path + ".manifest.json", std::ios::binary);
  if (!os.good()) {
    throw clot::validation_error("cannot write manifest next to " + artifact_path);
  }
  os << body.dump(2) << "\n";
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw clot::validation_error("bad number '" + item + "' in " + what);
    }
  }
  if (out.empty()) throw clot::validation_error(what + " is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) {
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) {
      throw clot::validation_error(what + " must contain integers");
    }
    out.push_back(i);
  }
  return out;
}

clot::Condition parse_condition(const std::string& text, bool discrete) {
  if (discrete) {
    const auto vals = parse_int_list(text, "--cond");
    if (vals.size() != 1) {
      throw clot::validation_error("--cond expects a single id for this model");
    }
    return clot::Condition::discrete(vals[0]);
  }
  const auto vals = parse_double_list(text, "--cond");
  return clot::Condition::continuous(
      Eigen::Map<const clot::VectorXd>(vals.data(), static_cast<clot::Index>(vals.size())));
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string preset;
  std::string times;
  std::string conditions = "1,2,3,4";
  std::string out;
  int n = 100;
  double radius_sigma = 0.05;
  double kappa = 5.0;
  std::uint64_t seed = 0;
};

int run_gen(const GenArgs& a) {
  if (a.preset != "semicircle") {
    throw clot::validation_error("unknown preset: " + a.preset +
                                 " (available: semicircle)");
  }
  clot::SemicircleOptions opts;
  opts.times = parse_double_list(a.times, "--times");
  opts.per_group = a.n;
  opts.radius_sigma = a.radius_sigma;
  opts.kappa = a.kappa;
  opts.conditions = parse_int_list(a.conditions, "--conditions");

  clot::Rng rng(a.seed);
  const clot::ObservationSet data = clot::generate_semicircle(opts, rng);
  clot::write_dataset(a.out, data);

  write_manifest(a.out, json{{"command", "gen"},
                             {"preset", a.preset},
                             {"times", opts.times},
                             {"conditions", opts.conditions},
                             {"samples_per_group", a.n},
                             {"radius_sigma", a.radius_sigma},
                             {"kappa", a.kappa},
                             {"seed", a.seed},
                             {"records", data.size()},
                             {"dataset_sha256", clot::Sha256::of_file(a.out)}});
  std::cout << "wrote " << data.size() << " records to " << a.out << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::string variant;
  std::string trace;
  std::vector<std::string> overrides;
  bool quiet = false;
};

clot::TrainingConfig resolve_config(const std::string& config_path,
                                    const std::vector<std::string>& overrides,
                                    const std::string& variant) {
  clot::ConfigDoc doc = config_path.empty()
                            ? clot::ConfigDoc()
                            : clot::ConfigDoc::parse_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw clot::validation_error("--set expects key=value, got '" + kv + "'");
    }
    doc.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  clot::TrainingConfig cfg = clot::training_config_from_doc(doc);
  doc.reject_unknown();
  if (!variant.empty()) {
    clot::apply_variant(cfg, clot::variant_from_name(variant));
  }
  return cfg;
}

int run_train(const TrainArgs& a) {
  auto data = std::make_shared<clot::ObservationSet>(clot::read_dataset(a.data));
  const clot::TrainingConfig cfg = resolve_config(a.config, a.overrides, a.variant);

  const std::string trace_path = a.trace.empty() ? a.out + ".trace.jsonl" : a.trace;
  write_manifest(a.out, json{{"command", "train"},
                             {"data", a.data},
                             {"dataset_sha256", clot::Sha256::of_file(a.data)},
                             {"config", json::parse(clot::training_config_to_json(cfg))},
                             {"variant", a.variant},
                             {"seed", cfg.seed},
                             {"trace", trace_path},
                             {"started_at", iso_utc_now()}});

  std::ofstream trace(trace_path, std::ios::binary);
  if (!trace.good()) {
    throw clot::validation_error("cannot write trace file: " + trace_path);
  }
  clot::Trainer trainer(data, cfg);
  trainer.run(&trace, a.quiet ? nullptr : &std::cerr);
  const auto model = trainer.finish();
  clot::save_model(*model, cfg, a.out);
  std::cout << "wrote model to " << a.out << "\n";
  return 0;
}

// ---- sample -----------------------------------------------------------------

struct SampleArgs {
  std::string model;
  std::string cond;
  std::string out;
  double t = 0.0;
  double lambda = 0.0;
  bool has_t = false;
  bool has_lambda = false;
  int n = 100;
  std::uint64_t seed = 0;
};

int run_sample(const SampleArgs& a) {
  if (a.has_t == a.has_lambda) {
    throw clot::validation_error("pass exactly one of --t or --lambda");
  }
  const auto model = clot::load_model(a.model);
  const clot::ObservationSet& anchors = model->anchors();
  const double t_star =
      a.has_t ? a.t : anchors.time_map().to_unit(a.lambda);
  const clot::Condition x = parse_condition(a.cond, anchors.discrete_conditions());

  clot::Rng rng(a.seed);
  const clot::MatrixXd samples = model->sample_many(t_star, x, a.n, rng);

  std::vector<clot::SampleRecord> records;
  records.reserve(static_cast<std::size_t>(a.n));
  for (int i = 0; i < a.n; ++i) {
    clot::SampleRecord r;
    r.y = samples.col(i);
    r.x = x;
    r.t = t_star;
    r.lambda = anchors.time_map().to_raw(t_star);
    r.seed = a.seed;
    r.draw = i;
    records.push_back(std::move(r));
  }
  clot::write_samples(a.out, records, anchors.discrete_conditions());

  write_manifest(a.out, json{{"command", "sample"},
                             {"model", a.model},
                             {"model_sha256", clot::Sha256::of_file(a.model)},
                             {"t", t_star},
                             {"cond", a.cond},
                             {"n", a.n},
                             {"seed", a.seed},
                             {"samples_sha256", clot::Sha256::of_file(a.out)}});
  std::cout << "wrote " << a.n << " samples to " << a.out << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string model;
  std::string out;
  std::string table;
  std::string times = "0.25,0.75";
  std::string variants = "K_I,K_theta,K_I-U,K_theta-U";
  std::string config;
  std::vector<std::string> overrides;
  bool ablation = false;
  int runs = 5;
  int n = 100;
  int gen_n = 100;
  double radius_sigma = 0.05;
  double kappa = 5.0;
  std::uint64_t seed = 1;
  bool quiet = false;
};

int run_eval(const EvalArgs& a) {
  if (a.ablation == !a.model.empty()) {
    throw clot::validation_error("pass exactly one of --model or --ablation");
  }
  clot::SemicircleOptions gen;
  gen.per_group = a.gen_n;
  gen.radius_sigma = a.radius_sigma;
  gen.kappa = a.kappa;

  clot::AblationReport report;
  report.eval_times = parse_double_list(a.times, "--times");
  report.eval_samples = a.n;

  if (a.ablation) {
    clot::AblationOptions opts;
    opts.eval_times = report.eval_times;
    opts.runs = a.runs;
    opts.seed = a.seed;
    opts.eval_samples = a.n;
    std::vector<std::pair<std::string, clot::TrainingConfig>> variants;
    std::stringstream ss(a.variants);
    std::string name;
    while (std::getline(ss, name, ',')) {
      clot::TrainingConfig cfg = resolve_config(a.config, a.overrides, name);
      variants.emplace_back(name, cfg);
    }
    report = clot::run_ablation(variants, gen, opts, a.quiet ? nullptr : &std::cerr);
  } else {
    const auto model = clot::load_model(a.model);
    clot::RunEval run = clot::evaluate_semicircle_model(
        *model, gen, report.eval_times, a.n, 0.05, a.seed);
    report.runs = 1;
    clot::VariantReport vr;
    vr.name = "model";
    vr.nll.mean = run.mean_nll;
    vr.cd.mean = run.mean_cd;
    vr.w2.mean = run.mean_w2;
    vr.runs.push_back(std::move(run));
    report.variants.push_back(std::move(vr));
  }

  {
    std::ofstream os(a.out, std::ios::binary);
    if (!os.good()) throw clot::validation_error("cannot write report: " + a.out);
    os << clot::ablation_report_to_json(report) << "\n";
  }
  if (!a.table.empty()) {
    std::ofstream os(a.table, std::ios::binary);
    if (!os.good()) throw clot::validation_error("cannot write table: " + a.table);
    os << clot::ablation_report_table(report);
  }
  write_manifest(a.out, json{{"command", "eval"},
                             {"model", a.model},
                             {"ablation", a.ablation},
                             {"times", report.eval_times},
                             {"n", a.n},
                             {"runs", report.runs},
                             {"seed", a.seed},
                             {"report_sha256", clot::Sha256::of_file(a.out)}});
  for (const auto& vr : report.variants) {
    std::cout << vr.name << ": nll " << vr.nll.mean << " cd " << vr.cd.mean
              << " w2 " << vr.w2.mean;
    if (vr.failed) std::cout << " (failed: " << vr.error << ")";
    std::cout << "\n";
  }
  return 0;
}

// ---- plot -------------------------------------------------------------------

struct PlotArgs {
  std::string model;
  std::string out;
  int per_cond = 12;
  int points = 64;
  std::uint64_t seed = 0;
};

struct Polyline {
  std::vector<std::pair<double, double>> pts;
  int cond_index = 0;
};

int run_plot(const PlotArgs& a) {
  const auto model = clot::load_model(a.model);
  const clot::ObservationSet& anchors = model->anchors();
  const clot::TransportBundle& bundle = model->bundle();
  if (anchors.dim() != 2) {
    throw clot::validation_error("plot supports 2-D outcomes only");
  }

  // Scatter: anchor samples, one lightness step per anchor time.
  struct Dot {
    double x, y;
    int cond_index, anchor;
  };
  std::vector<Dot> dots;
  const auto& conds = anchors.conditions();
  for (const auto& group : anchors.groups()) {
    int ci = 0;
    for (std::size_t i = 0; i < conds.size(); ++i) {
      if (conds[i] == group.x) ci = static_cast<int>(i);
    }
    for (clot::Index c = 0; c < group.ys.cols(); ++c) {
      dots.push_back({group.ys(0, c), group.ys(1, c), ci, group.anchor});
    }
  }

  // Trajectories: start points from the first anchor chained through every
  // interval's map, each leg rendered from its generated path.
  clot::Rng rng(a.seed);
  std::vector<Polyline> lines;
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    const auto* group = anchors.find_group(0, conds[ci]);
    if (group == nullptr || group->ys.cols() == 0) continue;
    const auto order = rng.permutation(static_cast<int>(group->ys.cols()));
    const int take = std::min<int>(a.per_cond, static_cast<int>(order.size()));
    for (int s = 0; s < take; ++s) {
      clot::VectorXd y = group->ys.col(order[static_cast<std::size_t>(s)]);
      Polyline line;
      line.cond_index = static_cast<int>(ci);
      for (int k = 0; k < bundle.interval_count(); ++k) {
        const clot::VectorXd y1 = bundle.predict_map1(k, y, conds[ci]);
        const clot::SplinePath path = bundle.predict_path1(y, y1, conds[ci]);
        for (int j = 0; j <= a.points; ++j) {
          const double frac = static_cast<double>(j) / a.points;
          const auto p = clot::spline_eval(path, bundle.basis(), frac);
          line.pts.emplace_back(p.q(0), p.q(1));
        }
        y = y1;
      }
      lines.push_back(std::move(line));
    }
  }

  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  const auto stretch = [&](double x, double y) {
    lo_x = std::min(lo_x, x);
    hi_x = std::max(hi_x, x);
    lo_y = std::min(lo_y, y);
    hi_y = std::max(hi_y, y);
  };
  for (const auto& d : dots) stretch(d.x, d.y);
  for (const auto& l : lines) {
    for (const auto& [x, y] : l.pts) stretch(x, y);
  }
  const double pad_x = 0.05 * std::max(1e-9, hi_x - lo_x);
  const double pad_y = 0.05 * std::max(1e-9, hi_y - lo_y);
  lo_x -= pad_x, hi_x += pad_x, lo_y -= pad_y, hi_y += pad_y;

  const double width = 840, height = 620, margin = 12;
  const auto X = [&](double x) {
    return margin + (x - lo_x) / (hi_x - lo_x) * (width - 2 * margin);
  };
  const auto Y = [&](double y) {
    return height - margin - (y - lo_y) / (hi_y - lo_y) * (height - 2 * margin);
  };
  const int hues[] = {210, 10, 130, 285, 60, 180};
  const auto hue_of = [&](int ci) { return hues[ci % 6]; };
  const int anchor_count = anchors.anchor_count();

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (const auto& l : lines) {
    svg << "<polyline fill=\"none\" stroke=\"hsl(" << hue_of(l.cond_index)
        << ",65%,45%)\" stroke-width=\"1\" stroke-opacity=\"0.55\" points=\"";
    for (const auto& [x, y] : l.pts) svg << X(x) << "," << Y(y) << " ";
    svg << "\"/>\n";
  }
  for (const auto& d : dots) {
    // Lightness walks dark as the anchor time advances.
    const int light =
        78 - (anchor_count > 1 ? (48 * d.anchor) / (anchor_count - 1) : 24);
    svg << "<circle cx=\"" << X(d.x) << "\" cy=\"" << Y(d.y)
        << "\" r=\"2.4\" fill=\"hsl(" << hue_of(d.cond_index) << ",70%," << light
        << "%)\"/>\n";
  }
  svg << "</svg>\n";

  {
    std::ofstream os(a.out, std::ios::binary);
    if (!os.good()) throw clot::validation_error("cannot write plot: " + a.out);
    os << svg.str();
  }
  write_manifest(a.out, json{{"command", "plot"},
                             {"model", a.model},
                             {"model_sha256", clot::Sha256::of_file(a.model)},
                             {"per_cond", a.per_cond},
                             {"points", a.points},
                             {"seed", a.seed},
                             {"trajectories", lines.size()}});
  std::cout << "wrote plot with " << lines.size() << " trajectories to " << a.out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional trajectory models via Lagrangian optimal transport"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a benchmark dataset");
  gen_cmd->add_option("--preset", gen.preset, "Generator preset (semicircle)")
      ->required();
  gen_cmd->add_option("--times", gen.times, "Comma-separated anchor times")
      ->required();
  gen_cmd->add_option("--out", gen.out, "Output dataset path")->required();
  gen_cmd->add_option("--n", gen.n, "Samples per (time, condition) cell");
  gen_cmd->add_option("--conditions", gen.conditions, "Condition ids");
  gen_cmd->add_option("--radius-sigma", gen.radius_sigma, "Radius log-normal sigma");
  gen_cmd->add_option("--kappa", gen.kappa, "Angle concentration");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a surrogate model");
  train_cmd->add_option("--data", train.data, "Dataset path")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint output path")->required();
  train_cmd->add_option("--config", train.config, "Key=value config file");
  train_cmd->add_option("--variant", train.variant,
                        "K_I | K_theta | K_I-U | K_theta-U");
  train_cmd->add_option("--trace", train.trace,
                        "Trace path (default <out>.trace.jsonl)");
  train_cmd->add_option("--set", train.overrides,
                        "Config override key=value (repeatable)");
  train_cmd->add_flag("--quiet", train.quiet, "Suppress progress output");

  SampleArgs sample;
  CLI::App* sample_cmd =
      app.add_subcommand("sample", "Draw samples from a trained model");
  sample_cmd->add_option("--model", sample.model, "Checkpoint path")->required();
  sample_cmd->add_option("--cond", sample.cond, "Condition (id or comma vector)")
      ->required();
  sample_cmd->add_option("--out", sample.out, "Samples output path")->required();
  CLI::Option* t_opt =
      sample_cmd->add_option("--t", sample.t, "Normalized query time in [0, 1]");
  CLI::Option* l_opt =
      sample_cmd->add_option("--lambda", sample.lambda, "Raw progression value");
  sample_cmd->add_option("--n", sample.n, "Sample count");
  sample_cmd->add_option("--seed", sample.seed, "Sampler seed");

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Score a model or run the variant ablation");
  eval_cmd->add_option("--model", eval.model, "Checkpoint to score");
  eval_cmd->add_flag("--ablation", eval.ablation,
                     "Train and score every variant from scratch");
  eval_cmd->add_option("--out", eval.out, "Report JSON path")->required();
  eval_cmd->add_option("--table", eval.table, "Optional flat TSV path");
  eval_cmd->add_option("--times", eval.times, "Eval times");
  eval_cmd->add_option("--variants", eval.variants, "Ablation variant names");
  eval_cmd->add_option("--config", eval.config, "Base config file");
  eval_cmd->add_option("--set", eval.overrides, "Config override (repeatable)");
  eval_cmd->add_option("--runs", eval.runs, "Seeded runs per variant");
  eval_cmd->add_option("--n", eval.n, "Samples per (time, condition) cell");
  eval_cmd->add_option("--gen-n", eval.gen_n, "Training samples per cell");
  eval_cmd->add_option("--radius-sigma", eval.radius_sigma, "Truth radius sigma");
  eval_cmd->add_option("--kappa", eval.kappa, "Truth angle concentration");
  eval_cmd->add_option("--seed", eval.seed, "Base seed");
  eval_cmd->add_flag("--quiet", eval.quiet, "Suppress progress output");

  PlotArgs plot;
  CLI::App* plot_cmd =
      app.add_subcommand("plot", "Render anchors and model trajectories as SVG");
  plot_cmd->add_option("--model", plot.model, "Checkpoint path")->required();
  plot_cmd->add_option("--out", plot.out, "SVG output path")->required();
  plot_cmd->add_option("--per-cond", plot.per_cond, "Trajectories per condition");
  plot_cmd->add_option("--points", plot.points, "Polyline points per interval");
  plot_cmd->add_option("--seed", plot.seed, "Start-point selection seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  sample.has_t = t_opt->count() > 0;
  sample.has_lambda = l_opt->count() > 0;

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (train_cmd->parsed()) return run_train(train);
    if (sample_cmd->parsed()) return run_sample(sample);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (plot_cmd->parsed()) return run_plot(plot);
  } catch (const clot::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
