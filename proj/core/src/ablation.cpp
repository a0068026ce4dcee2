#include "clot/ablation.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <ostream>
#include <sstream>

namespace clot {

using nlohmann::json;

const VariantReport* AblationReport::find(const std::string& name) const {
  for (const auto& v : variants) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

RunEval evaluate_semicircle_model(const SurrogateModel& model,
                                  const SemicircleOptions& gen,
                                  const std::vector<double>& eval_times,
                                  int samples, double nll_bandwidth,
                                  std::uint64_t eval_seed) {
  CLOT_VALIDATE(samples > 0, "evaluate: sample count must be positive");
  CLOT_VALIDATE(!eval_times.empty(), "evaluate: no eval times");
  Rng root(eval_seed);
  RunEval run;
  double nll = 0.0, cd = 0.0, w2 = 0.0;
  for (std::size_t ti = 0; ti < eval_times.size(); ++ti) {
    const double t = eval_times[ti];
    for (std::size_t ci = 0; ci < gen.conditions.size(); ++ci) {
      const int cond = gen.conditions[ci];
      const std::uint64_t cell_tag = 16 * static_cast<std::uint64_t>(ti) +
                                     static_cast<std::uint64_t>(ci);
      // Truth draws take a child keyed only by the cell, so every model is
      // scored against the same truth sets.
      Rng truth_rng = root.child(2 * cell_tag);
      Rng gen_rng = root.child(2 * cell_tag + 1);
      MatrixXd truth(2, samples);
      for (int i = 0; i < samples; ++i) {
        truth.col(i) = semicircle_point(cond, t, gen, truth_rng);
      }
      const MatrixXd generated =
          model.sample_many(t, Condition::discrete(cond), samples, gen_rng);
      EvalCell cell;
      cell.t = t;
      cell.condition_id = cond;
      cell.nll = eval_nll(generated, truth, nll_bandwidth);
      cell.cd = eval_cd(generated, cond);
      cell.w2 = eval_w2(generated, truth);
      nll += cell.nll;
      cd += cell.cd;
      w2 += cell.w2;
      run.cells.push_back(cell);
    }
  }
  const double count = static_cast<double>(run.cells.size());
  run.mean_nll = nll / count;
  run.mean_cd = cd / count;
  run.mean_w2 = w2 / count;
  return run;
}

namespace {

Aggregate aggregate_over_runs(const std::vector<RunEval>& runs,
                              double RunEval::* field) {
  Aggregate a;
  if (runs.empty()) return a;
  double sum = 0.0;
  for (const auto& r : runs) sum += r.*field;
  a.mean = sum / static_cast<double>(runs.size());
  if (runs.size() >= 2) {
    double sq = 0.0;
    for (const auto& r : runs) sq += (r.*field - a.mean) * (r.*field - a.mean);
    const double sd = std::sqrt(sq / static_cast<double>(runs.size() - 1));
    a.std_error = sd / std::sqrt(static_cast<double>(runs.size()));
  }
  return a;
}

}  // namespace

AblationReport run_ablation(
    const std::vector<std::pair<std::string, TrainingConfig>>& variants,
    const SemicircleOptions& gen, const AblationOptions& opts,
    std::ostream* log) {
  CLOT_VALIDATE(!variants.empty(), "run_ablation: no variants");
  CLOT_VALIDATE(opts.runs >= 1, "run_ablation: runs must be >= 1");

  AblationReport report;
  report.eval_times = opts.eval_times;
  report.runs = opts.runs;
  report.eval_samples = opts.eval_samples;
  report.variants.resize(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    report.variants[v].name = variants[v].first;
  }

  Rng root(opts.seed);
  for (int r = 0; r < opts.runs; ++r) {
    Rng data_rng = root.child(100 + static_cast<std::uint64_t>(r));
    auto data = std::make_shared<ObservationSet>(generate_semicircle(gen, data_rng));
    const std::uint64_t train_seed = opts.seed + static_cast<std::uint64_t>(r);
    const std::uint64_t eval_seed = opts.seed + 7000 + static_cast<std::uint64_t>(r);

    for (std::size_t v = 0; v < variants.size(); ++v) {
      VariantReport& vr = report.variants[v];
      TrainingConfig cfg = variants[v].second;
      cfg.seed = train_seed;
      if (log != nullptr) {
        (*log) << "run " << r << " variant " << vr.name << " training...\n";
        log->flush();
      }
      try {
        const auto model = train_model(data, cfg, nullptr, nullptr);
        RunEval run = evaluate_semicircle_model(*model, gen, opts.eval_times,
                                                opts.eval_samples,
                                                opts.nll_bandwidth, eval_seed);
        run.train_seed = train_seed;
        vr.runs.push_back(std::move(run));
        if (log != nullptr) {
          const RunEval& re = vr.runs.back();
          (*log) << "run " << r << " variant " << vr.name << " nll "
                 << re.mean_nll << " cd " << re.mean_cd << " w2 " << re.mean_w2
                 << "\n";
          log->flush();
        }
      } catch (const std::exception& e) {
        vr.failed = true;
        if (vr.error.empty()) vr.error = e.what();
        if (log != nullptr) {
          (*log) << "run " << r << " variant " << vr.name << " FAILED: "
                 << e.what() << "\n";
        }
      }
    }
  }

  for (auto& vr : report.variants) {
    vr.nll = aggregate_over_runs(vr.runs, &RunEval::mean_nll);
    vr.cd = aggregate_over_runs(vr.runs, &RunEval::mean_cd);
    vr.w2 = aggregate_over_runs(vr.runs, &RunEval::mean_w2);
  }
  return report;
}

namespace {

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json aggregate_json(const Aggregate& a) {
  return json{{"mean", number_or_null(a.mean)},
              {"std_error", number_or_null(a.std_error)}};
}

}  // namespace

std::string ablation_report_to_json(const AblationReport& report) {
  json variants = json::array();
  for (const auto& vr : report.variants) {
    json runs = json::array();
    for (const auto& run : vr.runs) {
      json cells = json::array();
      for (const auto& c : run.cells) {
        cells.push_back({{"t", c.t},
                         {"condition", c.condition_id},
                         {"nll", number_or_null(c.nll)},
                         {"cd", c.cd},
                         {"w2", c.w2}});
      }
      runs.push_back({{"train_seed", run.train_seed},
                      {"mean_nll", number_or_null(run.mean_nll)},
                      {"mean_cd", run.mean_cd},
                      {"mean_w2", run.mean_w2},
                      {"cells", cells}});
    }
    variants.push_back({{"name", vr.name},
                        {"failed", vr.failed},
                        {"error", vr.error},
                        {"nll", aggregate_json(vr.nll)},
                        {"cd", aggregate_json(vr.cd)},
                        {"w2", aggregate_json(vr.w2)},
                        {"runs", runs}});
  }
  return json{{"eval_times", report.eval_times},
              {"runs", report.runs},
              {"eval_samples", report.eval_samples},
              {"variants", variants}}
      .dump(2);
}

std::string ablation_report_table(const AblationReport& report) {
  std::ostringstream os;
  os << "variant\trun\tt\tcondition\tnll\tcd\tw2\n";
  for (const auto& vr : report.variants) {
    for (std::size_t r = 0; r < vr.runs.size(); ++r) {
      for (const auto& c : vr.runs[r].cells) {
        os << vr.name << "\t" << r << "\t" << c.t << "\t" << c.condition_id
           << "\t" << c.nll << "\t" << c.cd << "\t" << c.w2 << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace clot
