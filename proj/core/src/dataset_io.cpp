#include "clot/dataset_io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

namespace clot {

using nlohmann::json;

namespace {

json condition_to_json(const Condition& x) {
  if (x.is_discrete()) return x.id();
  json arr = json::array();
  for (Index i = 0; i < x.vec().size(); ++i) arr.push_back(x.vec()(i));
  return arr;
}

Condition condition_from_json(const json& j, bool discrete) {
  if (discrete) {
    CLOT_VALIDATE(j.is_number_integer(), "dataset: discrete condition must be an integer");
    return Condition::discrete(j.get<int>());
  }
  CLOT_VALIDATE(j.is_array() && !j.empty(), "dataset: continuous condition must be an array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    CLOT_VALIDATE(j[i].is_number(), "dataset: condition entries must be numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return Condition::continuous(std::move(v));
}

VectorXd vector_from_json(const json& j, const char* what) {
  CLOT_VALIDATE(j.is_array() && !j.empty(), std::string("dataset: ") + what +
                                                " must be a non-empty array");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    CLOT_VALIDATE(j[i].is_number(), std::string("dataset: ") + what +
                                        " entries must be numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  CLOT_VALIDATE(v.allFinite(), std::string("dataset: non-finite ") + what);
  return v;
}

json parse_line(const std::string& line, int lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw validation_error("dataset: malformed JSON on line " + std::to_string(lineno));
  }
  return j;
}

}  // namespace

ObservationSet read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open dataset: " + path);
  std::string line;
  int lineno = 0;

  CLOT_VALIDATE(static_cast<bool>(std::getline(in, line)), "dataset: empty file");
  ++lineno;
  const json header = parse_line(line, lineno);
  CLOT_VALIDATE(header.value("format", "") == "clot.dataset",
                "dataset: missing or wrong format tag");
  CLOT_VALIDATE(header.value("version", 0) == 1, "dataset: unsupported version");
  const int dim = header.value("dim", 0);
  CLOT_VALIDATE(dim > 0, "dataset: header missing positive dim");
  const std::string mode = header.value("condition_mode", "");
  CLOT_VALIDATE(mode == "discrete" || mode == "continuous",
                "dataset: condition_mode must be discrete or continuous");
  const std::string time_field = header.value("time_field", "t");
  CLOT_VALIDATE(time_field == "t" || time_field == "lambda",
                "dataset: time_field must be t or lambda");
  const bool discrete = mode == "discrete";
  const bool raw_time = time_field == "lambda";

  struct Raw {
    VectorXd y;
    Condition x;
    double time;
    int key;
  };
  std::vector<Raw> rows;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, lineno);
    CLOT_VALIDATE(j.contains("y") && j.contains("x") && j.contains(time_field),
                  "dataset: record missing y/x/time on line " + std::to_string(lineno));
    Raw r;
    r.y = vector_from_json(j.at("y"), "y");
    CLOT_VALIDATE(r.y.size() == dim,
                  "dataset: record dim mismatch on line " + std::to_string(lineno));
    r.x = condition_from_json(j.at("x"), discrete);
    CLOT_VALIDATE(j.at(time_field).is_number(), "dataset: time must be a number");
    r.time = j.at(time_field).get<double>();
    CLOT_VALIDATE(std::isfinite(r.time), "dataset: non-finite time");
    r.key = j.value("key", -1);
    lo = std::min(lo, r.time);
    hi = std::max(hi, r.time);
    rows.push_back(std::move(r));
  }
  CLOT_VALIDATE(!rows.empty(), "dataset: no records");

  TimeMap tm;
  if (raw_time) {
    tm.identity = false;
    tm.lambda_min = header.value("lambda_min", lo);
    tm.lambda_max = header.value("lambda_max", hi);
    CLOT_VALIDATE(tm.lambda_max > tm.lambda_min,
                  "dataset: lambda_max must exceed lambda_min");
  }
  ObservationSet data;
  for (auto& r : rows) {
    const double t = tm.to_unit(r.time);
    CLOT_VALIDATE(t >= -1e-9 && t <= 1.0 + 1e-9,
                  "dataset: time outside [0, 1] after normalization");
    data.add(std::move(r.y), std::move(r.x), std::min(1.0, std::max(0.0, t)), r.key);
  }
  data.finalize();
  data.set_time_map(tm);

  if (header.contains("count")) {
    CLOT_VALIDATE(header.at("count").get<Index>() == data.size(),
                  "dataset: header count does not match records");
  }
  return data;
}

void write_dataset(const std::string& path, const ObservationSet& data) {
  CLOT_REQUIRE(data.finalized(), "write_dataset: observation set not finalized");
  std::ofstream out(path, std::ios::binary);  // binary: byte-stable newlines
  if (!out) throw validation_error("cannot open for writing: " + path);

  const TimeMap& tm = data.time_map();
  json header{{"format", "clot.dataset"},
              {"version", 1},
              {"dim", data.dim()},
              {"condition_mode", data.discrete_conditions() ? "discrete" : "continuous"},
              {"time_field", tm.identity ? "t" : "lambda"},
              {"count", data.size()}};
  if (!tm.identity) {
    header["lambda_min"] = tm.lambda_min;
    header["lambda_max"] = tm.lambda_max;
  }
  out << header.dump() << "\n";

  for (Index i = 0; i < data.size(); ++i) {
    const Observation& r = data.record(i);
    json j{{"y", json::array()}, {"x", condition_to_json(r.x)}};
    for (Index d = 0; d < r.y.size(); ++d) j["y"].push_back(r.y(d));
    if (tm.identity) {
      j["t"] = r.t;
    } else {
      j["lambda"] = tm.to_raw(r.t);
    }
    if (r.pair_key >= 0) j["key"] = r.pair_key;
    out << j.dump() << "\n";
  }
  if (!out) throw validation_error("write failed: " + path);
}

void write_samples(const std::string& path, const std::vector<SampleRecord>& records,
                   bool discrete_conditions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot open for writing: " + path);
  json header{{"format", "clot.samples"},
              {"version", 1},
              {"dim", records.empty() ? 0 : records.front().y.size()},
              {"condition_mode", discrete_conditions ? "discrete" : "continuous"},
              {"count", records.size()}};
  out << header.dump() << "\n";
  for (const auto& r : records) {
    json j{{"y", json::array()},
           {"x", condition_to_json(r.x)},
           {"t", r.t},
           {"lambda", r.lambda},
           {"seed", r.seed},
           {"draw", r.draw}};
    for (Index d = 0; d < r.y.size(); ++d) j["y"].push_back(r.y(d));
    out << j.dump() << "\n";
  }
  if (!out) throw validation_error("write failed: " + path);
}

std::vector<SampleRecord> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open samples file: " + path);
  std::string line;
  int lineno = 0;
  CLOT_VALIDATE(static_cast<bool>(std::getline(in, line)), "samples: empty file");
  ++lineno;
  const json header = parse_line(line, lineno);
  CLOT_VALIDATE(header.value("format", "") == "clot.samples",
                "samples: missing or wrong format tag");
  const bool discrete = header.value("condition_mode", "discrete") == "discrete";
  std::vector<SampleRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json j = parse_line(line, lineno);
    SampleRecord r;
    r.y = vector_from_json(j.at("y"), "y");
    r.x = condition_from_json(j.at("x"), discrete);
    r.t = j.value("t", 0.0);
    r.lambda = j.value("lambda", r.t);
    r.seed = j.value("seed", std::uint64_t{0});
    r.draw = j.value("draw", 0);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace clot
