#include "clot/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace clot {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts need swaps");

namespace {

// Parameter blocks appear in the payload in this fixed order.
std::vector<std::pair<std::string, const ParamVector*>> param_directory(
    const TransportBundle& b) {
  std::vector<std::pair<std::string, const ParamVector*>> out;
  for (int k = 0; k < b.interval_count(); ++k) {
    out.emplace_back("g." + std::to_string(k), &b.g(k).params());
  }
  for (int k = 0; k < b.interval_count(); ++k) {
    out.emplace_back("map." + std::to_string(k), &b.map(k).params());
  }
  out.emplace_back("spline", &b.spline_gen().params());
  if (b.metric() != nullptr) {
    out.emplace_back("metric", &b.metric()->net().params());
  }
  return out;
}

std::vector<std::pair<std::string, ParamVector*>> param_directory(
    TransportBundle& b) {
  std::vector<std::pair<std::string, ParamVector*>> out;
  for (const auto& [name, pv] : param_directory(static_cast<const TransportBundle&>(b))) {
    out.emplace_back(name, const_cast<ParamVector*>(pv));
  }
  return out;
}

void write_doubles(std::ostream& os, const double* data, std::size_t count) {
  os.write(reinterpret_cast<const char*>(data),
           static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(double)));
  CLOT_VALIDATE(static_cast<std::size_t>(is.gcount()) == count * sizeof(double),
                "model file truncated");
}

}  // namespace

void save_model(const SurrogateModel& model, const TrainingConfig& cfg,
                const std::string& path) {
  const TransportBundle& bundle = model.bundle();
  const ObservationSet& data = model.anchors();
  const auto dir = param_directory(bundle);

  const int dim = data.dim();
  const int cond_width = data.discrete_conditions() ? 1 : data.condition_dim();
  const std::size_t record_doubles =
      static_cast<std::size_t>(dim + cond_width + 2);  // y, x, t, pair_key

  json params = json::array();
  std::size_t payload = 0;
  for (const auto& [name, pv] : dir) {
    params.push_back({{"name", name}, {"count", pv->values().size()}});
    payload += static_cast<std::size_t>(pv->values().size());
  }
  payload += static_cast<std::size_t>(data.size()) * record_doubles;

  json header{
      {"format", 1},
      {"library", kVersion},
      {"config", json::parse(training_config_to_json(cfg))},
      {"time_map",
       {{"identity", data.time_map().identity},
        {"lambda_min", data.time_map().lambda_min},
        {"lambda_max", data.time_map().lambda_max}}},
      {"data",
       {{"count", data.size()},
        {"dim", dim},
        {"conditions", data.discrete_conditions() ? "discrete" : "continuous"},
        {"condition_width", cond_width}}},
      {"params", params},
      {"payload_doubles", payload},
  };
  const std::string header_text = header.dump();
  CLOT_VALIDATE(header_text.size() < (1u << 30), "model header too large");

  std::ofstream os(path, std::ios::binary);
  CLOT_VALIDATE(os.good(), "cannot open model file for writing: " + path);
  os.write(kModelMagic, sizeof(kModelMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  for (const auto& [name, pv] : dir) {
    write_doubles(os, pv->values().data(),
                  static_cast<std::size_t>(pv->values().size()));
  }
  std::vector<double> rec(record_doubles);
  for (Index i = 0; i < data.size(); ++i) {
    const Observation& ob = data.record(i);
    double* at = rec.data();
    std::memcpy(at, ob.y.data(), sizeof(double) * static_cast<std::size_t>(dim));
    at += dim;
    if (data.discrete_conditions()) {
      *at++ = static_cast<double>(ob.x.id());
    } else {
      std::memcpy(at, ob.x.vec().data(),
                  sizeof(double) * static_cast<std::size_t>(cond_width));
      at += cond_width;
    }
    *at++ = ob.t;
    *at++ = static_cast<double>(ob.pair_key);
    write_doubles(os, rec.data(), record_doubles);
  }
  os.flush();
  CLOT_VALIDATE(os.good(), "write failure on model file: " + path);
}

std::unique_ptr<SurrogateModel> load_model(const std::string& path,
                                           TrainingConfig* cfg_out) {
  std::ifstream is(path, std::ios::binary);
  CLOT_VALIDATE(is.good(), "cannot open model file: " + path);

  char magic[sizeof(kModelMagic)];
  is.read(magic, sizeof(magic));
  CLOT_VALIDATE(is.gcount() == sizeof(magic) &&
                    std::memcmp(magic, kModelMagic, sizeof(magic)) == 0,
                "not a model file (bad magic): " + path);
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  CLOT_VALIDATE(is.gcount() == sizeof(len), "model file truncated");
  std::string header_text(len, '\0');
  is.read(header_text.data(), static_cast<std::streamsize>(len));
  CLOT_VALIDATE(static_cast<std::uint32_t>(is.gcount()) == len,
                "model file truncated");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw validation_error(std::string("bad model header: ") + e.what());
  }
  CLOT_VALIDATE(header.value("format", 0) == 1,
                "unsupported model format version");

  const TrainingConfig cfg =
      training_config_from_json(header.at("config").dump());
  if (cfg_out != nullptr) *cfg_out = cfg;

  const json& dj = header.at("data");
  const Index count = dj.at("count").get<Index>();
  const int dim = dj.at("dim").get<int>();
  const bool discrete = dj.at("conditions").get<std::string>() == "discrete";
  const int cond_width = dj.at("condition_width").get<int>();
  CLOT_VALIDATE(count > 0 && dim > 0 && cond_width > 0,
                "bad model header: empty data block");

  TimeMap tm;
  tm.identity = header.at("time_map").at("identity").get<bool>();
  tm.lambda_min = header.at("time_map").at("lambda_min").get<double>();
  tm.lambda_max = header.at("time_map").at("lambda_max").get<double>();

  // Parameters come first in the payload; data records follow.
  std::vector<std::pair<std::string, std::vector<double>>> blocks;
  for (const json& pj : header.at("params")) {
    const auto n = pj.at("count").get<std::size_t>();
    blocks.emplace_back(pj.at("name").get<std::string>(), std::vector<double>(n));
    read_doubles(is, blocks.back().second.data(), n);
  }

  auto data = std::make_shared<ObservationSet>();
  const std::size_t record_doubles = static_cast<std::size_t>(dim + cond_width + 2);
  std::vector<double> rec(record_doubles);
  for (Index i = 0; i < count; ++i) {
    read_doubles(is, rec.data(), record_doubles);
    VectorXd y = Eigen::Map<const VectorXd>(rec.data(), dim);
    Condition x;
    if (discrete) {
      x = Condition::discrete(static_cast<int>(rec[static_cast<std::size_t>(dim)]));
    } else {
      x = Condition::continuous(
          Eigen::Map<const VectorXd>(rec.data() + dim, cond_width));
    }
    const double t = rec[record_doubles - 2];
    const int pair_key = static_cast<int>(rec[record_doubles - 1]);
    data->add(std::move(y), x, t, pair_key);
  }
  data->finalize();
  data->set_time_map(tm);

  auto bundle = make_bundle(*data, cfg);
  auto dir = param_directory(*bundle);
  CLOT_VALIDATE(dir.size() == blocks.size(),
                "model parameter blocks do not match the stored config");
  for (std::size_t i = 0; i < dir.size(); ++i) {
    CLOT_VALIDATE(dir[i].first == blocks[i].first,
                  "model parameter block order mismatch: " + blocks[i].first);
    ParamVector& pv = *dir[i].second;
    CLOT_VALIDATE(pv.values().size() ==
                      static_cast<Index>(blocks[i].second.size()),
                  "model parameter block size mismatch: " + blocks[i].first);
    pv.values() = Eigen::Map<const VectorXd>(
        blocks[i].second.data(), static_cast<Index>(blocks[i].second.size()));
  }
  return std::make_unique<SurrogateModel>(std::move(bundle), std::move(data));
}

}  // namespace clot
