#pragma once

#include <cstdint>
#include <string>

#include "clot/observation_set.hpp"

namespace clot {

/// JSON-lines dataset format.  The first line is a schema header:
///   {"format":"clot.dataset","version":1,"dim":2,"condition_mode":"discrete",
///    "time_field":"t","count":N}
/// followed by one record per line:
///   {"y":[...],"x":<id or [...]>,"t":0.5,"key":7}
/// `key` is optional and links matched records across anchors.  Datasets whose
/// progression variable is not already normalized use "time_field":"lambda"
/// plus "lambda_min"/"lambda_max" in the header (derived from the records when
/// absent); loading maps lambda affinely onto [0, 1].
ObservationSet read_dataset(const std::string& path);

void write_dataset(const std::string& path, const ObservationSet& data);

/// One generated sample plus everything needed to reproduce it.
struct SampleRecord {
  VectorXd y;
  Condition x;
  double t = 0.0;       // normalized time
  double lambda = 0.0;  // raw progression value
  std::uint64_t seed = 0;
  int draw = 0;
};

/// JSON-lines sample dump with header
///   {"format":"clot.samples","version":1,"dim":...,"condition_mode":...,
///    "count":N}
/// and records {"y":[...],"x":...,"t":...,"lambda":...,"seed":...,"draw":...}.
void write_samples(const std::string& path, const std::vector<SampleRecord>& records,
                   bool discrete_conditions);

std::vector<SampleRecord> read_samples(const std::string& path);

}  // namespace clot
