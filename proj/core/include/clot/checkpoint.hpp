#pragma once

#include <memory>
#include <string>

#include "clot/training.hpp"

namespace clot {

/// Serialized model container: an 8-byte magic tag, a little-endian uint32
/// header length, a JSON header (config, time map, data shape, parameter
/// directory), and a float64 little-endian payload holding every network
/// parameter followed by the anchor observations.  Anchors travel with the
/// model because inference draws start points from them and the density
/// potential is frozen on them; a reload therefore reproduces the saved
/// model's samples bit for bit.
inline constexpr char kModelMagic[8] = {'C', 'L', 'O', 'T', 'M', 'D', 'L', '1'};

void save_model(const SurrogateModel& model, const TrainingConfig& cfg,
                const std::string& path);

/// Rebuilds the observation set and bundle described by `path`.  The stored
/// config is written to *cfg_out when non-null.
std::unique_ptr<SurrogateModel> load_model(const std::string& path,
                                           TrainingConfig* cfg_out = nullptr);

}  // namespace clot
