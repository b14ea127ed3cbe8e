#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oninfer/model_io.hpp"

namespace oninfer {

enum class ZooModelId {
  VaeEncoder,
  CnetPlusScalar,
  MultiEsperta,
  LogisticNet,
  ReducedNet,
  BaselineNet,
};

enum class WeightInit { Zeros, SeededUniform };

std::vector<ZooModelId> all_zoo_ids();
const char* zoo_id_name(ZooModelId id);           // e.g. "vae_encoder"
bool zoo_id_from_string(const std::string& s, ZooModelId& out);

// The seed baked into the shipped weight files for each model.
uint64_t zoo_default_seed(ZooModelId id);

// Builds the six-network zoo. Metadata carries the published reference totals the
// model is reconstructed against; weights are zeros or seeded-uniform U[-0.1,0.1).
ModelFile build_zoo_model(ZooModelId id, WeightInit init = WeightInit::SeededUniform,
                          uint64_t seed = 0);

}  // namespace oninfer
