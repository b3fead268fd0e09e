#pragma once
// Policy checkpoint file:
//
//   line 1   "dhrn-checkpoint 1"
//   line 2   JSON descriptor: architecture, hidden sizes, feature spec, input/output
//            sizes, steps, feature mean/scale, persistent flags, projection,
//            n_params, rng_state, config_digest
//   rest     n_params little-endian binary64 parameters

#include <filesystem>
#include <string>

#include "dhrn/policy_net.hpp"

namespace dhrn {

struct Checkpoint {
    PolicyNet net;
    std::string rng_state;
    std::string config_digest;
};

void save_checkpoint(const std::filesystem::path& file, const PolicyNet& net, const std::string& rng_state = {},
                     const std::string& config_digest = {});
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace dhrn
