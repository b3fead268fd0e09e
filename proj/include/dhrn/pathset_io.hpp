#pragma once
// On-disk PathSet format.
//
// A path set directory contains
//   meta.json   - {"format": "dhrn-pathset", "version": 1, "world", "n_paths",
//                  "n_steps", "step_dt", "seed", "n_instruments",
//                  "instruments": [[{id, kind, relative_strike?, maturity_steps?}, ...] per step],
//                  "aux_names": [...], "config_digest"?}
//   spot.f64    - n_paths x (n_steps+1) doubles, path-major
//   mids.f64    - n_paths x n_steps x n_instruments doubles
//   marks.f64   - n_paths x n_steps x n_instruments doubles (terminal marks H_T)
//   aux.f64     - n_paths x (n_steps+1) x n_aux doubles (may be empty)
// All binary arrays are raw little-endian IEEE-754 binary64 without header.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dhrn/market.hpp"

namespace dhrn {

void write_f64(const std::filesystem::path& file, std::span<const double> values);
std::vector<double> read_f64(const std::filesystem::path& file);

void save_pathset(const PathSet& paths, const std::filesystem::path& dir, const std::string& config_digest = {});
PathSet load_pathset(const std::filesystem::path& dir);

/// One row per path: path, s_0..s_m. Intended for small sets.
void export_spot_csv(const PathSet& paths, const std::filesystem::path& file);
/// Long format: path, step, instrument, mid, mark.
void export_instruments_csv(const PathSet& paths, const std::filesystem::path& file);

}  // namespace dhrn
