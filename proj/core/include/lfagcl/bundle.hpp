#pragma once

#include <string>

#include "lfagcl/interactions.hpp"

namespace lfagcl {

// Prepared dataset on disk. Little-endian layout:
//   magic "LFGB", version u32, flags u32 (bit0 = ratings present),
//   n_users u64, n_items u64, split_seed u64,
//   n_train u64, n_validation u64, n_test u64,
//   per split: index-sorted (user u32, item u32) pairs,
//   if ratings present: per split, f64 ratings in the same order,
//   trailer "CFG0" + length-prefixed effective-config echo.
void write_bundle(const std::string& path, const DatasetSplit& split,
                  const std::string& config_echo);

struct LoadedBundle {
  DatasetSplit split;
  std::string config_echo;
};

LoadedBundle read_bundle(const std::string& path);

// Human-readable counts/density summary for a prepared dataset.
std::string stats_summary(const DatasetSplit& split);

}  // namespace lfagcl
