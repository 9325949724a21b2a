#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfagcl/types.hpp"

namespace lfagcl {

// One observed user-item interaction with contiguous internal indices.
// rating is carried through for the factorization stage; implicit-feedback
// inputs leave it at 1.
struct Interaction {
  index_t user = 0;
  index_t item = 0;
  double rating = 1.0;

  friend bool operator==(const Interaction& a, const Interaction& b) {
    return a.user == b.user && a.item == b.item;
  }
  friend bool operator<(const Interaction& a, const Interaction& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  }
};

struct LoadStats {
  std::uint64_t lines_read = 0;
  std::uint64_t malformed_skipped = 0;
  std::uint64_t duplicates_dropped = 0;
  bool has_ratings = false;
};

// Deduplicated interactions with dense ids assigned in first-seen order.
struct RawInteractions {
  std::vector<Interaction> records;
  std::vector<std::string> user_ids;  // internal index -> external id
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, index_t> user_index;
  std::unordered_map<std::string, index_t> item_index;
  LoadStats stats;

  index_t n_users() const { return static_cast<index_t>(user_ids.size()); }
  index_t n_items() const { return static_cast<index_t>(item_ids.size()); }
};

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  std::uint64_t split_seed = 0;
  index_t n_users = 0;
  index_t n_items = 0;
  bool has_ratings = false;

  std::uint64_t n_total() const {
    return train.size() + validation.size() + test.size();
  }
};

// Parses "user<delim>item[<delim>rating[<delim>...]]" lines. Extra fields
// beyond the rating are ignored; lines with fewer than two fields are
// counted as malformed and skipped. Throws IoError if the file cannot be
// opened and FormatError if no valid interaction survives.
RawInteractions load_interactions(const std::string& path, char delimiter = '\t');

// Resolves a delimiter spec ("tab", "comma", "space", ";" or a single char).
char resolve_delimiter(const std::string& spec);

// Global uniform shuffle under `seed`, cut at floor(0.7 n) and floor(0.8 n).
// Each split is returned index-sorted. Refuses inputs with fewer than 10
// interactions.
DatasetSplit split_dataset(const RawInteractions& raw, std::uint64_t seed);

}  // namespace lfagcl
