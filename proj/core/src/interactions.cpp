#include "lfagcl/interactions.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "lfagcl/errors.hpp"
#include "lfagcl/rng.hpp"

namespace lfagcl {

char resolve_delimiter(const std::string& spec) {
  if (spec == "tab" || spec == "\\t" || spec == "\t") return '\t';
  if (spec == "comma") return ',';
  if (spec == "space") return ' ';
  if (spec.size() == 1) return spec[0];
  throw ConfigError("unrecognized delimiter spec '" + spec + "'");
}

namespace {

void split_fields(const std::string& line, char delim,
                  std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool parse_rating(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

}  // namespace

RawInteractions load_interactions(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open interactions file '" + path + "'");

  RawInteractions raw;
  // (user, item) pairs already seen; keyed on internal indices.
  std::set<std::pair<index_t, index_t>> seen;
  std::string line;
  std::vector<std::string> fields;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++raw.stats.lines_read;
    split_fields(line, delimiter, fields);
    if (fields.size() < 2 || fields[0].empty() || fields[1].empty()) {
      ++raw.stats.malformed_skipped;
      continue;
    }
    const auto intern = [](std::unordered_map<std::string, index_t>& index,
                           std::vector<std::string>& ids,
                           const std::string& key) {
      const auto [it, inserted] =
          index.emplace(key, static_cast<index_t>(ids.size()));
      if (inserted) ids.push_back(key);
      return it->second;
    };
    const index_t u = intern(raw.user_index, raw.user_ids, fields[0]);
    const index_t i = intern(raw.item_index, raw.item_ids, fields[1]);
    double rating = 1.0;
    if (fields.size() >= 3 && parse_rating(fields[2], rating))
      raw.stats.has_ratings = true;
    else
      rating = 1.0;
    if (!seen.emplace(u, i).second) {
      ++raw.stats.duplicates_dropped;
      continue;
    }
    raw.records.push_back({u, i, rating});
  }
  if (in.bad()) throw IoError("read error on '" + path + "'");
  if (raw.records.empty())
    throw FormatError("no valid interactions in '" + path + "'");
  return raw;
}

DatasetSplit split_dataset(const RawInteractions& raw, std::uint64_t seed) {
  const std::size_t n = raw.records.size();
  if (n < 10)
    throw FormatError("refusing to split " + std::to_string(n) +
                      " interactions; need at least 10");

  std::vector<std::uint32_t> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = static_cast<std::uint32_t>(k);
  Rng rng(seed);
  rng.shuffle(order);

  // floor(0.7 n) and floor(0.8 n), exactly.
  const std::size_t cut_train = 7 * n / 10;
  const std::size_t cut_val = 8 * n / 10;

  DatasetSplit split;
  split.split_seed = seed;
  split.n_users = raw.n_users();
  split.n_items = raw.n_items();
  split.has_ratings = raw.stats.has_ratings;
  split.train.reserve(cut_train);
  split.validation.reserve(cut_val - cut_train);
  split.test.reserve(n - cut_val);
  for (std::size_t k = 0; k < n; ++k) {
    const Interaction& e = raw.records[order[k]];
    if (k < cut_train)
      split.train.push_back(e);
    else if (k < cut_val)
      split.validation.push_back(e);
    else
      split.test.push_back(e);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace lfagcl
