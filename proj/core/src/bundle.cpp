#include "lfagcl/bundle.hpp"

#include <fstream>
#include <sstream>

#include "lfagcl/errors.hpp"
#include "lfagcl/io_util.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl {

namespace {
constexpr std::uint32_t kBundleVersion = 1;
constexpr std::uint32_t kFlagHasRatings = 1u << 0;
}  // namespace

void write_bundle(const std::string& path, const DatasetSplit& split,
                  const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  BinaryWriter w(out);
  w.tag("LFGB");
  w.u32(kBundleVersion);
  w.u32(split.has_ratings ? kFlagHasRatings : 0);
  w.u64(split.n_users);
  w.u64(split.n_items);
  w.u64(split.split_seed);
  w.u64(split.train.size());
  w.u64(split.validation.size());
  w.u64(split.test.size());
  const auto write_edges = [&](const std::vector<Interaction>& edges) {
    for (const Interaction& e : edges) {
      w.u32(e.user);
      w.u32(e.item);
    }
  };
  write_edges(split.train);
  write_edges(split.validation);
  write_edges(split.test);
  if (split.has_ratings) {
    const auto write_ratings = [&](const std::vector<Interaction>& edges) {
      for (const Interaction& e : edges) w.f64(e.rating);
    };
    write_ratings(split.train);
    write_ratings(split.validation);
    write_ratings(split.test);
  }
  w.tag("CFG0");
  w.str(config_echo);
}

LoadedBundle read_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bundle '" + path + "'");
  BinaryReader r(in, path);
  r.expect_tag("LFGB");
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion)
    throw IoError("unsupported bundle version " + std::to_string(version));
  const std::uint32_t flags = r.u32();

  LoadedBundle b;
  DatasetSplit& split = b.split;
  split.has_ratings = (flags & kFlagHasRatings) != 0;
  split.n_users = static_cast<index_t>(r.u64());
  split.n_items = static_cast<index_t>(r.u64());
  split.split_seed = r.u64();
  const std::uint64_t n_train = r.u64();
  const std::uint64_t n_val = r.u64();
  const std::uint64_t n_test = r.u64();

  const auto read_edges = [&](std::vector<Interaction>& edges, std::uint64_t n,
                              const char* name) {
    r.section(name);
    edges.resize(n);
    for (auto& e : edges) {
      e.user = r.u32();
      e.item = r.u32();
      if (e.user >= split.n_users || e.item >= split.n_items)
        throw IoError("edge index out of range in bundle section '" +
                      std::string(name) + "'");
    }
  };
  read_edges(split.train, n_train, "train edges");
  read_edges(split.validation, n_val, "validation edges");
  read_edges(split.test, n_test, "test edges");
  if (split.has_ratings) {
    const auto read_ratings = [&](std::vector<Interaction>& edges, const char* name) {
      r.section(name);
      for (auto& e : edges) e.rating = r.f64();
    };
    read_ratings(split.train, "train ratings");
    read_ratings(split.validation, "validation ratings");
    read_ratings(split.test, "test ratings");
  }
  r.section("config echo");
  r.expect_tag("CFG0");
  b.config_echo = r.str();
  return b;
}

std::string stats_summary(const DatasetSplit& split) {
  const std::uint64_t n = split.n_total();
  const double density =
      static_cast<double>(n) / (static_cast<double>(split.n_users) *
                                static_cast<double>(split.n_items));
  std::vector<bool> user_in_train(split.n_users, false);
  std::vector<bool> item_in_train(split.n_items, false);
  for (const Interaction& e : split.train) {
    user_in_train[e.user] = true;
    item_in_train[e.item] = true;
  }
  std::uint64_t cold_users = 0, cold_items = 0;
  for (bool seen : user_in_train) cold_users += seen ? 0 : 1;
  for (bool seen : item_in_train) cold_items += seen ? 0 : 1;

  std::ostringstream os;
  os << "users " << split.n_users << "\n"
     << "items " << split.n_items << "\n"
     << "interactions " << n << "\n"
     << "density " << fmt_num(density) << "\n"
     << "train " << split.train.size() << "\n"
     << "validation " << split.validation.size() << "\n"
     << "test " << split.test.size() << "\n"
     << "split_seed " << split.split_seed << "\n"
     << "users_without_train_edges " << cold_users << "\n"
     << "items_without_train_edges " << cold_items << "\n";
  return os.str();
}

}  // namespace lfagcl
