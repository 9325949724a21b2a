#include "lfagcl/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <sstream>

#include "lfagcl/errors.hpp"
#include "lfagcl/io_util.hpp"

namespace lfagcl {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw ConfigError("bad numeric value '" + s + "'");
  return v;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& s) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty())
    throw ConfigError("bad integer value '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("bad boolean value '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(static_cast<int>(parse_int(tok)));
  }
  if (out.empty()) throw ConfigError("empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_double(tok));
  }
  if (out.empty()) throw ConfigError("empty numeric list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"input", [](const RunConfig& c) { return c.input; },
       [](RunConfig& c, const std::string& v) { c.input = v; }},
      {"bundle", [](const RunConfig& c) { return c.bundle; },
       [](RunConfig& c, const std::string& v) { c.bundle = v; }},
      {"lfa_checkpoint", [](const RunConfig& c) { return c.lfa_checkpoint; },
       [](RunConfig& c, const std::string& v) { c.lfa_checkpoint = v; }},
      {"checkpoint", [](const RunConfig& c) { return c.checkpoint; },
       [](RunConfig& c, const std::string& v) { c.checkpoint = v; }},
      {"baseline_checkpoint",
       [](const RunConfig& c) { return c.baseline_checkpoint; },
       [](RunConfig& c, const std::string& v) { c.baseline_checkpoint = v; }},
      {"log", [](const RunConfig& c) { return c.log; },
       [](RunConfig& c, const std::string& v) { c.log = v; }},
      {"report", [](const RunConfig& c) { return c.report; },
       [](RunConfig& c, const std::string& v) { c.report = v; }},
      {"table", [](const RunConfig& c) { return c.table; },
       [](RunConfig& c, const std::string& v) { c.table = v; }},
      {"stats", [](const RunConfig& c) { return c.stats; },
       [](RunConfig& c, const std::string& v) { c.stats = v; }},
      {"delimiter", [](const RunConfig& c) { return c.delimiter; },
       [](RunConfig& c, const std::string& v) { c.delimiter = v; }},
      {"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(parse_int(v));
       }},
      {"threads", [](const RunConfig& c) { return std::to_string(c.threads); },
       [](RunConfig& c, const std::string& v) { c.threads = static_cast<int>(parse_int(v)); }},
      {"verbose", [](const RunConfig& c) { return std::string(c.verbose ? "1" : "0"); },
       [](RunConfig& c, const std::string& v) { c.verbose = parse_bool(v); }},
      {"split", [](const RunConfig& c) { return c.split; },
       [](RunConfig& c, const std::string& v) { c.split = v; }},
      {"lfa_f", [](const RunConfig& c) { return std::to_string(c.lfa_f); },
       [](RunConfig& c, const std::string& v) { c.lfa_f = static_cast<int>(parse_int(v)); }},
      {"lfa_lambda", [](const RunConfig& c) { return format_double(c.lfa_lambda); },
       [](RunConfig& c, const std::string& v) { c.lfa_lambda = parse_double(v); }},
      {"lfa_max_iters", [](const RunConfig& c) { return std::to_string(c.lfa_max_iters); },
       [](RunConfig& c, const std::string& v) { c.lfa_max_iters = static_cast<int>(parse_int(v)); }},
      {"lfa_rel_tol", [](const RunConfig& c) { return format_double(c.lfa_rel_tol); },
       [](RunConfig& c, const std::string& v) { c.lfa_rel_tol = parse_double(v); }},
      {"lfa_init_scale", [](const RunConfig& c) { return format_double(c.lfa_init_scale); },
       [](RunConfig& c, const std::string& v) { c.lfa_init_scale = parse_double(v); }},
      {"lfa_seed", [](const RunConfig& c) { return std::to_string(c.lfa_seed); },
       [](RunConfig& c, const std::string& v) {
         c.lfa_seed = static_cast<std::uint64_t>(parse_int(v));
       }},
      {"lfa_solver", [](const RunConfig& c) { return c.lfa_solver; },
       [](RunConfig& c, const std::string& v) { c.lfa_solver = v; }},
      {"sgd_learning_rate",
       [](const RunConfig& c) { return format_double(c.sgd_learning_rate); },
       [](RunConfig& c, const std::string& v) { c.sgd_learning_rate = parse_double(v); }},
      {"learning_rate", [](const RunConfig& c) { return format_double(c.learning_rate); },
       [](RunConfig& c, const std::string& v) { c.learning_rate = parse_double(v); }},
      {"batch_size", [](const RunConfig& c) { return std::to_string(c.batch_size); },
       [](RunConfig& c, const std::string& v) { c.batch_size = static_cast<int>(parse_int(v)); }},
      {"epochs_max", [](const RunConfig& c) { return std::to_string(c.epochs_max); },
       [](RunConfig& c, const std::string& v) { c.epochs_max = static_cast<int>(parse_int(v)); }},
      {"lambda1", [](const RunConfig& c) { return format_double(c.lambda1); },
       [](RunConfig& c, const std::string& v) { c.lambda1 = parse_double(v); }},
      {"lambda2", [](const RunConfig& c) { return format_double(c.lambda2); },
       [](RunConfig& c, const std::string& v) { c.lambda2 = parse_double(v); }},
      {"tau", [](const RunConfig& c) { return format_double(c.tau); },
       [](RunConfig& c, const std::string& v) { c.tau = parse_double(v); }},
      {"dropout_rate", [](const RunConfig& c) { return format_double(c.dropout_rate); },
       [](RunConfig& c, const std::string& v) { c.dropout_rate = parse_double(v); }},
      {"layers", [](const RunConfig& c) { return std::to_string(c.layers); },
       [](RunConfig& c, const std::string& v) { c.layers = static_cast<int>(parse_int(v)); }},
      {"embed_dim", [](const RunConfig& c) { return std::to_string(c.embed_dim); },
       [](RunConfig& c, const std::string& v) { c.embed_dim = static_cast<int>(parse_int(v)); }},
      {"validate_every", [](const RunConfig& c) { return std::to_string(c.validate_every); },
       [](RunConfig& c, const std::string& v) { c.validate_every = static_cast<int>(parse_int(v)); }},
      {"patience", [](const RunConfig& c) { return std::to_string(c.patience); },
       [](RunConfig& c, const std::string& v) { c.patience = static_cast<int>(parse_int(v)); }},
      {"eval_k", [](const RunConfig& c) { return join_ints(c.eval_k); },
       [](RunConfig& c, const std::string& v) { c.eval_k = parse_int_list(v); }},
      {"cl_negatives", [](const RunConfig& c) { return c.cl_negatives; },
       [](RunConfig& c, const std::string& v) { c.cl_negatives = v; }},
      {"ndcg_mode", [](const RunConfig& c) { return c.ndcg_mode; },
       [](RunConfig& c, const std::string& v) { c.ndcg_mode = v; }},
      {"mask_validation_at_test",
       [](const RunConfig& c) { return std::string(c.mask_validation_at_test ? "1" : "0"); },
       [](RunConfig& c, const std::string& v) { c.mask_validation_at_test = parse_bool(v); }},
      {"n_groups", [](const RunConfig& c) { return std::to_string(c.n_groups); },
       [](RunConfig& c, const std::string& v) { c.n_groups = static_cast<int>(parse_int(v)); }},
      {"axis", [](const RunConfig& c) { return c.axis; },
       [](RunConfig& c, const std::string& v) { c.axis = v; }},
      {"lambda1_grid", [](const RunConfig& c) { return join_doubles(c.lambda1_grid); },
       [](RunConfig& c, const std::string& v) { c.lambda1_grid = parse_double_list(v); }},
      {"tau_grid", [](const RunConfig& c) { return join_doubles(c.tau_grid); },
       [](RunConfig& c, const std::string& v) { c.tau_grid = parse_double_list(v); }},
      {"dropout_grid", [](const RunConfig& c) { return join_doubles(c.dropout_grid); },
       [](RunConfig& c, const std::string& v) { c.dropout_grid = parse_double_list(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.key << " = " << f.get(*this) << "\n";
  return os.str();
}

std::string RunConfig::echo() const {
  std::istringstream in(serialize());
  std::ostringstream os;
  std::string line;
  while (std::getline(in, line)) os << "# cfg " << line << "\n";
  return os.str();
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        " is not 'key = value': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    set(key, value);
  }
}

void RunConfig::apply_file(const std::string& path) {
  apply_text(read_text_file(path));
}

void RunConfig::apply_echo(const std::string& echo_text) {
  std::istringstream in(echo_text);
  std::ostringstream plain;
  std::string line;
  const std::string prefix = "# cfg ";
  while (std::getline(in, line))
    if (line.rfind(prefix, 0) == 0) plain << line.substr(prefix.size()) << "\n";
  apply_text(plain.str());
}

LfaConfig RunConfig::lfa_config() const {
  LfaConfig cfg;
  cfg.f = lfa_f;
  cfg.lfa_lambda = lfa_lambda;
  cfg.max_iters = lfa_max_iters;
  cfg.rel_tol = lfa_rel_tol;
  cfg.init_scale = lfa_init_scale;
  cfg.seed = lfa_seed;
  if (lfa_solver == "als")
    cfg.solver = LfaConfig::Solver::als;
  else if (lfa_solver == "sgd")
    cfg.solver = LfaConfig::Solver::sgd;
  else
    throw ConfigError("lfa_solver must be 'als' or 'sgd', got '" + lfa_solver + "'");
  cfg.sgd_learning_rate = sgd_learning_rate;
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.batch_size = batch_size;
  cfg.epochs_max = epochs_max;
  cfg.lambda1 = lambda1;
  cfg.lambda2 = lambda2;
  cfg.tau = tau;
  cfg.dropout_rate = dropout_rate;
  cfg.layers = layers;
  cfg.embed_dim = embed_dim;
  cfg.lfa = lfa_config();
  cfg.seed = seed;
  cfg.validate_every = validate_every;
  cfg.patience = patience;
  cfg.eval_k = eval_k;
  if (cl_negatives == "batch")
    cfg.cl_negatives = ObjectiveConfig::ClNegatives::batch;
  else if (cl_negatives == "full")
    cfg.cl_negatives = ObjectiveConfig::ClNegatives::full;
  else
    throw ConfigError("cl_negatives must be 'batch' or 'full', got '" +
                      cl_negatives + "'");
  return cfg;
}

NdcgMode RunConfig::ndcg() const {
  if (ndcg_mode == "literal") return NdcgMode::literal;
  if (ndcg_mode == "truncated") return NdcgMode::truncated;
  throw ConfigError("ndcg_mode must be 'literal' or 'truncated', got '" +
                    ndcg_mode + "'");
}

}  // namespace lfagcl
