#include "hgcl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace hgcl {

namespace {

std::string trim(const std::string& s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(s.begin(), s.end(), is_space);
  auto end = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return begin < end ? std::string(begin, end) : std::string();
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw std::invalid_argument("config key '" + key + "': expected " +
                              expected + ", got '" + value + "'");
}

[[noreturn]] void out_of_range(const std::string& key,
                               const std::string& constraint) {
  throw std::invalid_argument("config key '" + key + "' out of range: " +
                              constraint);
}

long long parse_integer(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "an integer");
  }
  return v;
}

Scalar parse_scalar(const std::string& key, const std::string& value) {
  Scalar v = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "a number");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::size_t end = comma == std::string::npos ? value.size() : comma;
    const std::string part = trim(value.substr(start, end - start));
    if (!part.empty()) parts.push_back(part);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key,
                       const std::string& value) {
  auto as_int = [&](long long lo, long long hi) {
    const long long v = parse_integer(key, value);
    if (v < lo || v > hi) {
      out_of_range(key, "must lie in [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
    }
    return v;
  };
  auto positive_scalar = [&] {
    const Scalar v = parse_scalar(key, value);
    if (v <= 0.0) out_of_range(key, "must be > 0");
    return v;
  };
  auto nonneg_scalar = [&] {
    const Scalar v = parse_scalar(key, value);
    if (v < 0.0) out_of_range(key, "must be >= 0");
    return v;
  };

  if (key == "d") cfg.d = static_cast<Index>(as_int(1, 1 << 20));
  else if (key == "k") cfg.k = static_cast<int>(as_int(1, 64));
  else if (key == "k_star") cfg.k_star = static_cast<int>(as_int(0, 64));
  else if (key == "lambda") cfg.lambda = nonneg_scalar();
  else if (key == "epsilon") cfg.epsilon = nonneg_scalar();
  else if (key == "tau") cfg.tau = positive_scalar();
  else if (key == "lr") cfg.lr = positive_scalar();
  else if (key == "batch_size") cfg.batch_size = static_cast<Index>(as_int(1, 1LL << 30));
  else if (key == "epochs") cfg.epochs = static_cast<int>(as_int(1, 1 << 20));
  else if (key == "finetune_epochs") cfg.finetune_epochs = static_cast<int>(as_int(1, 1 << 20));
  else if (key == "l2_coeff") cfg.l2_coeff = nonneg_scalar();
  else if (key == "patience") cfg.patience = static_cast<int>(as_int(0, 1 << 20));
  else if (key == "rho") cfg.rho = static_cast<Index>(as_int(1, 1 << 20));
  else if (key == "theta") cfg.theta = static_cast<Index>(as_int(1, 1 << 20));
  else if (key == "radial_mode") {
    if (value == "quantile") cfg.radial_mode = RadialMode::kQuantile;
    else if (value == "equal_width") cfg.radial_mode = RadialMode::kEqualWidth;
    else bad_value(key, value, "'quantile' or 'equal_width'");
  }
  else if (key == "perplexity") {
    cfg.perplexity = parse_scalar(key, value);
    if (cfg.perplexity <= 1.0) out_of_range(key, "must be > 1");
  }
  else if (key == "tsne_iters") cfg.tsne_iters = static_cast<int>(as_int(1, 1 << 24));
  else if (key == "tsne_lr") cfg.tsne_lr = positive_scalar();
  else if (key == "tsne_exaggeration") {
    cfg.tsne_exaggeration = parse_scalar(key, value);
    if (cfg.tsne_exaggeration < 1.0) out_of_range(key, "must be >= 1");
  }
  else if (key == "tsne_exaggeration_iters") {
    cfg.tsne_exaggeration_iters = static_cast<int>(as_int(0, 1 << 24));
  }
  else if (key == "tsne_momentum_switch") {
    cfg.tsne_momentum_switch = static_cast<int>(as_int(0, 1 << 24));
  }
  else if (key == "tsne_student_t_input") cfg.tsne_student_t_input = parse_bool(key, value);
  else if (key == "tsne_subsample") cfg.tsne_subsample = static_cast<Index>(as_int(0, 1LL << 30));
  else if (key == "eval_k") cfg.eval_k = static_cast<Index>(as_int(1, 1 << 20));
  else if (key == "neg_per_user") cfg.neg_per_user = static_cast<int>(as_int(0, 1 << 20));
  else if (key == "val_fraction") {
    cfg.val_fraction = parse_scalar(key, value);
    if (cfg.val_fraction < 0.0 || cfg.val_fraction >= 1.0) {
      out_of_range(key, "must lie in [0, 1)");
    }
  }
  else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
  }
  else if (key == "train_file") cfg.train_file = value;
  else if (key == "test_file") cfg.test_file = value;
  else if (key == "sweep_rho") {
    cfg.sweep_rho.clear();
    for (const auto& part : split_list(value)) {
      const long long v = parse_integer(key, part);
      if (v < 1) out_of_range(key, "entries must be >= 1");
      cfg.sweep_rho.push_back(static_cast<Index>(v));
    }
  }
  else if (key == "sweep_theta") {
    cfg.sweep_theta.clear();
    for (const auto& part : split_list(value)) {
      const long long v = parse_integer(key, part);
      if (v < 1) out_of_range(key, "entries must be >= 1");
      cfg.sweep_theta.push_back(static_cast<Index>(v));
    }
  }
  else if (key == "sweep_perplexity") {
    cfg.sweep_perplexity.clear();
    for (const auto& part : split_list(value)) {
      const Scalar v = parse_scalar(key, part);
      if (v <= 1.0) out_of_range(key, "entries must be > 1");
      cfg.sweep_perplexity.push_back(v);
    }
  }
  else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: " + path + ":" +
                                  std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config: " + path + ":" +
                                  std::to_string(line_no) + ": empty key");
    }
    apply_config_line(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig RunConfig::pretrain_config() const {
  TrainConfig tc;
  tc.d = d;
  tc.K = k;
  tc.K_star = k_star;
  tc.lambda = lambda;
  tc.epsilon = epsilon;
  tc.tau = tau;
  tc.lr = lr;
  tc.batch_size = batch_size;
  tc.epochs = epochs;
  tc.l2_coeff = l2_coeff;
  tc.patience = patience;
  tc.eval_k = eval_k;
  tc.seed = derive_seed(seed, "pretrain");
  return tc;
}

TrainConfig RunConfig::finetune_config() const {
  TrainConfig tc = pretrain_config();
  tc.epochs = finetune_epochs;
  tc.seed = derive_seed(seed, "finetune");
  return tc;
}

TsneConfig RunConfig::tsne_config() const {
  TsneConfig tc;
  tc.perplexity = perplexity;
  tc.iters = tsne_iters;
  tc.lr = tsne_lr;
  tc.early_exaggeration = tsne_exaggeration;
  tc.exaggeration_iters = tsne_exaggeration_iters;
  tc.momentum_switch = tsne_momentum_switch;
  tc.student_t_input = tsne_student_t_input;
  tc.subsample = tsne_subsample;
  tc.seed = derive_seed(seed, "reduce");
  return tc;
}

void RunConfig::validate() const {
  pretrain_config().validate();
  finetune_config().validate();
  if (k_star > k) {
    throw std::invalid_argument("config key 'k_star' out of range: must be <= k");
  }
}

}  // namespace hgcl
