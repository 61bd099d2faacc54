#include "hgcl/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "hgcl/checkpoint.hpp"
#include "hgcl/csv.hpp"
#include "hgcl/dataset.hpp"
#include "hgcl/finetune.hpp"
#include "hgcl/hierarchy.hpp"
#include "hgcl/train.hpp"
#include "hgcl/tsne.hpp"

namespace hgcl {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<Stage> stages_from_name(const std::string& name) {
  if (name == "pretrain") return {Stage::kPretrain};
  if (name == "reduce") return {Stage::kReduce};
  if (name == "cluster") return {Stage::kCluster};
  if (name == "finetune") return {Stage::kFinetune};
  if (name == "evaluate") return {Stage::kEvaluate};
  if (name == "all") {
    return {Stage::kPretrain, Stage::kReduce, Stage::kCluster,
            Stage::kFinetune, Stage::kEvaluate};
  }
  throw std::invalid_argument("unknown stage '" + name + "'");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kPretrain: return "pretrain";
    case Stage::kReduce: return "reduce";
    case Stage::kCluster: return "cluster";
    case Stage::kFinetune: return "finetune";
    case Stage::kEvaluate: return "evaluate";
  }
  return "?";
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string digest_bytes(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return hex64(h);
}

std::string digest_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("digest_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return digest_bytes(buf.str());
}

namespace {

std::string now_iso() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

json config_snapshot(const RunConfig& c) {
  return json{
      {"d", c.d},
      {"k", c.k},
      {"k_star", c.k_star},
      {"lambda", c.lambda},
      {"epsilon", c.epsilon},
      {"tau", c.tau},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"finetune_epochs", c.finetune_epochs},
      {"l2_coeff", c.l2_coeff},
      {"patience", c.patience},
      {"rho", c.rho},
      {"theta", c.theta},
      {"radial_mode",
       c.radial_mode == RadialMode::kQuantile ? "quantile" : "equal_width"},
      {"perplexity", c.perplexity},
      {"tsne_iters", c.tsne_iters},
      {"tsne_lr", c.tsne_lr},
      {"tsne_exaggeration", c.tsne_exaggeration},
      {"tsne_exaggeration_iters", c.tsne_exaggeration_iters},
      {"tsne_momentum_switch", c.tsne_momentum_switch},
      {"tsne_student_t_input", c.tsne_student_t_input},
      {"tsne_subsample", c.tsne_subsample},
      {"eval_k", c.eval_k},
      {"neg_per_user", c.neg_per_user},
      {"val_fraction", c.val_fraction},
      {"seed", c.seed},
      {"train_file", c.train_file},
      {"test_file", c.test_file},
      {"sweep_rho", c.sweep_rho},
      {"sweep_theta", c.sweep_theta},
      {"sweep_perplexity", c.sweep_perplexity},
  };
}

struct StageContext {
  const RunConfig& cfg;
  const PipelineOptions& opt;
  fs::path dir;
  json manifest;

  bool data_loaded = false;
  InteractionDataset ds_full;
  BipartiteGraph g_full;   // every training-file edge (exclusion, strengths)
  BipartiteGraph g_train;  // minus the validation holdout
  TestSet val;
  bool has_val = false;

  std::map<std::string, std::string, std::less<>> digest_memo;

  StageContext(const RunConfig& c, const PipelineOptions& o)
      : cfg(c), opt(o), dir(o.out_dir) {}

  fs::path artifact(const std::string& name) const { return dir / name; }

  std::string memo_digest(const std::string& path) {
    auto it = digest_memo.find(path);
    if (it != digest_memo.end()) return it->second;
    std::string d = digest_file(path);
    digest_memo.emplace(path, d);
    return d;
  }

  void log(const std::string& line) const {
    if (!opt.quiet) std::cout << line << "\n";
  }

  void ensure_data() {
    if (data_loaded) return;
    if (cfg.train_file.empty()) {
      throw std::runtime_error("config key 'train_file' is required");
    }
    ds_full = load_interactions(cfg.train_file);
    g_full = build_graph(ds_full);

    const Index total = static_cast<Index>(ds_full.interactions.size());
    const auto val_count =
        static_cast<Index>(cfg.val_fraction * static_cast<Scalar>(total));
    if (val_count > 0) {
      std::vector<Index> order(static_cast<std::size_t>(total));
      std::iota(order.begin(), order.end(), Index{0});
      Rng rng(derive_seed(cfg.seed, "val-split"));
      rng.shuffle(order);
      std::vector<std::pair<Index, Index>> val_pairs, train_pairs;
      val_pairs.reserve(static_cast<std::size_t>(val_count));
      train_pairs.reserve(static_cast<std::size_t>(total - val_count));
      for (Index pos = 0; pos < total; ++pos) {
        const auto& edge =
            ds_full.interactions[static_cast<std::size_t>(order[pos])];
        (pos < val_count ? val_pairs : train_pairs).push_back(edge);
      }
      g_train = build_graph(std::move(train_pairs), ds_full.num_users(),
                            ds_full.num_items());
      val = make_test_set(std::span(val_pairs), ds_full.num_users());
      has_val = true;
    } else {
      g_train = g_full;
    }
    data_loaded = true;
  }

  // --- Manifest plumbing -------------------------------------------------

  void load_manifest() {
    const fs::path path = dir / "manifest.json";
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        manifest = json::parse(in);
      } catch (const json::parse_error& e) {
        throw std::runtime_error("manifest " + path.string() +
                                 " is corrupt: " + e.what());
      }
    }
    if (!manifest.is_object()) manifest = json::object();
    if (!manifest.contains("stages") || !manifest["stages"].is_object()) {
      manifest["stages"] = json::object();
    }
  }

  void save_manifest() {
    manifest["config"] = config_snapshot(cfg);
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest.json");
  }

  bool stage_current(const std::string& name, const std::string& params,
                     std::span<const std::string> artifacts) {
    if (opt.force) return false;
    const auto& stages = manifest["stages"];
    if (!stages.contains(name)) return false;
    const auto& record = stages[name];
    if (record.value("params_digest", std::string()) != params) return false;
    if (!record.contains("artifacts")) return false;
    for (const auto& file : artifacts) {
      const fs::path path = artifact(file);
      if (!fs::exists(path)) return false;
      const auto& arts = record["artifacts"];
      if (!arts.contains(file)) return false;
      if (arts[file].get<std::string>() != memo_digest(path.string())) {
        return false;
      }
    }
    return true;
  }

  void stamp_stage(const std::string& name, const std::string& params,
                   std::span<const std::string> artifacts) {
    json arts = json::object();
    for (const auto& file : artifacts) {
      const std::string path = artifact(file).string();
      digest_memo.erase(path);  // freshly written
      arts[file] = memo_digest(path);
    }
    manifest["stages"][name] = json{{"params_digest", params},
                                    {"completed_at", now_iso()},
                                    {"artifacts", arts}};
    save_manifest();
  }

  void require_artifact(const std::string& file, const std::string& producer,
                        const std::string& current) const {
    if (!fs::exists(artifact(file))) {
      throw std::runtime_error("stage '" + current + "' requires " + file +
                               "; run '" + producer + "' first");
    }
  }

  // --- Parameter digests --------------------------------------------------

  std::string graph_signature() {
    if (cfg.train_file.empty()) {
      throw std::runtime_error("config key 'train_file' is required");
    }
    return "train=" + memo_digest(cfg.train_file) +
           ";val_fraction=" + format_scalar(cfg.val_fraction) +
           ";split_seed=" + std::to_string(derive_seed(cfg.seed, "val-split"));
  }

  std::string shared_train_params() const {
    std::ostringstream s;
    s << "d=" << cfg.d << ";k=" << cfg.k << ";k_star=" << cfg.k_star
      << ";lambda=" << format_scalar(cfg.lambda)
      << ";epsilon=" << format_scalar(cfg.epsilon)
      << ";tau=" << format_scalar(cfg.tau) << ";lr=" << format_scalar(cfg.lr)
      << ";batch=" << cfg.batch_size
      << ";l2=" << format_scalar(cfg.l2_coeff) << ";patience=" << cfg.patience
      << ";eval_k=" << cfg.eval_k;
    return s.str();
  }

  std::string pretrain_params() {
    return graph_signature() + ";" + shared_train_params() +
           ";epochs=" + std::to_string(cfg.epochs) +
           ";seed=" + std::to_string(derive_seed(cfg.seed, "pretrain"));
  }

  std::string reduce_params() {
    std::ostringstream s;
    s << "emb=" << memo_digest(artifact("pretrained.emb").string()) << ";"
      << graph_signature() << ";k=" << cfg.k
      << ";perplexity=" << format_scalar(cfg.perplexity)
      << ";iters=" << cfg.tsne_iters << ";lr=" << format_scalar(cfg.tsne_lr)
      << ";exaggeration=" << format_scalar(cfg.tsne_exaggeration)
      << ";exaggeration_iters=" << cfg.tsne_exaggeration_iters
      << ";momentum_switch=" << cfg.tsne_momentum_switch
      << ";student_t=" << cfg.tsne_student_t_input
      << ";subsample=" << cfg.tsne_subsample
      << ";seed=" << derive_seed(cfg.seed, "reduce");
    return s.str();
  }

  std::string cluster_params() {
    std::ostringstream s;
    s << "coords=" << memo_digest(artifact("item_coords.csv").string())
      << ";rho=" << cfg.rho << ";theta=" << cfg.theta << ";mode="
      << (cfg.radial_mode == RadialMode::kQuantile ? "quantile"
                                                   : "equal_width");
    return s.str();
  }

  std::string finetune_params() {
    return "emb=" + memo_digest(artifact("pretrained.emb").string()) +
           ";clusters=" + memo_digest(artifact("clusters.csv").string()) +
           ";" + graph_signature() + ";" + shared_train_params() +
           ";rho=" + std::to_string(cfg.rho) +
           ";theta=" + std::to_string(cfg.theta) +
           ";epochs=" + std::to_string(cfg.finetune_epochs) +
           ";seed=" + std::to_string(derive_seed(cfg.seed, "finetune")) +
           ";init_seed=" + std::to_string(derive_seed(cfg.seed, "ft-init"));
  }

  std::string evaluate_params() {
    if (cfg.test_file.empty()) {
      throw std::runtime_error(
          "config key 'test_file' is required for stage 'evaluate'");
    }
    return "model=" + memo_digest(artifact("finetuned.emb").string()) +
           ";clusters=" + memo_digest(artifact("clusters.csv").string()) +
           ";" + graph_signature() +
           ";test=" + memo_digest(cfg.test_file) +
           ";k=" + std::to_string(cfg.k) +
           ";eval_k=" + std::to_string(cfg.eval_k) +
           ";neg_per_user=" + std::to_string(cfg.neg_per_user) +
           ";seed=" + std::to_string(derive_seed(cfg.seed, "strength"));
  }
};

// --- Artifact readers -----------------------------------------------------

Matrix read_coords_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "item_id,x,y") {
    throw std::runtime_error(path.string() + ": bad header");
  }
  std::vector<std::array<Scalar, 2>> rows;
  Index expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Index id = -1;
    double x = 0.0, y = 0.0;
    if (std::sscanf(line.c_str(), "%td,%lf,%lf", &id, &x, &y) != 3 ||
        id != expect) {
      throw std::runtime_error(path.string() + ": bad row '" + line + "'");
    }
    rows.push_back({x, y});
    ++expect;
  }
  if (rows.empty()) throw std::runtime_error(path.string() + ": no rows");
  Matrix coords(static_cast<Index>(rows.size()), 2);
  for (Index i = 0; i < coords.rows(); ++i) {
    coords(i, 0) = rows[static_cast<std::size_t>(i)][0];
    coords(i, 1) = rows[static_cast<std::size_t>(i)][1];
  }
  return coords;
}

ClusterAssignment read_assignment_csv(const fs::path& path, Index rho,
                                      Index theta) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "item_id,cluster_id") {
    throw std::runtime_error(path.string() + ": bad header");
  }
  ClusterAssignment a;
  a.rho = rho;
  a.theta = theta;
  a.sizes.assign(static_cast<std::size_t>(rho * theta), 0);
  Index expect = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Index id = -1, cluster = -1;
    if (std::sscanf(line.c_str(), "%td,%td", &id, &cluster) != 2 ||
        id != expect || cluster < 0 || cluster >= a.num_clusters()) {
      throw std::runtime_error(path.string() + ": bad row '" + line +
                               "' (does rho*theta match the cluster stage?)");
    }
    a.assign.push_back(cluster);
    ++a.sizes[static_cast<std::size_t>(cluster)];
    ++expect;
  }
  if (a.assign.empty()) throw std::runtime_error(path.string() + ": no rows");
  return a;
}

EvalReport read_eval_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::string> kv;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    kv[line.substr(0, comma)] = line.substr(comma + 1);
  }
  EvalReport rep;
  rep.k = std::stoll(kv.at("k"));
  rep.recall = std::stod(kv.at("recall"));
  rep.ndcg = std::stod(kv.at("ndcg"));
  rep.users_evaluated = std::stoll(kv.at("users_evaluated"));
  rep.users_skipped = std::stoll(kv.at("users_skipped"));
  return rep;
}

// --- Stage bodies -----------------------------------------------------------

void stage_pretrain(StageContext& ctx) {
  ctx.ensure_data();
  const TrainConfig tc = ctx.cfg.pretrain_config();
  const EpochHook hook = [&ctx, &tc](const EpochStats& es) {
    std::ostringstream s;
    s << "[pretrain] epoch " << es.epoch << "/" << tc.epochs
      << " total=" << es.total;
    if (es.val_recall >= 0.0) {
      s << " val_recall=" << es.val_recall
        << (es.improved ? " (best)" : "");
    }
    ctx.log(s.str());
  };
  const PretrainResult res =
      pretrain(ctx.g_train, tc, ctx.has_val ? &ctx.val : nullptr, hook);

  save_embeddings(ctx.artifact("pretrained.emb").string(), res.e0);
  std::vector<std::vector<std::string>> rows;
  for (const auto& es : res.history) {
    rows.push_back({format_index(es.epoch), format_scalar(es.bpr),
                    format_scalar(es.infonce), format_scalar(es.l2),
                    es.val_recall >= 0.0 ? format_scalar(es.val_recall) : "",
                    es.val_ndcg >= 0.0 ? format_scalar(es.val_ndcg) : ""});
  }
  const std::vector<std::string> header{"epoch", "l_rec", "l_cl",
                                        "l2",    "recall", "ndcg"};
  write_csv(ctx.artifact("pretrain_metrics.csv").string(), header, rows);
  ctx.log("[pretrain] best epoch " + std::to_string(res.best_epoch) +
          ", checkpoint written");
}

void stage_reduce(StageContext& ctx) {
  ctx.ensure_data();
  const Matrix e0 = load_embeddings(ctx.artifact("pretrained.emb").string());
  const Index nodes = ctx.g_train.num_users + ctx.g_train.num_items;
  if (e0.rows() != nodes) {
    throw std::runtime_error("pretrained.emb has " + std::to_string(e0.rows()) +
                             " rows, expected " + std::to_string(nodes));
  }
  const NormalizedAdjacency adj = normalize_adjacency(ctx.g_train);
  const EmbeddingState state = propagate(adj, e0, ctx.cfg.k, {});
  const Matrix items = state.pooled.bottomRows(ctx.g_train.num_items);

  const Matrix coords = reduce_items(items, ctx.cfg.tsne_config());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(coords.rows()));
  for (Index i = 0; i < coords.rows(); ++i) {
    rows.push_back({format_index(i), format_scalar(coords(i, 0)),
                    format_scalar(coords(i, 1))});
  }
  const std::vector<std::string> header{"item_id", "x", "y"};
  write_csv(ctx.artifact("item_coords.csv").string(), header, rows);
  ctx.log("[reduce] projected " + std::to_string(coords.rows()) + " items");
}

void stage_cluster(StageContext& ctx) {
  const Matrix coords = read_coords_csv(ctx.artifact("item_coords.csv"));
  const ClusterAssignment a = polar_partition(coords, ctx.cfg.rho,
                                              ctx.cfg.theta,
                                              ctx.cfg.radial_mode);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(a.assign.size());
  for (std::size_t j = 0; j < a.assign.size(); ++j) {
    rows.push_back({format_index(static_cast<Index>(j)),
                    format_index(a.assign[j])});
  }
  const std::vector<std::string> header{"item_id", "cluster_id"};
  write_csv(ctx.artifact("clusters.csv").string(), header, rows);

  Index non_empty = 0;
  for (Index s : a.sizes) non_empty += (s > 0);
  ctx.log("[cluster] " + std::to_string(a.assign.size()) + " items into " +
          std::to_string(non_empty) + "/" + std::to_string(a.num_clusters()) +
          " occupied sectors");
}

void stage_finetune(StageContext& ctx) {
  ctx.ensure_data();
  const Matrix e0 = load_embeddings(ctx.artifact("pretrained.emb").string());
  const ClusterAssignment a = read_assignment_csv(
      ctx.artifact("clusters.csv"), ctx.cfg.rho, ctx.cfg.theta);
  if (static_cast<Index>(a.assign.size()) != ctx.g_train.num_items) {
    throw std::runtime_error("clusters.csv covers " +
                             std::to_string(a.assign.size()) +
                             " items, graph has " +
                             std::to_string(ctx.g_train.num_items));
  }
  const NormalizedAdjacency adj = normalize_adjacency(ctx.g_train);
  const EmbeddingState state = propagate(adj, e0, ctx.cfg.k, {});
  Rng rng_init(derive_seed(ctx.cfg.seed, "ft-init"));
  const HgclModel warm = init_finetune(state, a, rng_init);
  const HierarchyGraph h = build_user_cluster_graph(ctx.g_train, a);

  const TrainConfig tc = ctx.cfg.finetune_config();
  const FinetuneHook hook = [&ctx, &tc](const FinetuneEpochStats& es) {
    std::ostringstream s;
    s << "[finetune] epoch " << es.epoch << "/" << tc.epochs
      << " total=" << es.total;
    if (es.val_recall >= 0.0) {
      s << " val_recall=" << es.val_recall << (es.improved ? " (best)" : "");
    }
    ctx.log(s.str());
  };
  const FinetuneResult res = finetune(ctx.g_train, h, warm, tc,
                                      ctx.has_val ? &ctx.val : nullptr, hook);

  save_model_blocks(ctx.artifact("finetuned.emb").string(),
                    {res.model.e_user, res.model.e_item, res.model.e_cluster});
  std::vector<std::vector<std::string>> rows;
  for (const auto& es : res.history) {
    rows.push_back({format_index(es.epoch), format_scalar(es.bpr_ui),
                    format_scalar(es.bpr_uc), format_scalar(es.infonce),
                    format_scalar(es.l2),
                    es.val_recall >= 0.0 ? format_scalar(es.val_recall) : "",
                    es.val_ndcg >= 0.0 ? format_scalar(es.val_ndcg) : ""});
  }
  const std::vector<std::string> header{
      "epoch", "l_rec_ui", "l_rec_uc", "l_cl", "l2", "recall", "ndcg"};
  write_csv(ctx.artifact("finetune_metrics.csv").string(), header, rows);
  ctx.log("[finetune] best epoch " + std::to_string(res.best_epoch) +
          ", checkpoint written");
}

void append_series(std::vector<std::vector<std::string>>& rows,
                   const std::string& name, const StrengthSeries& s) {
  for (std::size_t b = 0; b + 1 < s.bin_edges.size(); ++b) {
    rows.push_back({name, format_scalar(s.bin_edges[b]),
                    format_scalar(s.bin_edges[b + 1]),
                    format_index(s.bin_counts[b])});
  }
}

EvalReport stage_evaluate(StageContext& ctx) {
  ctx.ensure_data();
  if (ctx.cfg.test_file.empty()) {
    throw std::runtime_error(
        "config key 'test_file' is required for stage 'evaluate'");
  }
  const ModelBlocks blocks =
      load_model_blocks(ctx.artifact("finetuned.emb").string());
  const ClusterAssignment a = read_assignment_csv(
      ctx.artifact("clusters.csv"), ctx.cfg.rho, ctx.cfg.theta);
  const Index m = ctx.g_train.num_users;
  const Index n = ctx.g_train.num_items;
  if (blocks.user.rows() != m || blocks.item.rows() != n ||
      blocks.cluster.rows() != a.num_clusters() ||
      static_cast<Index>(a.assign.size()) != n) {
    throw std::runtime_error(
        "finetuned.emb/clusters.csv do not match the training data "
        "(rerun 'finetune'?)");
  }

  HgclModel model;
  model.e_user = blocks.user;
  model.e_item = blocks.item;
  model.e_cluster = blocks.cluster;
  model.assignment = a;
  const HierarchyGraph h = build_user_cluster_graph(ctx.g_train, a);
  refresh_pooled(model, normalize_adjacency(ctx.g_train), h, ctx.cfg.k);

  const InteractionDataset test_ds =
      load_interactions(ctx.cfg.test_file, ctx.ds_full);
  const TestSet test = make_test_set(test_ds, m);
  const ScoreFn scorer = [&model](Index u) { return finetune_scores(model, u); };

  const EvalReport rep =
      evaluate(scorer, ctx.g_full, test, ctx.cfg.eval_k, ctx.opt.threads);
  Rng rng(derive_seed(ctx.cfg.seed, "strength"));
  const StrengthStats stats =
      strength_stats(scorer, ctx.g_full, test, ctx.cfg.neg_per_user, rng);

  std::vector<std::vector<std::string>> rows{
      {"k", format_index(rep.k)},
      {"recall", format_scalar(rep.recall)},
      {"ndcg", format_scalar(rep.ndcg)},
      {"users_evaluated", format_index(rep.users_evaluated)},
      {"users_skipped", format_index(rep.users_skipped)},
      {"test_interactions", format_index(test.total)},
      {"test_dropped", format_index(test.dropped)},
      {"strength_train_pos_mean", format_scalar(stats.train_pos.mean)},
      {"strength_train_neg_mean", format_scalar(stats.train_neg.mean)},
      {"strength_test_pos_mean", format_scalar(stats.test_pos.mean)},
      {"strength_test_neg_mean", format_scalar(stats.test_neg.mean)},
  };
  const std::vector<std::string> header{"metric", "value"};
  write_csv(ctx.artifact("eval_report.csv").string(), header, rows);

  std::vector<std::vector<std::string>> hist;
  append_series(hist, "train_pos", stats.train_pos);
  append_series(hist, "train_neg", stats.train_neg);
  append_series(hist, "test_pos", stats.test_pos);
  append_series(hist, "test_neg", stats.test_neg);
  const std::vector<std::string> hist_header{"series", "bin_lo", "bin_hi",
                                             "count"};
  write_csv(ctx.artifact("strength_hist.csv").string(), hist_header, hist);

  std::ostringstream s;
  s << "[evaluate] recall@" << rep.k << "=" << rep.recall << " ndcg@" << rep.k
    << "=" << rep.ndcg << " over " << rep.users_evaluated << " users";
  ctx.log(s.str());
  return rep;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg,
                            std::span<const Stage> stages,
                            const PipelineOptions& opt) {
  cfg.validate();
  fs::create_directories(opt.out_dir);
  StageContext ctx(cfg, opt);
  ctx.load_manifest();

  auto requested = [&stages](Stage s) {
    return std::find(stages.begin(), stages.end(), s) != stages.end();
  };

  PipelineResult result;
  const std::vector<std::string> none;

  if (requested(Stage::kPretrain)) {
    if (cfg.train_file.empty() || !fs::exists(cfg.train_file)) {
      throw std::runtime_error("stage 'pretrain' requires train_file '" +
                               cfg.train_file + "' to exist");
    }
    const std::string params = ctx.pretrain_params();
    const std::vector<std::string> arts{"pretrained.emb",
                                        "pretrain_metrics.csv"};
    if (ctx.stage_current("pretrain", params, arts)) {
      ctx.log("[pretrain] up to date, skipping");
    } else {
      stage_pretrain(ctx);
      ctx.stamp_stage("pretrain", params, arts);
    }
  }

  if (requested(Stage::kReduce)) {
    ctx.require_artifact("pretrained.emb", "pretrain", "reduce");
    const std::string params = ctx.reduce_params();
    const std::vector<std::string> arts{"item_coords.csv"};
    if (ctx.stage_current("reduce", params, arts)) {
      ctx.log("[reduce] up to date, skipping");
    } else {
      stage_reduce(ctx);
      ctx.stamp_stage("reduce", params, arts);
    }
  }

  if (requested(Stage::kCluster)) {
    ctx.require_artifact("item_coords.csv", "reduce", "cluster");
    const std::string params = ctx.cluster_params();
    const std::vector<std::string> arts{"clusters.csv"};
    if (ctx.stage_current("cluster", params, arts)) {
      ctx.log("[cluster] up to date, skipping");
    } else {
      stage_cluster(ctx);
      ctx.stamp_stage("cluster", params, arts);
    }
  }

  if (requested(Stage::kFinetune)) {
    ctx.require_artifact("pretrained.emb", "pretrain", "finetune");
    ctx.require_artifact("clusters.csv", "cluster", "finetune");
    const std::string params = ctx.finetune_params();
    const std::vector<std::string> arts{"finetuned.emb",
                                        "finetune_metrics.csv"};
    if (ctx.stage_current("finetune", params, arts)) {
      ctx.log("[finetune] up to date, skipping");
    } else {
      stage_finetune(ctx);
      ctx.stamp_stage("finetune", params, arts);
    }
  }

  if (requested(Stage::kEvaluate)) {
    ctx.require_artifact("finetuned.emb", "finetune", "evaluate");
    ctx.require_artifact("clusters.csv", "cluster", "evaluate");
    const std::string params = ctx.evaluate_params();
    const std::vector<std::string> arts{"eval_report.csv",
                                        "strength_hist.csv"};
    if (ctx.stage_current("evaluate", params, arts)) {
      ctx.log("[evaluate] up to date, skipping");
      result.report = read_eval_report_csv(ctx.artifact("eval_report.csv"));
    } else {
      result.report = stage_evaluate(ctx);
      ctx.stamp_stage("evaluate", params, arts);
    }
  }

  ctx.save_manifest();
  return result;
}

void run_sweep(const RunConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  if (cfg.test_file.empty()) {
    throw std::runtime_error("config key 'test_file' is required for 'sweep'");
  }
  const std::vector<Index> rhos =
      cfg.sweep_rho.empty() ? std::vector<Index>{cfg.rho} : cfg.sweep_rho;
  const std::vector<Index> thetas =
      cfg.sweep_theta.empty() ? std::vector<Index>{cfg.theta} : cfg.sweep_theta;
  const std::vector<Scalar> perps = cfg.sweep_perplexity.empty()
                                        ? std::vector<Scalar>{cfg.perplexity}
                                        : cfg.sweep_perplexity;

  // Shared stage-1 checkpoint lives in the parent run directory.
  const Stage pre[] = {Stage::kPretrain};
  run_pipeline(cfg, pre, opt);
  const fs::path shared_emb = fs::path(opt.out_dir) / "pretrained.emb";

  std::vector<std::vector<std::string>> rows;
  const Stage cell_stages[] = {Stage::kReduce, Stage::kCluster,
                               Stage::kFinetune, Stage::kEvaluate};
  for (const Index rho : rhos) {
    for (const Index theta : thetas) {
      for (const Scalar perplexity : perps) {
        RunConfig cell_cfg = cfg;
        cell_cfg.rho = rho;
        cell_cfg.theta = theta;
        cell_cfg.perplexity = perplexity;

        PipelineOptions cell_opt = opt;
        const std::string cell_name = "rho" + std::to_string(rho) + "_theta" +
                                      std::to_string(theta) + "_perp" +
                                      format_scalar(perplexity);
        cell_opt.out_dir =
            (fs::path(opt.out_dir) / "sweep" / cell_name).string();
        fs::create_directories(cell_opt.out_dir);
        fs::copy_file(shared_emb,
                      fs::path(cell_opt.out_dir) / "pretrained.emb",
                      fs::copy_options::overwrite_existing);

        if (!opt.quiet) std::cout << "[sweep] cell " << cell_name << "\n";
        const PipelineResult res =
            run_pipeline(cell_cfg, cell_stages, cell_opt);
        rows.push_back({format_index(rho), format_index(theta),
                        format_scalar(perplexity),
                        format_scalar(res.report->recall),
                        format_scalar(res.report->ndcg)});
      }
    }
  }
  const std::vector<std::string> header{"rho", "theta", "perplexity", "recall",
                                        "ndcg"};
  write_csv((fs::path(opt.out_dir) / "sweep.csv").string(), header, rows);
  if (!opt.quiet) {
    std::cout << "[sweep] " << rows.size() << " cells -> sweep.csv\n";
  }
}

}  // namespace hgcl
