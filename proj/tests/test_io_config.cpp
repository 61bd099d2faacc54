#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hgcl/checkpoint.hpp"
#include "hgcl/config.hpp"
#include "hgcl/csv.hpp"
#include "hgcl/embedding.hpp"
#include "oracles.hpp"

using namespace hgcl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hgcl_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = scratch_file(name);
  spill(p, body);
  return p;
}

}  // namespace

TEST_CASE("embedding checkpoints round-trip bit for bit") {
  Rng rng(149);
  Matrix e = xavier_init(17, 6, rng);
  e(0, 0) = 0.0;
  e(1, 1) = -0.0;
  e(2, 2) = 1e-300;
  e(3, 3) = -1e300;
  const fs::path p = scratch_file("roundtrip.emb");
  save_embeddings(p.string(), e);
  const Matrix back = load_embeddings(p.string());
  REQUIRE(back.rows() == 17);
  REQUIRE(back.cols() == 6);
  CHECK(std::memcmp(back.data(), e.data(),
                    sizeof(Scalar) * static_cast<std::size_t>(e.size())) == 0);

  const std::string bytes = slurp(p);
  CHECK(bytes.rfind("HGCL-EMB v1 rows=17 d=6\n", 0) == 0);
  CHECK(bytes.size() == std::string("HGCL-EMB v1 rows=17 d=6\n").size() +
                            sizeof(Scalar) * 17 * 6);
}

TEST_CASE("model block files carry three matrices in order") {
  Rng rng(151);
  ModelBlocks blocks;
  blocks.user = xavier_init(5, 4, rng);
  blocks.item = xavier_init(9, 4, rng);
  blocks.cluster = xavier_init(3, 4, rng);
  const fs::path p = scratch_file("blocks.emb");
  save_model_blocks(p.string(), blocks);

  const ModelBlocks back = load_model_blocks(p.string());
  CHECK((back.user - blocks.user).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.item - blocks.item).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.cluster - blocks.cluster).cwiseAbs().maxCoeff() == 0.0);

  // A multi-block file is not a single-embedding file.
  CHECK_THROWS_WITH_AS(load_embeddings(p.string()),
                       doctest::Contains("trailing data"), std::runtime_error);
}

TEST_CASE("checkpoint loader rejects damaged files") {
  CHECK_THROWS_WITH_AS(load_embeddings("/nonexistent/nowhere.emb"),
                       doctest::Contains("cannot open"), std::runtime_error);

  const fs::path empty = scratch_file("empty.emb");
  spill(empty, "");
  CHECK_THROWS_WITH_AS(load_embeddings(empty.string()),
                       doctest::Contains("missing header"),
                       std::runtime_error);

  const fs::path garbled = scratch_file("garbled.emb");
  spill(garbled, "NOPE v9 rows=2 d=2\nxxxxxxxx");
  CHECK_THROWS_WITH_AS(load_embeddings(garbled.string()),
                       doctest::Contains("bad header"), std::runtime_error);

  Rng rng(157);
  const Matrix e = xavier_init(4, 3, rng);
  const fs::path cut = scratch_file("cut.emb");
  save_embeddings(cut.string(), e);
  const std::string bytes = slurp(cut);
  spill(cut, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_WITH_AS(load_embeddings(cut.string()),
                       doctest::Contains("truncated payload"),
                       std::runtime_error);

  const fs::path extra = scratch_file("extra.emb");
  save_embeddings(extra.string(), e);
  spill(extra, slurp(extra) + "junk");
  CHECK_THROWS_WITH_AS(load_embeddings(extra.string()),
                       doctest::Contains("trailing data"), std::runtime_error);

  // A single block is one short of the three the model loader expects.
  CHECK_THROWS_AS(load_model_blocks(extra.string()), std::runtime_error);
}

TEST_CASE("scalar formatting survives a parse round-trip") {
  CHECK(format_scalar(1.0) == "1");
  CHECK(format_scalar(0.1) == "0.1");
  CHECK(format_scalar(-0.0) == "-0");
  CHECK(format_index(0) == "0");
  CHECK(format_index(-5) == "-5");
  CHECK(format_index(123456789) == "123456789");

  Rng rng(163);
  std::vector<Scalar> values = {0.0, -0.0, 1e-300, -1e300, 3.141592653589793};
  for (int i = 0; i < 50; ++i) {
    values.push_back(rng.gaussian() * std::pow(10.0, rng.uniform(-12.0, 12.0)));
  }
  for (Scalar v : values) {
    const std::string text = format_scalar(v);
    const Scalar parsed = std::strtod(text.c_str(), nullptr);
    CHECK(parsed == v);
    CHECK(std::signbit(parsed) == std::signbit(v));
  }
}

TEST_CASE("csv writer emits exact comma-separated lines") {
  const fs::path p = scratch_file("table.csv");
  const std::vector<std::string> header = {"a", "b", "c"};
  write_csv(p.string(), header,
            {{"1", "x", "0.5"}, {"2", "y", "-3"}});
  CHECK(slurp(p) == "a,b,c\n1,x,0.5\n2,y,-3\n");

  CHECK_THROWS_AS(write_csv(p.string(), header, {{"only", "two"}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      write_csv("/nonexistent/dir/table.csv", header, {}),
      std::runtime_error);
}

TEST_CASE("config files parse keys, comments, and whitespace") {
  const fs::path p = write_config("full.cfg", R"(
# full sweep of keys
d = 32
k = 4
k_star = 2
lambda = 0.15
epsilon = 0.1    # perturbation radius
tau = 0.25
lr = 0.005
batch_size = 512
epochs = 20
finetune_epochs = 30
l2_coeff = 0.0001
patience = 5
rho = 6
theta = 3
radial_mode = equal_width
perplexity = 12.5
tsne_iters = 400
tsne_lr = 150
tsne_exaggeration = 8
tsne_exaggeration_iters = 100
tsne_momentum_switch = 120
tsne_student_t_input = true
tsne_subsample = 2000
eval_k = 10
neg_per_user = 7
val_fraction = 0.1
seed = 99
train_file = data/train.txt
test_file = data/test.txt
sweep_rho = 2, 4 ,8
sweep_theta = 3
sweep_perplexity = 5, 30.5
)");
  const RunConfig cfg = parse_config(p.string());
  CHECK(cfg.d == 32);
  CHECK(cfg.k == 4);
  CHECK(cfg.k_star == 2);
  CHECK(cfg.lambda == 0.15);
  CHECK(cfg.epsilon == 0.1);
  CHECK(cfg.tau == 0.25);
  CHECK(cfg.lr == 0.005);
  CHECK(cfg.batch_size == 512);
  CHECK(cfg.epochs == 20);
  CHECK(cfg.finetune_epochs == 30);
  CHECK(cfg.l2_coeff == 0.0001);
  CHECK(cfg.patience == 5);
  CHECK(cfg.rho == 6);
  CHECK(cfg.theta == 3);
  CHECK(cfg.radial_mode == RadialMode::kEqualWidth);
  CHECK(cfg.perplexity == 12.5);
  CHECK(cfg.tsne_iters == 400);
  CHECK(cfg.tsne_lr == 150.0);
  CHECK(cfg.tsne_exaggeration == 8.0);
  CHECK(cfg.tsne_exaggeration_iters == 100);
  CHECK(cfg.tsne_momentum_switch == 120);
  CHECK(cfg.tsne_student_t_input);
  CHECK(cfg.tsne_subsample == 2000);
  CHECK(cfg.eval_k == 10);
  CHECK(cfg.neg_per_user == 7);
  CHECK(cfg.val_fraction == 0.1);
  CHECK(cfg.seed == 99);
  CHECK(cfg.train_file == "data/train.txt");
  CHECK(cfg.test_file == "data/test.txt");
  CHECK(cfg.sweep_rho == std::vector<Index>{2, 4, 8});
  CHECK(cfg.sweep_theta == std::vector<Index>{3});
  REQUIRE(cfg.sweep_perplexity.size() == 2);
  CHECK(cfg.sweep_perplexity[0] == 5.0);
  CHECK(cfg.sweep_perplexity[1] == 30.5);
}

TEST_CASE("unset keys keep their defaults") {
  const fs::path p = write_config("minimal.cfg", "seed = 7\n");
  const RunConfig cfg = parse_config(p.string());
  CHECK(cfg.d == 64);
  CHECK(cfg.k == 3);
  CHECK(cfg.k_star == 1);
  CHECK(cfg.lambda == 0.2);
  CHECK(cfg.batch_size == 2048);
  CHECK(cfg.val_fraction == 0.05);
  CHECK(cfg.radial_mode == RadialMode::kQuantile);
  CHECK(!cfg.tsne_student_t_input);
  CHECK(cfg.train_file.empty());
  CHECK(cfg.sweep_rho.empty());
}

TEST_CASE("config parsing reports precise errors") {
  RunConfig cfg;
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "mystery", "1"),
                       doctest::Contains("unknown key"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "d", "many"),
                       doctest::Contains("an integer"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "lambda", "fast"),
                       doctest::Contains("a number"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "tsne_student_t_input", "yep"),
                       doctest::Contains("boolean"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "tau", "0"),
                       doctest::Contains("must be > 0"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "val_fraction", "1.0"),
                       doctest::Contains("[0, 1)"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "radial_mode", "spiral"),
                       doctest::Contains("'quantile' or 'equal_width'"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "perplexity", "1"),
                       doctest::Contains("must be > 1"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_config_line(cfg, "epochs", "0"),
                       doctest::Contains("out of range"),
                       std::invalid_argument);

  const fs::path no_eq = write_config("noeq.cfg", "d 32\n");
  CHECK_THROWS_WITH_AS(parse_config(no_eq.string()),
                       doctest::Contains("expected 'key = value'"),
                       std::invalid_argument);
  const fs::path no_key = write_config("nokey.cfg", " = 32\n");
  CHECK_THROWS_WITH_AS(parse_config(no_key.string()),
                       doctest::Contains("empty key"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config("/nonexistent/nowhere.cfg"),
                       doctest::Contains("cannot open"), std::runtime_error);

  // Cross-field constraint enforced when a whole file is parsed.
  const fs::path bad_ks =
      write_config("bad_kstar.cfg", "k = 2\nk_star = 3\n");
  CHECK_THROWS_WITH_AS(parse_config(bad_ks.string()),
                       doctest::Contains("K_star"), std::invalid_argument);
}

TEST_CASE("run config fans out into stage configs with derived seeds") {
  const fs::path p = write_config("stages.cfg", R"(
d = 16
k = 2
k_star = 1
epochs = 9
finetune_epochs = 4
seed = 1234
perplexity = 8
tsne_iters = 250
tsne_subsample = 500
)");
  const RunConfig cfg = parse_config(p.string());

  const TrainConfig pre = cfg.pretrain_config();
  CHECK(pre.d == 16);
  CHECK(pre.K == 2);
  CHECK(pre.K_star == 1);
  CHECK(pre.epochs == 9);
  CHECK(pre.seed == derive_seed(1234, "pretrain"));

  const TrainConfig fine = cfg.finetune_config();
  CHECK(fine.epochs == 4);
  CHECK(fine.seed == derive_seed(1234, "finetune"));
  CHECK(fine.d == pre.d);

  const TsneConfig tsne = cfg.tsne_config();
  CHECK(tsne.perplexity == 8.0);
  CHECK(tsne.iters == 250);
  CHECK(tsne.subsample == 500);
  CHECK(tsne.seed == derive_seed(1234, "reduce"));
}
