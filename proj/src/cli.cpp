#include "modgraph/cli.hpp"

#include "modgraph/errors.hpp"
#include "modgraph/graph.hpp"
#include "modgraph/lesion.hpp"
#include "modgraph/netio.hpp"
#include "modgraph/nullmodel.hpp"
#include "modgraph/parallel.hpp"
#include "modgraph/spectral.hpp"
#include "modgraph/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

namespace modgraph::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset resolve_dataset(const std::string& name, const fs::path& data_dir, int examples,
                        std::uint64_t seed) {
  if (name == "random") {
    return make_random_dataset(examples > 0 ? examples : 3000, 784, 10, seed);
  }
  std::string base = name;
  std::string prefix = "train";
  constexpr std::string_view kTest = "-test";
  if (base.size() > kTest.size() && base.ends_with(kTest)) {
    base.resize(base.size() - kTest.size());
    prefix = "t10k";
  }
  auto find = [&](const std::string& stem) {
    for (const fs::path& p : {data_dir / base / (stem + ".gz"), data_dir / base / stem}) {
      if (fs::exists(p)) return p;
    }
    throw IoError("dataset '" + name + "': cannot find " + (data_dir / base / stem).string() +
                  "[.gz]");
  };
  Dataset data = load_idx(find(prefix + "-images-idx3-ubyte"),
                          find(prefix + "-labels-idx1-ubyte"));
  return examples > 0 ? data.head(examples) : data;
}

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_dir = ".";
};

std::uint64_t resolve_seed(const Common& c, std::ostream& out) {
  if (c.seed) return *c.seed;
  std::random_device rd;
  const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  out << "seed: " << s << "\n";
  return s;
}

fs::path output_path(const Common& c, const std::string& file) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / file;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) throw IoError("cannot write " + path.string());
}

template <typename Writer>
void write_with(const fs::path& path, Writer&& writer) {
  std::ostringstream s;
  writer(s);
  write_text(path, s.str());
}

// Writes an archive and reads it back to confirm it round-trips.
void save_checked(const LayeredNetwork& net, const fs::path& path) {
  save_archive(net, path);
  if (!(load_archive(path) == net)) {
    throw IoError("archive " + path.string() + " did not round-trip");
  }
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

void add_common(CLI::App* cmd, Common& c, bool with_workers) {
  cmd->add_option("--seed", c.seed, "Master seed (generated and printed when absent)");
  cmd->add_option("--out-dir", c.out_dir, "Directory for outputs")->capture_default_str();
  if (with_workers) {
    cmd->add_option("--workers", c.workers, "Worker threads")
        ->envname("MODGRAPH_WORKERS")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }
}

SpectralOptions spectral_options(const std::string& solver) {
  SpectralOptions o;
  o.eigen.kind = parse_eigen_solver(solver);
  return o;
}

struct InitArgs {
  Common common;
  std::vector<int> hidden{64, 64, 64, 64};
  int input = 784;
  int classes = 10;
  std::string out = "init.mg";
};

int cmd_init(const InitArgs& a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.common, out);
  std::vector<int> dims{a.input};
  dims.insert(dims.end(), a.hidden.begin(), a.hidden.end());
  dims.push_back(a.classes);
  const fs::path path = output_path(a.common, a.out);
  save_checked(make_glorot_network(dims, seed), path);
  out << "wrote " << path.string() << "\n";
  return 0;
}

struct TrainArgs {
  Common common;
  std::string dataset = "mnist";
  std::string data_dir;
  std::string images, labels;
  std::string eval_dataset;
  std::string init;
  std::string name = "net";
  int examples = 0;
  std::uint64_t data_seed = 0;
  std::vector<int> hidden{64, 64, 64, 64};
  TrainConfig cfg;
  bool prune = false;
  PruneConfig prune_cfg;
  bool no_shuffle = false;
};

Dataset load_training_data(const TrainArgs& a) {
  if (!a.images.empty() || !a.labels.empty()) {
    if (a.images.empty() || a.labels.empty()) {
      throw ValidationError("--images and --labels must be given together");
    }
    Dataset d = load_idx(a.images, a.labels);
    return a.examples > 0 ? d.head(a.examples) : d;
  }
  return resolve_dataset(a.dataset, a.data_dir, a.examples, a.data_seed);
}

int cmd_train(TrainArgs a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.common, out);
  const Dataset data = load_training_data(a);

  LayeredNetwork initial;
  if (!a.init.empty()) {
    initial = load_archive(a.init);
  } else {
    std::vector<int> dims{data.input_dim()};
    dims.insert(dims.end(), a.hidden.begin(), a.hidden.end());
    dims.push_back(data.num_classes);
    initial = make_glorot_network(dims, derive_seed(seed, 0));
  }

  a.cfg.seed = derive_seed(seed, 1);
  a.cfg.shuffle_each_epoch = !a.no_shuffle;
  if (a.prune) a.cfg.prune = a.prune_cfg;

  const TrainResult result = train(initial, data, a.cfg, [&](const EpochMetrics& m) {
    out << "epoch " << m.epoch << " (" << m.phase << ") loss " << m.loss << " acc "
        << m.train_accuracy << " sparsity " << m.sparsity << "\n";
  });

  const fs::path final_path = output_path(a.common, a.name + ".mg");
  save_checked(result.network, final_path);
  json summary = {
      {"seed", seed},
      {"dataset", a.images.empty() ? a.dataset : a.images},
      {"examples", data.size()},
      {"layer_dims", result.network.layer_dims},
      {"epochs", a.cfg.epochs},
      {"batch_size", a.cfg.batch_size},
      {"learning_rate", a.cfg.learning_rate},
      {"dropout", a.cfg.dropout_rate},
      {"shuffle_each_epoch", a.cfg.shuffle_each_epoch},
      {"train_accuracy", accuracy(result.network, data)},
      {"layer_sparsity", layer_sparsity(result.network)},
      {"network", final_path.filename().string()},
  };
  if (result.pre_pruning) {
    const fs::path pre = output_path(a.common, a.name + "-pre-prune.mg");
    save_checked(*result.pre_pruning, pre);
    summary["pre_pruning_network"] = pre.filename().string();
    summary["pre_pruning_train_accuracy"] = accuracy(*result.pre_pruning, data);
    summary["prune"] = {{"epochs", a.prune_cfg.epochs},
                        {"initial_sparsity", a.prune_cfg.initial_sparsity},
                        {"final_sparsity", a.prune_cfg.final_sparsity},
                        {"frequency", a.prune_cfg.frequency}};
  }
  if (!a.eval_dataset.empty()) {
    const Dataset eval = resolve_dataset(a.eval_dataset, a.data_dir, 0, a.data_seed);
    summary["eval_dataset"] = a.eval_dataset;
    summary["eval_accuracy"] = accuracy(result.network, eval);
  }
  write_with(output_path(a.common, a.name + "-metrics.csv"),
             [&](std::ostream& s) { write_metrics_csv(s, result.metrics); });
  write_text(output_path(a.common, a.name + "-train.json"), summary.dump(2) + "\n");
  out << "wrote " << final_path.string() << "\n";
  return 0;
}

struct ClusterArgs {
  Common common;
  std::string network;
  int k = 4;
  std::string solver = "auto";
  std::string prefix;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.common, out);
  const LayeredNetwork net = load_archive(a.network);
  const WeightedGraph g = network_to_graph(net);
  const ClusteringResult r = cluster_graph(g, a.k, seed, spectral_options(a.solver));
  const std::string prefix =
      a.prefix.empty() ? stem_of(a.network) + "-k" + std::to_string(a.k) : a.prefix;
  write_text(output_path(a.common, prefix + ".json"), clustering_to_json(g, r) + "\n");
  write_with(output_path(a.common, prefix + "-partition.csv"),
             [&](std::ostream& s) { write_partition_csv(s, g, r.partition); });
  out.precision(6);
  out << "ncut " << std::fixed << r.ncut_value << "\n";
  return 0;
}

struct ShuffleArgs {
  Common common;
  std::string network;
  int k = 4;
  int n_shuffles = 320;
  std::string kind = "layer";
  std::string solver = "auto";
  std::string prefix;
};

int cmd_shuffle(const ShuffleArgs& a, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(a.common, out);
  const LayeredNetwork net = load_archive(a.network);
  const NullDistribution d =
      null_distribution(net, a.k, a.n_shuffles, parse_shuffle_kind(a.kind), seed,
                        a.common.workers, spectral_options(a.solver));
  const std::string prefix = a.prefix.empty() ? stem_of(a.network) + "-shuffle" : a.prefix;
  write_text(output_path(a.common, prefix + ".json"), null_summary_json(d) + "\n");
  write_with(output_path(a.common, prefix + "-null.csv"),
             [&](std::ostream& s) { write_null_csv(s, d); });
  out.precision(3);
  out << std::fixed << "ncut " << d.observed_ncut << " null " << d.null_mean() << " +- "
      << d.null_std() << " p " << d.p_value << "\n";
  return 0;
}

struct LesionArgs {
  Common common;
  std::string network;
  std::string partition;
  std::string data = "mnist-test";
  std::string data_dir;
  int examples = 0;
  int n_null = 100;
  int pair_null = 50;
  bool pairs = false;
  std::string mode = "weights";
  std::string prefix;
};

int cmd_lesion(const LesionArgs& a, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(a.common, out);
  const LayeredNetwork net = load_archive(a.network);
  std::ifstream csv(a.partition);
  if (!csv) throw IoError("cannot open " + a.partition);
  const NeuronAssignment assignment = read_partition_csv(csv);
  const Dataset data = resolve_dataset(a.data, a.data_dir, a.examples, seed);
  const LesionEvaluator eval(net, data, parse_lesion_mode(a.mode));
  const std::vector<SubModule> subs = sub_modules(assignment, net);

  const SingleLesionReport report =
      single_lesion_study(eval, subs, a.n_null, derive_seed(seed, 0), a.common.workers);
  for (const auto& notice : report.notices) err << "notice: " << notice << "\n";
  const std::string prefix = a.prefix.empty() ? stem_of(a.network) + "-lesion" : a.prefix;
  write_with(output_path(a.common, prefix + "-single.csv"),
             [&](std::ostream& s) { write_single_lesion_csv(s, report); });
  json summary = {
      {"seed", seed},
      {"data", a.data},
      {"examples", data.size()},
      {"mode", a.mode},
      {"n_null", a.n_null},
      {"base_accuracy", report.base_accuracy},
      {"sub_modules", report.outcomes.size()},
      {"notices", report.notices},
  };
  out << "base accuracy " << report.base_accuracy << ", " << report.outcomes.size()
      << " sub-modules\n";

  if (a.pairs) {
    const auto rows = double_lesion_study(eval, important_pairs(report), a.pair_null,
                                          derive_seed(seed, 1), a.common.workers);
    std::vector<ConditionalImportance> table;
    std::vector<SubModuleId> nodes;
    for (const auto& r : rows) table.push_back(r.flags);
    for (const auto& o : report.outcomes) {
      if (o.classification == LesionClass::kImportant) nodes.push_back(o.sub.id);
    }
    const auto edges = derive_dependency_graph(table);
    write_with(output_path(a.common, prefix + "-double.csv"),
               [&](std::ostream& s) { write_double_lesion_csv(s, rows); });
    write_with(output_path(a.common, prefix + "-dependencies.dot"),
               [&](std::ostream& s) { write_dependency_dot(s, nodes, edges); });
    summary["pair_null"] = a.pair_null;
    summary["pairs"] = rows.size();
    summary["dependency_edges"] = edges.size();
    out << rows.size() << " pairs, " << edges.size() << " dependency edges\n";
  }
  write_text(output_path(a.common, prefix + ".json"), summary.dump(2) + "\n");
  return 0;
}

std::string default_data_dir() {
  const char* env = std::getenv("MODGRAPH_DATA_DIR");
  return env ? env : "data";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral clusterability analysis of trained multi-layer perceptrons"};
  app.set_config("--config", "", "TOML file mirroring the command-line flags");
  app.require_subcommand(1);

  InitArgs init;
  auto* c_init = app.add_subcommand("init", "Write a randomly initialized network");
  add_common(c_init, init.common, false);
  c_init->add_option("--hidden", init.hidden, "Hidden widths, comma separated")
      ->delimiter(',');
  c_init->add_option("--input", init.input)->capture_default_str();
  c_init->add_option("--classes", init.classes)->capture_default_str();
  c_init->add_option("--out", init.out, "Archive file name")->capture_default_str();

  TrainArgs tr;
  tr.data_dir = default_data_dir();
  auto* c_train = app.add_subcommand("train", "Train (and optionally prune) a network");
  add_common(c_train, tr.common, false);
  c_train->add_option("--dataset", tr.dataset, "mnist, fashion, random or a directory name")
      ->capture_default_str();
  c_train->add_option("--data-dir", tr.data_dir)->capture_default_str();
  c_train->add_option("--images", tr.images, "IDX image file (overrides --dataset)");
  c_train->add_option("--labels", tr.labels, "IDX label file");
  c_train->add_option("--examples", tr.examples, "Use only the first N examples");
  c_train->add_option("--data-seed", tr.data_seed, "Seed of the random dataset")
      ->capture_default_str();
  c_train->add_option("--eval-data", tr.eval_dataset, "Dataset to report accuracy on");
  c_train->add_option("--init", tr.init, "Start from this archive");
  c_train->add_option("--name", tr.name, "Output file stem")->capture_default_str();
  c_train->add_option("--hidden", tr.hidden, "Hidden widths, comma separated")
      ->delimiter(',');
  c_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  c_train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  c_train->add_option("--beta1", tr.cfg.adam_beta1)->capture_default_str();
  c_train->add_option("--beta2", tr.cfg.adam_beta2)->capture_default_str();
  c_train->add_option("--dropout", tr.cfg.dropout_rate)->capture_default_str();
  c_train->add_flag("--no-shuffle-epochs", tr.no_shuffle, "Keep the example order fixed");
  c_train->add_flag("--prune", tr.prune, "Run the magnitude pruning phase");
  c_train->add_option("--prune-epochs", tr.prune_cfg.epochs)->capture_default_str();
  c_train->add_option("--initial-sparsity", tr.prune_cfg.initial_sparsity)
      ->capture_default_str();
  c_train->add_option("--final-sparsity", tr.prune_cfg.final_sparsity)
      ->capture_default_str();
  c_train->add_option("--prune-frequency", tr.prune_cfg.frequency)->capture_default_str();

  ClusterArgs cl;
  auto* c_cluster = app.add_subcommand("cluster", "Spectrally cluster a network");
  add_common(c_cluster, cl.common, false);
  c_cluster->add_option("network", cl.network, "Network archive")->required();
  c_cluster->add_option("--k", cl.k, "Number of clusters")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_cluster->add_option("--eigensolver", cl.solver, "auto, dense or krylov")
      ->capture_default_str();
  c_cluster->add_option("--prefix", cl.prefix, "Output file stem");

  ShuffleArgs sh;
  auto* c_shuffle = app.add_subcommand("shuffle-test", "Compare against shuffled networks");
  add_common(c_shuffle, sh.common, true);
  c_shuffle->add_option("network", sh.network, "Network archive")->required();
  c_shuffle->add_option("--k", sh.k)->check(CLI::PositiveNumber)->capture_default_str();
  c_shuffle->add_option("--n-shuffles", sh.n_shuffles)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_shuffle->add_option("--kind", sh.kind, "layer or nonzero")->capture_default_str();
  c_shuffle->add_option("--eigensolver", sh.solver)->capture_default_str();
  c_shuffle->add_option("--prefix", sh.prefix, "Output file stem");

  LesionArgs le;
  le.data_dir = default_data_dir();
  auto* c_lesion = app.add_subcommand("lesion", "Lesion sub-modules of a clustered network");
  add_common(c_lesion, le.common, true);
  c_lesion->add_option("network", le.network, "Network archive")->required();
  c_lesion->add_option("partition", le.partition, "Partition CSV from `cluster`")
      ->required();
  c_lesion->add_option("--data", le.data, "Evaluation dataset")->capture_default_str();
  c_lesion->add_option("--data-dir", le.data_dir)->capture_default_str();
  c_lesion->add_option("--examples", le.examples, "Use only the first N examples");
  c_lesion->add_option("--n-null", le.n_null, "Random lesions per sub-module")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_lesion->add_option("--pair-null", le.pair_null, "Random lesions per pair direction")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_lesion->add_flag("--pairs", le.pairs, "Also run the double-lesion study");
  c_lesion->add_option("--mode", le.mode, "weights or activation")->capture_default_str();
  c_lesion->add_option("--prefix", le.prefix, "Output file stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (c_init->parsed()) return cmd_init(init, out);
    if (c_train->parsed()) return cmd_train(tr, out);
    if (c_cluster->parsed()) return cmd_cluster(cl, out);
    if (c_shuffle->parsed()) return cmd_shuffle(sh, out);
    if (c_lesion->parsed()) return cmd_lesion(le, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace modgraph::cli
