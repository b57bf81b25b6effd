#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgvae/cluster.hpp"
#include "mgvae/error.hpp"
#include "mgvae/eval.hpp"
#include "mgvae/graph.hpp"
#include "mgvae/model.hpp"
#include "mgvae/trainer.hpp"

namespace mgvae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config;
};

struct Dirs {
  fs::path checkpoints, graphs, reports;
};

Dirs make_dirs(const std::string& out) {
  Dirs d{fs::path(out) / "checkpoints", fs::path(out) / "graphs", fs::path(out) / "reports"};
  std::error_code ec;
  for (const auto& p : {d.checkpoints, d.graphs, d.reports}) {
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
  }
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed of the command's random stream")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--config", c.config, "File of key=value lines; command-line flags win");
}

// Fills options of `sub` that were not given on the command line from the
// key=value lines of `path`. Keys are long option names without dashes.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key[0] == '-') key.erase(0, 1);
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (!opt) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    try {
      opt->add_result(value);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

const std::map<std::string, Activation> kActivations{
    {"identity", Activation::kIdentity}, {"sigmoid", Activation::kSigmoid}, {"relu", Activation::kRelu}};
const std::map<std::string, PriorKind> kPriors{{"standard", PriorKind::kStandard},
                                               {"learnable", PriorKind::kLearnable}};
const std::map<std::string, MatchMode> kMatchers{{"free", MatchMode::kFree}, {"hungarian", MatchMode::kHungarian}};
const std::map<std::string, GenerateMode> kGenerateModes{{"threshold", GenerateMode::kThreshold},
                                                         {"corrective", GenerateMode::kCorrective}};

struct ModelOptions {
  ModelConfig config;
  std::size_t max_nodes = 0;
  CLI::Option* clusters = nullptr;
  CLI::Option* order = nullptr;
  CLI::Option* lambda = nullptr;

  void add(CLI::App* s) {
    ModelConfig& c = config;
    s->add_option("--levels", c.levels, "Number of resolution levels L")->capture_default_str();
    clusters = s->add_option("--clusters", c.clusters, "Clusters per level, level 1 first (K at level 1 is 1)")
                   ->delimiter(',');
    order = s->add_option("--order", c.order, "Message-passing order (1 or 2) per level, level 1 first")
                ->delimiter(',');
    s->add_option("--depth", c.depth, "Message-passing layers per local encoder")->capture_default_str();
    s->add_option("--hidden", c.hidden, "Hidden channels of the local encoders")->capture_default_str();
    s->add_option("--latent", c.latent_dim, "Latent channels d_z")->capture_default_str();
    s->add_option("--cluster-depth", c.cluster_depth, "Layers of the clustering networks")->capture_default_str();
    s->add_option("--cluster-hidden", c.cluster_hidden, "Hidden channels of the clustering networks")
        ->capture_default_str();
    lambda = s->add_option("--lambda", c.lambda, "Balanced-cut weight per level, level 1 first")->delimiter(',');
    s->add_option("--activation", c.activation, "identity|sigmoid|relu")
        ->transform(CLI::CheckedTransformer(kActivations, CLI::ignore_case));
    s->add_option("--prior", c.prior, "standard|learnable")
        ->transform(CLI::CheckedTransformer(kPriors, CLI::ignore_case));
    s->add_option("--match", c.match, "Prior matching for the learnable prior: free|hungarian")
        ->transform(CLI::CheckedTransformer(kMatchers, CLI::ignore_case));
    s->add_option("--prior-support", c.prior_support, "Prior support at level L (0: max nodes)");
    s->add_option("--max-nodes", max_nodes, "Decoder capacity (0: largest training graph)");
    s->add_flag("--global-decoder", c.global_decoder, "Fully connected decoder at level L");
    s->add_option("--global-hidden", c.global_hidden, "Hidden width of the global decoder")->capture_default_str();
    s->add_flag("--feature-recon", c.feature_recon, "Add the node-feature reconstruction term");
    s->add_option("--jitter", c.jitter, "Diagonal jitter of the KL factorizations")->capture_default_str();
  }

  // Per-level lists default to K^(ℓ) = 2^(ℓ-1), first order and λ = 1 when
  // only --levels was given.
  ModelConfig finish(std::size_t input_dim, std::size_t largest_graph) const {
    ModelConfig c = config;
    if (clusters->count() == 0 && c.clusters.size() != c.levels) {
      c.clusters.clear();
      for (std::size_t l = 0; l < c.levels; ++l) c.clusters.push_back(std::size_t{1} << l);
    }
    if (order->count() == 0 && c.order.size() != c.levels) c.order.assign(c.levels, 1);
    if (lambda->count() == 0 && c.lambda.size() != c.levels) c.lambda.assign(c.levels, 1.0);
    c.input_dim = input_dim;
    c.max_nodes = max_nodes ? max_nodes : largest_graph;
    c.validate();
    return c;
  }
};

bool is_graph_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".json" || ext == ".txt" || ext == ".edges" || ext == ".el";
}

std::vector<Graph> load_graphs(const std::string& where) {
  const fs::path p(where);
  if (!fs::exists(p)) throw UsageError("no such dataset path: " + where);
  std::vector<fs::path> files;
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && is_graph_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(p);
  }
  std::vector<Graph> out;
  for (const auto& f : files) out.push_back(load_graph(f));
  return out;
}

void write_graphs(const fs::path& dir, const std::vector<Graph>& graphs) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("graph_", 0) == 0 && e.path().extension() == ".json") fs::remove(e.path());
  }
  char name[32];
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::snprintf(name, sizeof name, "graph_%05zu.json", i);
    save_graph_json(dir / name, graphs[i], false);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads over contiguous ranges.
template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F f) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    threads.emplace_back([&, t] {
      try {
        for (std::size_t i = n * t / jobs; i < n * (t + 1) / jobs; ++i) f(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CommunityFlags {
  CommunityOptions options;
  void add(CLI::App* s) {
    s->add_option("--n-min", options.n_min, "Smallest synthetic graph")->capture_default_str();
    s->add_option("--n-max", options.n_max, "Largest synthetic graph")->capture_default_str();
    s->add_option("--p-in", options.p_in, "Edge probability within a community")->capture_default_str();
    s->add_option("--p-out", options.p_out, "Edge probability across communities")->capture_default_str();
  }
};

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string dataset;
  std::size_t graphs = 100;
  double train_frac = 0.8;
  CommunityFlags community;
  ModelOptions model;
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch = 1;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Rng root(a.common.seed);
  std::vector<Graph> train_set, test_set;
  const bool synthetic = a.dataset == "community";
  if (synthetic) {
    CommunityOptions co = a.community.options;
    co.count = a.graphs;
    auto all = synth_community(co, root.split(1).seed());
    if (!(a.train_frac > 0.0 && a.train_frac <= 1.0)) throw UsageError("--train-frac must lie in (0, 1]");
    const auto n_train = static_cast<std::size_t>(std::llround(a.train_frac * static_cast<double>(all.size())));
    train_set.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_set.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  } else {
    train_set = load_graphs(a.dataset);
  }
  if (train_set.empty()) throw UsageError("the training set is empty");
  std::size_t largest = 0;
  for (const auto& g : train_set) {
    if (g.feature_dim() != train_set.front().feature_dim()) throw FormatError("graphs disagree on feature width");
    largest = std::max(largest, g.num_nodes());
  }
  const ModelConfig config = a.model.finish(train_set.front().feature_dim(), largest);

  const Dirs dirs = make_dirs(a.common.out);
  if (synthetic) {
    write_graphs(dirs.graphs / "train", train_set);
    write_graphs(dirs.graphs / "test", test_set);
  }
  Model model(config, root.split(2).seed());
  TrainOptions opts;
  opts.lr = a.lr;
  opts.epochs = a.epochs;
  opts.batch = a.batch;
  opts.seed = root.split(3).seed();
  model.set_data_statistics(train_set);
  const auto trace = train(model, train_set, opts);

  const fs::path ckpt = dirs.checkpoints / "model.ckpt";
  save_model(ckpt, model);
  write_trace_csv(dirs.reports / "trace.csv", trace);
  json summary{{"graphs", train_set.size()},
               {"test_graphs", test_set.size()},
               {"epochs", a.epochs},
               {"checkpoint", fs::relative(ckpt, a.common.out).generic_string()}};
  if (!trace.empty()) {
    summary["initial_loss"] = trace.front().loss;
    summary["final_loss"] = trace.back().loss;
  }
  write_text(dirs.reports / "train.json", summary.dump(2) + "\n");
  out << "trained on " << train_set.size() << " graphs for " << a.epochs << " epochs";
  if (!trace.empty()) out << ": loss " << fmt(trace.front().loss) << " -> " << fmt(trace.back().loss);
  out << "\ncheckpoint " << ckpt.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  Common common;
  std::string checkpoint;
  std::size_t count = 64;
  std::size_t nodes = 0;
  GenerateMode mode = GenerateMode::kThreshold;
  double threshold = 0.5;
  std::size_t jobs = 1;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const fs::path ckpt =
      a.checkpoint.empty() ? fs::path(a.common.out) / "checkpoints" / "model.ckpt" : fs::path(a.checkpoint);
  const Model model = load_model(ckpt);
  const Dirs dirs = make_dirs(a.common.out);
  GenerateOptions opts;
  opts.nodes = a.nodes;
  opts.mode = a.mode;
  opts.threshold = a.threshold;
  opts.seed = Rng(a.common.seed).split(1).seed();
  std::vector<Graph> graphs(a.count);
  const std::size_t jobs = std::max<std::size_t>(1, std::min(a.jobs, a.count));
  parallel_for(jobs, jobs, [&](std::size_t t) {
    GenerateOptions o = opts;
    o.first = a.count * t / jobs;
    o.count = a.count * (t + 1) / jobs - o.first;
    auto part = generate(model, o);
    std::move(part.begin(), part.end(), graphs.begin() + static_cast<std::ptrdiff_t>(o.first));
  });
  write_graphs(dirs.graphs / "generated", graphs);
  double nodes = 0.0, edges = 0.0;
  for (const auto& g : graphs) {
    nodes += static_cast<double>(g.num_nodes());
    edges += static_cast<double>(g.num_edges());
  }
  const double n = graphs.empty() ? 1.0 : static_cast<double>(graphs.size());
  const json summary{{"count", graphs.size()}, {"mean_nodes", nodes / n}, {"mean_edges", edges / n}};
  write_text(dirs.reports / "generate.json", summary.dump(2) + "\n");
  out << "generated " << graphs.size() << " graphs into " << (dirs.graphs / "generated").string()
      << "\nmean nodes " << fmt(nodes / n) << ", mean edges " << fmt(edges / n) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string generated;
  std::string reference;
  double sigma = 1.0;
  std::vector<std::string> stats{"degree", "cluster", "orbit"};
  std::size_t jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const fs::path base(a.common.out);
  const auto gen = load_graphs(a.generated.empty() ? (base / "graphs" / "generated").string() : a.generated);
  const auto ref = load_graphs(a.reference.empty() ? (base / "graphs" / "test").string() : a.reference);
  if (gen.empty() || ref.empty()) throw UsageError("evaluate needs nonempty generated and reference sets");
  std::vector<StatKind> kinds;
  for (const auto& s : a.stats) {
    if (s == "degree") kinds.push_back(StatKind::kDegree);
    else if (s == "cluster") kinds.push_back(StatKind::kClustering);
    else if (s == "orbit") kinds.push_back(StatKind::kOrbit);
    else throw UsageError("unknown statistic '" + s + "'");
  }
  auto stats_of = [&](const std::vector<Graph>& gs) {
    std::vector<GraphStats> s(gs.size());
    parallel_for(gs.size(), a.jobs, [&](std::size_t i) { s[i] = graph_stats(gs[i]); });
    return s;
  };
  const auto sg = stats_of(gen);
  const auto sr = stats_of(ref);
  std::string csv = "stat,mmd\n";
  json values = json::object();
  for (StatKind k : kinds) {
    const double v = mmd(sg, sr, k, a.sigma);
    csv += std::string(stat_name(k)) + "," + fmt(v) + "\n";
    values[stat_name(k)] = v;
  }
  const Dirs dirs = make_dirs(a.common.out);
  write_text(dirs.reports / "mmd.csv", csv);
  const json summary{{"sigma", a.sigma}, {"generated", gen.size()}, {"reference", ref.size()}, {"mmd", values}};
  write_text(dirs.reports / "mmd.json", summary.dump(2) + "\n");
  out << csv;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct LinkpredArgs {
  Common common;
  std::string graph = "planted";
  std::size_t nodes = 60;
  double p_in = 0.9;
  double p_out = 0.02;
  std::size_t seeds = 5;
  double val = 0.05;
  double test = 0.10;
  std::size_t epochs = 500;
  double lr = 1e-2;
  ModelOptions model;
};

AucAp score_pairs(const Tensor& probs, const std::vector<NodePair>& pos, const std::vector<NodePair>& neg) {
  const std::size_t n = probs.size(0);
  std::vector<double> scores;
  std::vector<int> labels;
  for (auto [u, v] : pos) {
    scores.push_back(probs.data()[u * n + v]);
    labels.push_back(1);
  }
  for (auto [u, v] : neg) {
    scores.push_back(probs.data()[u * n + v]);
    labels.push_back(0);
  }
  return auc_ap(scores, labels);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

int cmd_linkpred(const LinkpredArgs& a, std::ostream& out) {
  if (a.seeds == 0) throw UsageError("--seeds must be positive");
  Rng root(a.common.seed);
  Graph g;
  if (a.graph == "planted") {
    CommunityOptions co;
    co.n_min = co.n_max = a.nodes;
    co.count = 1;
    co.p_in = a.p_in;
    co.p_out = a.p_out;
    g = synth_community(co, root.split(1).seed()).front();
  } else {
    const auto gs = load_graphs(a.graph);
    if (gs.size() != 1) throw UsageError("linkpred expects a single graph file");
    g = gs.front();
  }
  const std::size_t n = g.num_nodes();
  const ModelConfig config = a.model.finish(n, n);
  std::vector<double> val_auc, val_ap, test_auc, test_ap;
  std::string csv = "seed,val_auc,val_ap,test_auc,test_ap\n";
  for (std::size_t s = 0; s < a.seeds; ++s) {
    EdgeSplit split = mask_edges(g, a.val, a.test, root.split(2).split(s).seed());
    Graph tg = split.train_graph;
    tg.node_features = Tensor::eye(n);
    Model model(config, root.split(3).split(s).seed());
    TrainOptions opts;
    opts.lr = a.lr;
    opts.epochs = a.epochs;
    opts.seed = root.split(4).split(s).seed();
    train(model, {tg}, opts);
    NoGradGuard no_grad;
    EncodeOptions enc;
    enc.mode = EncodeMode::kEval;
    const Hierarchy h = encode_hierarchy(tg, model, enc);
    const Tensor probs = decode_local(h.at(config.levels).mu);
    const AucAp v = score_pairs(probs, split.val_pos, split.val_neg);
    const AucAp t = score_pairs(probs, split.test_pos, split.test_neg);
    val_auc.push_back(v.auc);
    val_ap.push_back(v.ap);
    test_auc.push_back(t.auc);
    test_ap.push_back(t.ap);
    csv += std::to_string(s) + "," + fmt(v.auc) + "," + fmt(v.ap) + "," + fmt(t.auc) + "," + fmt(t.ap) + "\n";
  }
  const auto [mva, sva] = mean_std(val_auc);
  const auto [mvp, svp] = mean_std(val_ap);
  const auto [mta, sta] = mean_std(test_auc);
  const auto [mtp, stp] = mean_std(test_ap);
  csv += "mean," + fmt(mva) + "," + fmt(mvp) + "," + fmt(mta) + "," + fmt(mtp) + "\n";
  csv += "std," + fmt(sva) + "," + fmt(svp) + "," + fmt(sta) + "," + fmt(stp) + "\n";
  const Dirs dirs = make_dirs(a.common.out);
  write_text(dirs.reports / "linkpred.csv", csv);
  const json summary{{"nodes", n},
                     {"edges", g.num_edges()},
                     {"seeds", a.seeds},
                     {"test_auc", {{"mean", mta}, {"std", sta}}},
                     {"test_ap", {{"mean", mtp}, {"std", stp}}},
                     {"val_auc", {{"mean", mva}, {"std", sva}}},
                     {"val_ap", {{"mean", mvp}, {"std", svp}}}};
  write_text(dirs.reports / "linkpred.json", summary.dump(2) + "\n");
  out << csv << "test AUC " << fmt(mta) << " +- " << fmt(sta) << ", AP " << fmt(mtp) << " +- " << fmt(stp)
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
  Common common;
  std::string graph = "community";
  std::size_t graphs = 20;
  CommunityFlags community;
  std::size_t k = 2;
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t depth = 2;
  std::size_t hidden = 16;
  Activation activation = Activation::kSigmoid;
  std::size_t spectral_dims = 10;
};

int cmd_cluster(const ClusterArgs& a, std::ostream& out) {
  Rng root(a.common.seed);
  std::vector<Graph> graphs;
  if (a.graph == "community") {
    CommunityOptions co = a.community.options;
    co.count = a.graphs;
    graphs = synth_community(co, root.split(1).seed());
  } else {
    graphs = load_graphs(a.graph);
  }
  if (graphs.empty()) throw UsageError("no graphs to cluster");
  if (a.k == 0) throw UsageError("--k must be positive");
  for (const auto& g : graphs) {
    if (a.k > g.num_nodes()) {
      throw UsageError("K = " + std::to_string(a.k) + " exceeds the " + std::to_string(g.num_nodes()) +
                       " nodes of a graph");
    }
  }
  ClusterNet net(graphs.front().feature_dim(), a.k, a.depth, a.hidden, root.split(2).seed(), a.activation);
  ClusterTrainOptions opts;
  opts.lr = a.lr;
  opts.epochs = a.epochs;
  opts.seed = root.split(3).seed();
  train_clustering(net, graphs, opts);

  const std::vector<std::string> methods{"learn", "spectral", "kmeans"};
  std::vector<std::array<double, 4>> totals(methods.size(), {0.0, 0.0, 0.0, 0.0});
  std::string per_graph = "graph,method,n,K,min,max,std,kl\n";
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Graph& g = graphs[i];
    const std::vector<ClusterAssignment> parts{
        net.assign(g), spectral_baseline(g, a.k, root.split(4).split(i).seed(), a.spectral_dims),
        kmeans_baseline(g.node_features, a.k, root.split(5).split(i).seed())};
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const BalanceStats st = cluster_stats(parts[m]);
      totals[m][0] += static_cast<double>(st.min);
      totals[m][1] += static_cast<double>(st.max);
      totals[m][2] += st.std;
      totals[m][3] += st.kl;
      per_graph += std::to_string(i) + "," + methods[m] + "," + std::to_string(g.num_nodes()) + "," +
                   std::to_string(a.k) + "," + std::to_string(st.min) + "," + std::to_string(st.max) + "," +
                   fmt(st.std) + "," + fmt(st.kl) + "\n";
    }
  }
  std::string csv = "method,K,min,max,std,kl\n";
  json summary{{"graphs", graphs.size()}, {"K", a.k}};
  const double count = static_cast<double>(graphs.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& t = totals[m];
    csv += methods[m] + "," + std::to_string(a.k) + "," + fmt(t[0] / count) + "," + fmt(t[1] / count) + "," +
           fmt(t[2] / count) + "," + fmt(t[3] / count) + "\n";
    summary[methods[m]] = {{"min", t[0] / count}, {"max", t[1] / count}, {"std", t[2] / count}, {"kl", t[3] / count}};
  }
  const Dirs dirs = make_dirs(a.common.out);
  write_text(dirs.reports / "cluster.csv", csv);
  write_text(dirs.reports / "cluster_graphs.csv", per_graph);
  write_text(dirs.reports / "cluster.json", summary.dump(2) + "\n");
  out << csv;
  return kExitOk;
}

// ---------------------------------------------------------------------------

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiresolution graph networks and variational autoencoders", "mgvae"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train an MGVAE and write a checkpoint and loss trace");
  add_common(train_cmd, train_args.common);
  train_cmd->add_option("--dataset", train_args.dataset, "'community' or a graph file / directory of graphs")
      ->required();
  train_cmd->add_option("--graphs", train_args.graphs, "Synthetic graphs to draw")->capture_default_str();
  train_cmd->add_option("--train-frac", train_args.train_frac, "Training share of a synthetic dataset")
      ->capture_default_str();
  train_args.community.add(train_cmd);
  train_args.model.add(train_cmd);
  train_cmd->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", train_args.batch, "Graphs per optimizer step")->capture_default_str();

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Sample graphs from a trained model");
  add_common(gen_cmd, gen_args.common);
  gen_cmd->add_option("--checkpoint", gen_args.checkpoint, "Checkpoint (default <out>/checkpoints/model.ckpt)");
  gen_cmd->add_option("--count", gen_args.count, "Graphs to generate")->capture_default_str();
  gen_cmd->add_option("--nodes", gen_args.nodes, "Node count (0: drawn from the training graphs)");
  gen_cmd->add_option("--mode", gen_args.mode, "threshold|corrective")
      ->transform(CLI::CheckedTransformer(kGenerateModes, CLI::ignore_case));
  gen_cmd->add_option("--threshold", gen_args.threshold, "Edge probability threshold")->capture_default_str();
  gen_cmd->add_option("--jobs", gen_args.jobs, "Worker threads")->capture_default_str();

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "MMD between generated and reference graph sets");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--generated", eval_args.generated, "Generated graphs (default <out>/graphs/generated)");
  eval_cmd->add_option("--reference", eval_args.reference, "Reference graphs (default <out>/graphs/test)");
  eval_cmd->add_option("--sigma", eval_args.sigma, "Gaussian kernel width")->capture_default_str();
  eval_cmd->add_option("--stats", eval_args.stats, "Statistics: degree,cluster,orbit")->delimiter(',');
  eval_cmd->add_option("--jobs", eval_args.jobs, "Worker threads")->capture_default_str();

  LinkpredArgs lp_args;
  lp_args.model.config.clusters = {1, 1};
  lp_args.model.config.hidden = 32;
  lp_args.model.config.latent_dim = 16;
  auto* lp_cmd = app.add_subcommand("linkpred", "Edge-masking link prediction with AUC and AP");
  add_common(lp_cmd, lp_args.common);
  lp_cmd->add_option("--graph", lp_args.graph, "'planted' or a graph file")->capture_default_str();
  lp_cmd->add_option("--nodes", lp_args.nodes, "Nodes of the planted graph")->capture_default_str();
  lp_cmd->add_option("--p-in", lp_args.p_in, "Planted within-community edge probability")->capture_default_str();
  lp_cmd->add_option("--p-out", lp_args.p_out, "Planted cross-community edge probability")
      ->capture_default_str();
  lp_cmd->add_option("--seeds", lp_args.seeds, "Independent masking and training runs")->capture_default_str();
  lp_cmd->add_option("--val", lp_args.val, "Validation share of the edges")->capture_default_str();
  lp_cmd->add_option("--test", lp_args.test, "Test share of the edges")->capture_default_str();
  lp_cmd->add_option("--epochs", lp_args.epochs, "Training epochs")->capture_default_str();
  lp_cmd->add_option("--lr", lp_args.lr, "Adam learning rate")->capture_default_str();
  lp_args.model.add(lp_cmd);

  ClusterArgs cl_args;
  auto* cl_cmd = app.add_subcommand("cluster", "Balance of learned, spectral and k-means clusterings");
  add_common(cl_cmd, cl_args.common);
  cl_cmd->add_option("--graph", cl_args.graph, "'community' or a graph file / directory")->capture_default_str();
  cl_cmd->add_option("--graphs", cl_args.graphs, "Synthetic graphs to draw")->capture_default_str();
  cl_args.community.add(cl_cmd);
  cl_cmd->add_option("--k", cl_args.k, "Clusters")->capture_default_str();
  cl_cmd->add_option("--epochs", cl_args.epochs, "Training epochs of the clustering network")
      ->capture_default_str();
  cl_cmd->add_option("--lr", cl_args.lr, "Adam learning rate")->capture_default_str();
  cl_cmd->add_option("--depth", cl_args.depth, "Layers of the clustering network")->capture_default_str();
  cl_cmd->add_option("--hidden", cl_args.hidden, "Hidden channels of the clustering network")
      ->capture_default_str();
  cl_cmd->add_option("--activation", cl_args.activation, "identity|sigmoid|relu")
      ->transform(CLI::CheckedTransformer(kActivations, CLI::ignore_case));
  cl_cmd->add_option("--spectral-dims", cl_args.spectral_dims, "Eigenvectors of the spectral embedding")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (train_cmd->parsed()) {
    apply_config(train_cmd, train_args.common.config);
    return cmd_train(train_args, out);
  }
  if (gen_cmd->parsed()) {
    apply_config(gen_cmd, gen_args.common.config);
    return cmd_generate(gen_args, out);
  }
  if (eval_cmd->parsed()) {
    apply_config(eval_cmd, eval_args.common.config);
    return cmd_evaluate(eval_args, out);
  }
  if (lp_cmd->parsed()) {
    apply_config(lp_cmd, lp_args.common.config);
    return cmd_linkpred(lp_args, out);
  }
  apply_config(cl_cmd, cl_args.common.config);
  return cmd_cluster(cl_args, out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"mgvae"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace mgvae::cli
