// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "tgformer/metrics.hpp"
#include "tgformer/rng.hpp"
#include "tgformer/synthetic.hpp"
#include "tgformer/tcsr.hpp"
#include "tgformer/training.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int default_threads() {
  if (const char* env = std::getenv("TGFORMER_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return static_cast<int>(std::thread::hardware_concurrency());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
};

int cmd_convert(const std::string& input, const std::string& output, bool reverse, int threads,
                bool baseline) {
  std::cout << "convert input=" << input << " output=" << output << " reverse=" << reverse
            << " threads=" << threads << " baseline=" << baseline << "\n";
  const tgf::EventStream stream = tgf::load_csv(input);
  std::cout << "loaded events=" << stream.size() << " nodes=" << stream.num_nodes << "\n";

  auto t0 = Clock::now();
  const tgf::TCsr graph = tgf::build_parallel(stream, reverse, threads);
  const double parallel_s = seconds_since(t0);
  graph.validate();
  std::cout << "parallel_seconds=" << parallel_s << "\n";

  if (baseline) {
    t0 = Clock::now();
    const tgf::TCsr reference = tgf::build_sequential(stream, reverse);
    const double sequential_s = seconds_since(t0);
    if (graph.indptr != reference.indptr || graph.neighbor_ids != reference.neighbor_ids ||
        graph.edge_ids != reference.edge_ids || graph.timestamps != reference.timestamps) {
      throw tgf::ValidationError("parallel and sequential builders disagree");
    }
    std::cout << "sequential_seconds=" << sequential_s
              << " speedup=" << sequential_s / parallel_s << " builders_equal=yes\n";
  }
  tgf::save_tcsr(graph, output);
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_sample(const std::string& graph_path, tgf::NodeId node, double time, std::int64_t k,
               const std::string& strategy, std::uint64_t seed) {
  std::cout << "sample graph=" << graph_path << " node=" << node << " time=" << time
            << " k=" << k << " strategy=" << strategy << " seed=" << seed << "\n";
  const tgf::TCsr graph = tgf::load_tcsr(graph_path);
  const tgf::NeighborSample sample =
      tgf::parse_strategy(strategy) == tgf::SampleStrategy::recent
          ? tgf::sample_recent(graph, node, time, k)
          : tgf::sample_random(graph, node, time, k, seed);
  std::cout << "neighbor,edge,timestamp\n";
  for (const tgf::NeighborEntry& e : sample.neighbors) {
    std::cout << e.neighbor << "," << e.edge << "," << e.timestamp << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& checkpoint_path, const std::string& metrics_path,
              std::int64_t seed_override, bool reverse, int threads) {
  tgf::TrainConfig cfg = tgf::load_train_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  std::cout << "train data=" << data_path << " threads=" << threads << "\n"
            << "config " << cfg.to_string() << "\n";

  const tgf::EventStream stream = tgf::load_csv(data_path);
  const tgf::TCsr graph = tgf::build_parallel(stream, reverse, threads);
  const SplitFractions frac;
  const auto [train, val, test] = tgf::chronological_split(stream, frac.train, frac.val);
  std::cout << "events=" << stream.size() << " train=" << train.size() << " val=" << val.size()
            << " test=" << test.size() << " nodes=" << stream.num_nodes << "\n";

  tgf::ModelParams params =
      tgf::ModelParams::init(cfg.model_config(stream.num_nodes, stream.size()), cfg.seed);
  tgf::OptimizerState state = tgf::OptimizerState::init(params);

  std::ofstream metrics(metrics_path);
  if (!metrics) throw tgf::ValidationError("cannot write '" + metrics_path + "'");
  metrics << "epoch,train_loss,val_auc,seconds\n";
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = Clock::now();
    const double loss = tgf::train_epoch(params, state, train, graph, cfg, epoch);
    const double val_auc = tgf::evaluate(params, val, graph, cfg, cfg.seed + 1);
    const double secs = seconds_since(t0);
    metrics << epoch << "," << loss << "," << val_auc << "," << secs << "\n";
    metrics.flush();
    std::cout << "epoch=" << epoch << " train_loss=" << loss << " val_auc=" << val_auc
              << " seconds=" << secs << "\n";
  }
  tgf::save_checkpoint(params, checkpoint_path);
  std::cout << "wrote " << checkpoint_path << " and " << metrics_path << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& data_path,
             const std::string& checkpoint_path, std::int64_t seed_override, bool reverse,
             int threads) {
  tgf::TrainConfig cfg = tgf::load_train_config(config_path);
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  std::cout << "eval data=" << data_path << " checkpoint=" << checkpoint_path << "\n"
            << "config " << cfg.to_string() << "\n";

  const tgf::EventStream stream = tgf::load_csv(data_path);
  const tgf::ModelParams params = tgf::load_checkpoint(checkpoint_path);
  if (params.config.num_nodes != stream.num_nodes ||
      params.config.num_edges != stream.size()) {
    throw tgf::ValidationError("checkpoint was trained on a different graph");
  }
  const tgf::TCsr graph = tgf::build_parallel(stream, reverse, threads);
  const SplitFractions frac;
  const auto [train, val, test] = tgf::chronological_split(stream, frac.train, frac.val);
  const double auc = tgf::evaluate(params, test, graph, cfg, cfg.seed + 2);
  std::cout << "dataset,split,auc,n_pairs,seed\n"
            << data_path << ",test," << auc << "," << 2 * test.size() << "," << cfg.seed << "\n";
  return 0;
}

int cmd_bench(std::int64_t edges, std::int64_t nodes, std::vector<int> thread_list,
              int repeat, std::uint64_t seed, const std::string& output) {
  std::cout << "bench edges=" << edges << " nodes=" << nodes << " repeat=" << repeat
            << " seed=" << seed << "\n";
  const tgf::EventStream stream = tgf::make_random_stream(edges, nodes, seed);

  std::ofstream csv(output);
  if (!csv) throw tgf::ValidationError("cannot write '" + output + "'");
  csv << "kind,threads,batch,k,median_seconds\n";

  std::vector<double> times;
  double base_median = 0.0;
  for (const int threads : thread_list) {
    times.clear();
    for (int r = 0; r < repeat; ++r) {
      const auto t0 = Clock::now();
      tgf::TCsr g = tgf::build_parallel(stream, true, threads);
      times.push_back(seconds_since(t0));
    }
    const double med = median(times);
    if (threads == thread_list.front()) base_median = med;
    csv << "convert," << threads << ",,," << med << "\n";
    std::cout << "convert threads=" << threads << " median_seconds=" << med
              << " speedup_vs_first=" << base_median / med << "\n";
  }

  times.clear();
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = Clock::now();
    tgf::TCsr g = tgf::build_sequential(stream, true);
    times.push_back(seconds_since(t0));
  }
  const double seq_med = median(times);
  csv << "convert_sequential,1,,," << seq_med << "\n";
  std::cout << "convert_sequential median_seconds=" << seq_med << "\n";

  const tgf::TCsr graph = tgf::build_parallel(stream, true, thread_list.back());
  const double t_max = stream.events.empty() ? 1.0 : stream.events.back().timestamp + 1.0;
  for (const std::int64_t batch : {64, 128, 256, 512, 1024, 2048}) {
    for (const std::int64_t k : {10, 32, 64, 128}) {
      std::vector<tgf::NodeId> qnodes(batch);
      std::vector<tgf::Time> qtimes(batch);
      tgf::CounterRng rng(seed ^ 0xbe7c, static_cast<std::uint64_t>(batch * 1000 + k));
      for (std::int64_t i = 0; i < batch; ++i) {
        qnodes[i] = static_cast<tgf::NodeId>(rng.next_below(nodes));
        qtimes[i] = rng.next_uniform(0.0, t_max);
      }
      times.clear();
      for (int r = 0; r < repeat; ++r) {
        const auto t0 = Clock::now();
        const auto samples = tgf::sample_batch(graph, qnodes, qtimes, k,
                                               tgf::SampleStrategy::recent, seed,
                                               thread_list.back());
        times.push_back(seconds_since(t0));
      }
      csv << "sample," << thread_list.back() << "," << batch << "," << k << "," << median(times)
          << "\n";
    }
  }
  std::cout << "wrote " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal graph transformer toolkit"};
  app.require_subcommand(1);

  std::string input, output, graph_path, config_path, data_path, checkpoint_path;
  std::string metrics_path = "metrics.csv";
  std::string strategy = "recent";
  bool reverse = true;
  bool baseline = false;
  int threads = default_threads();
  std::int64_t node = 0, k = 10;
  double query_time = 0.0;
  std::uint64_t seed = 0;
  std::int64_t seed_override = -1;
  std::int64_t bench_edges = 1000000, bench_nodes = 100000;
  std::vector<int> thread_list{1, 2, 4, 8};
  int repeat = 3;

  CLI::App* convert = app.add_subcommand("convert", "build a temporal adjacency file from CSV");
  convert->add_option("--input", input, "edge list CSV")->required();
  convert->add_option("--output", output, "output graph file")->required();
  convert->add_flag("--reverse,!--no-reverse", reverse, "insert both edge directions");
  convert->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  convert->add_flag("--baseline", baseline, "also run the sequential builder and compare");

  CLI::App* sample = app.add_subcommand("sample", "query temporal neighbors");
  sample->add_option("--graph", graph_path, "graph file from convert")->required();
  sample->add_option("--node", node, "query node")->required();
  sample->add_option("--time", query_time, "query time")->required();
  sample->add_option("--k", k, "max neighbors")->check(CLI::PositiveNumber);
  sample->add_option("--strategy", strategy, "recent or random");
  sample->add_option("--seed", seed, "seed for random strategy");

  CLI::App* train = app.add_subcommand("train", "train a link-prediction model");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--data", data_path, "edge list CSV")->required();
  train->add_option("--checkpoint", checkpoint_path, "checkpoint output path")->required();
  train->add_option("--metrics", metrics_path, "per-epoch metrics CSV path");
  train->add_option("--seed", seed_override, "overrides the config seed");
  train->add_flag("--reverse,!--no-reverse", reverse, "insert both edge directions");
  train->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--config", config_path, "key=value config file")->required();
  eval->add_option("--data", data_path, "edge list CSV")->required();
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to load")->required();
  eval->add_option("--seed", seed_override, "overrides the config seed");
  eval->add_flag("--reverse,!--no-reverse", reverse, "insert both edge directions");
  eval->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  CLI::App* bench = app.add_subcommand("bench", "conversion and sampling benchmarks");
  bench->add_option("--edges", bench_edges, "events to generate")->check(CLI::PositiveNumber);
  bench->add_option("--nodes", bench_nodes, "nodes to generate")->check(CLI::PositiveNumber);
  bench->add_option("--threads", thread_list, "thread counts to sweep");
  bench->add_option("--repeat", repeat, "timing repetitions")->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "stream seed");
  bench->add_option("--output", output, "benchmark CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (convert->parsed()) return cmd_convert(input, output, reverse, threads, baseline);
    if (sample->parsed()) return cmd_sample(graph_path, node, query_time, k, strategy, seed);
    if (train->parsed()) {
      return cmd_train(config_path, data_path, checkpoint_path, metrics_path, seed_override,
                       reverse, threads);
    }
    if (eval->parsed()) {
      return cmd_eval(config_path, data_path, checkpoint_path, seed_override, reverse, threads);
    }
    if (bench->parsed()) {
      if (output.empty()) output = "bench.csv";
      return cmd_bench(bench_edges, bench_nodes, thread_list, repeat, seed, output);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
