#include "dpaps/workloads.hpp"

#include <atomic>
#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dpaps {

// --- stats -----------------------------------------------------------------

StatsRow stats_row(Node& node, double metric) {
  StatsRow r;
  r.node = node.id();
  r.reads_total = node.stats().reads_total.load();
  r.reads_local = node.stats().reads_local.load();
  r.reads_nonlocal = node.stats().reads_nonlocal.load();
  r.relocations = node.stats().relocations.load();
  r.mean_rt_ms = node.stats().mean_rt();
  r.mean_block_ms = node.stats().mean_block();
  r.metric = metric;
  return r;
}

std::string StatsReport::to_csv() const {
  std::ostringstream out;
  out << "node,reads_total,reads_local,reads_nonlocal,relocations,"
         "mean_rt_ms,mean_block_ms,metric\n";
  for (const auto& r : rows) {
    out << r.node << ',' << r.reads_total << ',' << r.reads_local << ','
        << r.reads_nonlocal << ',' << r.relocations << ',' << r.mean_rt_ms << ','
        << r.mean_block_ms << ',' << r.metric << '\n';
  }
  return out.str();
}

std::string StatsReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"node", r.node},
                   {"reads_total", r.reads_total},
                   {"reads_local", r.reads_local},
                   {"reads_nonlocal", r.reads_nonlocal},
                   {"relocations", r.relocations},
                   {"mean_rt_ms", r.mean_rt_ms},
                   {"mean_block_ms", r.mean_block_ms},
                   {"metric", r.metric}});
  }
  return arr.dump(2);
}

double StatsReport::local_read_fraction() const {
  std::uint64_t total = 0, local = 0;
  for (const auto& r : rows) {
    total += r.reads_total;
    local += r.reads_local;
  }
  return total ? double(local) / double(total) : 0.0;
}

// --- executors ---------------------------------------------------------------

void SimExecutor::execute(const ExecSpec& spec, std::function<void(Client&)> program) {
  SimCluster::Options o;
  o.nodes = nodes_;
  o.workers = workers_;
  o.key_count = spec.key_count;
  o.value_len = spec.value_len;
  o.latches = latches_;
  o.caches = caches_;
  o.cache_capacity = cache_capacity_;
  o.seed = seed_;
  o.init = spec.init;
  o.record_history = record_history_;
  cluster_ = std::make_unique<SimCluster>(o);
  for (std::uint32_t n = 0; n < nodes_; ++n)
    for (std::uint32_t w = 0; w < workers_; ++w)
      cluster_->add_worker(WorkerId{n, std::uint16_t(w)}, program);
  cluster_->run();
}

std::vector<Node*> SimExecutor::local_nodes() {
  std::vector<Node*> out;
  for (std::uint32_t n = 0; n < nodes_; ++n) out.push_back(&cluster_->node(n));
  return out;
}

void TcpExecutor::execute(const ExecSpec& spec, std::function<void(Client&)> program) {
  opt_.key_count = spec.key_count;
  opt_.value_len = spec.value_len;
  opt_.init = spec.init;
  runtime_.reset();  // release the listen port before rebinding
  runtime_ = std::make_unique<TcpRuntime>(opt_);
  std::vector<std::function<void(Client&)>> programs(opt_.workers, program);
  runtime_->run(std::move(programs));
}

std::vector<Node*> TcpExecutor::local_nodes() { return {&runtime_->node()}; }

// --- matrix factorization ----------------------------------------------------

namespace {

// One rating's SGD deltas; also the oracle's inner loop, so the parallel run
// and the replica perform identical floating-point operations.
void sgd_deltas(double r, const double* u, const double* v, std::uint32_t rank,
                double eta, double* du, double* dv) {
  double e = r;
  for (std::uint32_t k = 0; k < rank; ++k) e -= u[k] * v[k];
  for (std::uint32_t k = 0; k < rank; ++k) du[k] = eta * e * v[k];
  for (std::uint32_t k = 0; k < rank; ++k) dv[k] = eta * e * u[k];
}

double mf_rmse(const std::vector<double>& truth, const double* U, const double* V,
               std::uint64_t rows, std::uint64_t cols, std::uint32_t rank) {
  double sum = 0.0;
  for (std::uint64_t i = 0; i < rows; ++i) {
    for (std::uint64_t j = 0; j < cols; ++j) {
      double e = truth[i * cols + j];
      for (std::uint32_t k = 0; k < rank; ++k) e -= U[i * rank + k] * V[j * rank + k];
      sum += e * e;
    }
  }
  return std::sqrt(sum / double(rows * cols));
}

struct MfShared {
  std::vector<std::uint64_t> snap;
  std::atomic<std::uint64_t> nonlocal{0};
  std::atomic<bool> stop{false};
  double rmse = 0.0;
  std::uint32_t epochs_run = 0;
};

}  // namespace

std::vector<double> mf_ground_truth(const MfOptions& opt) {
  std::mt19937_64 gen(opt.seed);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(opt.rank)));
  std::vector<double> U(opt.rows * opt.rank), V(opt.cols * opt.rank);
  for (auto& x : U) x = dist(gen);
  for (auto& x : V) x = dist(gen);
  std::vector<double> R(opt.rows * opt.cols);
  for (std::uint64_t i = 0; i < opt.rows; ++i)
    for (std::uint64_t j = 0; j < opt.cols; ++j) {
      double s = 0.0;
      for (std::uint32_t k = 0; k < opt.rank; ++k)
        s += U[i * opt.rank + k] * V[j * opt.rank + k];
      R[i * opt.cols + j] = s;
    }
  return R;
}

Value mf_init_value(const MfOptions& opt, Key key) {
  std::mt19937_64 gen(opt.seed * 0x9E3779B97F4A7C15ull + key + 1);
  std::uniform_real_distribution<double> dist(-opt.init_scale, opt.init_scale);
  Value v(opt.rank);
  for (auto& x : v) x = dist(gen);
  return v;
}

MfResult run_dsgd_mf(Executor& ex, const MfOptions& opt) {
  const std::uint32_t N = ex.nodes(), W = ex.workers_per_node();
  const std::uint32_t G = N * W;  // workers == column blocks
  const std::uint64_t R = opt.rows, C = opt.cols;
  if (R < G || C < G) throw ConfigError("matrix smaller than the worker grid");

  auto truth = std::make_shared<std::vector<double>>(mf_ground_truth(opt));
  auto shared = std::make_shared<MfShared>();
  shared->snap.assign(N, 0);

  ExecSpec spec;
  spec.key_count = R + C;
  spec.value_len = opt.rank;
  spec.init = [opt](Key k) { return mf_init_value(opt, k); };

  auto program = [=, &ex](Client& client) {
    const std::uint32_t g = client.worker().node * W + client.worker().local;
    const std::uint64_t r0 = g * R / G, r1 = (g + 1) * R / G;
    const std::uint32_t rank = opt.rank;

    std::vector<Key> row_keys;
    for (std::uint64_t i = r0; i < r1; ++i) row_keys.push_back(i);
    client.localize(row_keys);
    client.barrier();

    Node& node = client.node();
    const bool reporter = client.worker().local == 0;
    const bool evaluator = client.worker().node == 0 && client.worker().local == 0;
    std::vector<double> du(rank), dv(rank);

    for (std::uint32_t epoch = 0; epoch < opt.epochs; ++epoch) {
      for (std::uint32_t s = 0; s < G; ++s) {
        const std::uint32_t b = (g + s) % G;
        const std::uint64_t c0 = b * C / G, c1 = (b + 1) * C / G;
        std::vector<Key> col_keys;
        for (std::uint64_t j = c0; j < c1; ++j) col_keys.push_back(R + j);
        client.localize(col_keys);
        client.barrier();
        if (reporter) shared->snap[node.id()] = node.stats().reads_nonlocal.load();

        for (std::uint64_t i = r0; i < r1; ++i) {
          for (std::uint64_t j = c0; j < c1; ++j) {
            auto vals = client.pull({i, R + j});
            sgd_deltas((*truth)[i * C + j], vals[0].data(), vals[1].data(), rank,
                       opt.eta, du.data(), dv.data());
            client.push({i, R + j}, {Value(du), Value(dv)});
          }
        }
        client.barrier();
        if (reporter)
          shared->nonlocal += node.stats().reads_nonlocal.load() - shared->snap[node.id()];
      }

      const bool last = epoch + 1 == opt.epochs;
      if (opt.eval_each_epoch || last) {
        if (evaluator) {
          std::vector<Key> all;
          for (Key k = 0; k < R + C; ++k) all.push_back(k);
          auto vals = client.pull(all);
          std::vector<double> U(R * rank), V(C * rank);
          for (std::uint64_t i = 0; i < R; ++i)
            std::copy(vals[i].begin(), vals[i].end(), U.begin() + i * rank);
          for (std::uint64_t j = 0; j < C; ++j)
            std::copy(vals[R + j].begin(), vals[R + j].end(), V.begin() + j * rank);
          shared->rmse = mf_rmse(*truth, U.data(), V.data(), R, C, rank);
          shared->epochs_run = epoch + 1;
          if (opt.target_rmse > 0 && shared->rmse < opt.target_rmse) shared->stop = true;
        }
        client.barrier();
        if (opt.eval_each_epoch && shared->stop.load()) break;
      }
    }
  };

  ex.execute(spec, program);

  MfResult res;
  res.rmse = shared->rmse;
  res.epochs_run = shared->epochs_run;
  res.epoch_nonlocal_reads = shared->nonlocal.load();
  for (Node* n : ex.local_nodes()) res.report.rows.push_back(stats_row(*n, res.rmse));
  return res;
}

double mf_oracle_rmse(const MfOptions& opt, std::uint32_t total_workers,
                      std::uint32_t* epochs_run) {
  const std::uint32_t G = total_workers, rank = opt.rank;
  const std::uint64_t R = opt.rows, C = opt.cols;
  auto truth = mf_ground_truth(opt);

  std::vector<double> U(R * rank), V(C * rank);
  for (std::uint64_t i = 0; i < R; ++i) {
    Value v = mf_init_value(opt, i);
    std::copy(v.begin(), v.end(), U.begin() + i * rank);
  }
  for (std::uint64_t j = 0; j < C; ++j) {
    Value v = mf_init_value(opt, R + j);
    std::copy(v.begin(), v.end(), V.begin() + j * rank);
  }

  std::vector<double> du(rank), dv(rank);
  double rmse = 0.0;
  std::uint32_t epoch = 0;
  for (; epoch < opt.epochs; ++epoch) {
    for (std::uint32_t s = 0; s < G; ++s) {
      for (std::uint32_t g = 0; g < G; ++g) {
        const std::uint64_t r0 = g * R / G, r1 = (g + 1) * R / G;
        const std::uint32_t b = (g + s) % G;
        const std::uint64_t c0 = b * C / G, c1 = (b + 1) * C / G;
        for (std::uint64_t i = r0; i < r1; ++i) {
          for (std::uint64_t j = c0; j < c1; ++j) {
            sgd_deltas(truth[i * C + j], &U[i * rank], &V[j * rank], rank, opt.eta,
                       du.data(), dv.data());
            for (std::uint32_t k = 0; k < rank; ++k) U[i * rank + k] += du[k];
            for (std::uint32_t k = 0; k < rank; ++k) V[j * rank + k] += dv[k];
          }
        }
      }
    }
    rmse = mf_rmse(truth, U.data(), V.data(), R, C, rank);
    if (opt.target_rmse > 0 && rmse < opt.target_rmse) {
      ++epoch;
      break;
    }
  }
  if (epochs_run) *epochs_run = epoch;
  return rmse;
}

// --- data clustering -----------------------------------------------------------

ClusteringResult run_data_clustering(Executor& ex, const ClusteringOptions& opt) {
  const std::uint32_t N = ex.nodes(), W = ex.workers_per_node();
  const std::uint64_t K = opt.key_count;
  const std::uint64_t chunk = (K + N - 1) / N;

  ExecSpec spec;
  spec.key_count = K;
  spec.value_len = opt.value_len;

  auto program = [=](Client& client) {
    const std::uint32_t n = client.worker().node, w = client.worker().local;
    const std::uint32_t pref = (n + 1) % N;
    const std::uint64_t p0 = pref * chunk;
    const std::uint64_t p1 = std::min<std::uint64_t>(p0 + chunk, K);
    if (p0 >= p1) throw ConfigError("key_count leaves some node with no home range");

    // split the preferred cluster among this node's workers and localize it
    const std::uint64_t span = p1 - p0;
    std::vector<Key> mine;
    for (std::uint64_t k = p0 + w * span / W; k < p0 + (w + 1) * span / W; ++k)
      mine.push_back(k);
    if (!mine.empty()) client.localize(mine);
    client.barrier();

    std::mt19937_64 gen(opt.seed * 0x9E3779B97F4A7C15ull + (std::uint64_t(n) << 16) + w);
    std::bernoulli_distribution hit(opt.skew);
    std::uniform_int_distribution<std::uint64_t> in_cluster(p0, p1 - 1);
    std::uniform_int_distribution<std::uint64_t> anywhere(0, K - 1);
    for (std::uint64_t r = 0; r < opt.reads_per_worker; ++r)
      client.pull({hit(gen) ? in_cluster(gen) : anywhere(gen)});
    client.barrier();
  };

  ex.execute(spec, program);

  ClusteringResult res;
  for (Node* nd : ex.local_nodes()) res.report.rows.push_back(stats_row(*nd, 0.0));
  res.local_fraction = res.report.local_read_fraction();
  for (auto& row : res.report.rows)
    row.metric = row.reads_total ? double(row.reads_local) / double(row.reads_total) : 0.0;
  return res;
}

// --- latency hiding --------------------------------------------------------------

LatencyResult run_latency_hiding(Executor& ex, const LatencyOptions& opt) {
  const std::uint32_t N = ex.nodes(), W = ex.workers_per_node();
  const std::uint32_t G = N * W;
  const std::uint64_t P = opt.points_per_worker, kpp = opt.keys_per_point;

  auto shared = std::make_shared<MfShared>();  // snap + nonlocal reused
  shared->snap.assign(N, 0);
  auto blocked = std::make_shared<std::atomic<std::uint64_t>>(0);

  ExecSpec spec;
  spec.key_count = std::uint64_t(G) * P * kpp;
  spec.value_len = opt.value_len;

  auto program = [=](Client& client) {
    const std::uint32_t g = client.worker().node * W + client.worker().local;
    Node& node = client.node();
    const bool reporter = client.worker().local == 0;

    // Each worker walks the stream homed one node over, so every point starts
    // remote and the prefetch has something to hide.
    const std::uint32_t stream = (g + W) % G;
    auto point_keys = [&](std::uint64_t p) {
      std::vector<Key> keys;
      const std::uint64_t base = (std::uint64_t(stream) * P + p) * kpp;
      for (std::uint64_t k = 0; k < kpp; ++k) keys.push_back(base + k);
      return keys;
    };
    auto process = [&](std::uint64_t p) {
      auto keys = point_keys(p);
      auto vals = client.pull(keys);
      std::vector<Value> updates;
      for (auto& v : vals) {
        for (auto& x : v) x = x * 0.5 + 1.0;
        updates.push_back(std::move(v));
      }
      client.push(keys, std::move(updates));
    };
    auto wait_counted = [&](const OpHandle& h) {
      if (Client::is_pending(h)) ++*blocked;
      client.wait(h);
    };

    OpHandle next;
    if (opt.lookahead > 0) wait_counted(client.localize_async(point_keys(0)));
    for (std::uint64_t p = 0; p < P; ++p) {
      if (p == 2) {
        client.barrier();
        if (reporter) shared->snap[node.id()] = node.stats().reads_nonlocal.load();
        client.barrier();
      }
      if (opt.lookahead > 0) {
        if (p + 1 < P) next = client.localize_async(point_keys(p + 1));
      } else {
        wait_counted(client.localize_async(point_keys(p)));
      }
      process(p);
      if (next) {
        wait_counted(next);
        next.reset();
      }
    }
    client.barrier();
    if (reporter)
      shared->nonlocal += node.stats().reads_nonlocal.load() - shared->snap[node.id()];
    client.barrier();
  };

  ex.execute(spec, program);

  LatencyResult res;
  res.blocked_waits = blocked->load();
  res.nonlocal_reads_from_point2 = shared->nonlocal.load();
  for (Node* nd : ex.local_nodes())
    res.report.rows.push_back(stats_row(*nd, double(res.blocked_waits)));
  return res;
}

}  // namespace dpaps
