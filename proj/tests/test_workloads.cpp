#include <doctest.h>

#include "dpaps/workloads.hpp"

using namespace dpaps;

TEST_CASE("single-worker factorization matches the serial replica exactly") {
  MfOptions opt;
  opt.rows = 24;
  opt.cols = 24;
  opt.rank = 3;
  opt.epochs = 6;
  opt.seed = 13;
  SimExecutor ex(1, 1, 5);
  auto res = run_dsgd_mf(ex, opt);
  double oracle = mf_oracle_rmse(opt, 1);
  CHECK(res.rmse == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(res.rmse - oracle) <= 1e-9);
  CHECK(res.epochs_run == 6);
  CHECK(res.epoch_nonlocal_reads == 0);
}

TEST_CASE("blocked parallel factorization converges with node-local reads") {
  MfOptions opt;
  opt.rows = 48;
  opt.cols = 48;
  opt.rank = 3;
  opt.epochs = 30;
  opt.seed = 3;
  opt.target_rmse = 0.05;
  SimExecutor ex(2, 2, 5);
  auto res = run_dsgd_mf(ex, opt);
  CHECK(res.rmse < 0.05);
  CHECK(res.epochs_run <= 30);
  CHECK(res.epoch_nonlocal_reads == 0);
}

TEST_CASE("parallel and serial runs agree for any worker grid") {
  MfOptions opt;
  opt.rows = 16;
  opt.cols = 16;
  opt.rank = 2;
  opt.epochs = 3;
  opt.seed = 21;
  SimExecutor ex(2, 2, 9);
  auto res = run_dsgd_mf(ex, opt);
  double oracle = mf_oracle_rmse(opt, 4);
  CHECK(std::abs(res.rmse - oracle) <= 1e-9);
}

TEST_CASE("fully skewed clustering reads are entirely local") {
  ClusteringOptions opt;
  opt.key_count = 512;
  opt.skew = 1.0;
  opt.reads_per_worker = 300;
  SimExecutor ex(4, 2, 7);
  auto res = run_data_clustering(ex, opt);
  CHECK(res.local_fraction == 1.0);
}

TEST_CASE("unskewed clustering reads hit roughly one node in N") {
  ClusteringOptions opt;
  opt.key_count = 4096;
  opt.skew = 0.0;
  opt.reads_per_worker = 4000;
  SimExecutor ex(4, 2, 7);
  auto res = run_data_clustering(ex, opt);
  CHECK(res.local_fraction > 0.20);
  CHECK(res.local_fraction < 0.30);
}

TEST_CASE("clustering stats report carries one row per node") {
  ClusteringOptions opt;
  opt.key_count = 256;
  opt.reads_per_worker = 100;
  SimExecutor ex(4, 1, 2);
  auto res = run_data_clustering(ex, opt);
  REQUIRE(res.report.rows.size() == 4);
  for (std::uint32_t n = 0; n < 4; ++n) {
    CHECK(res.report.rows[n].node == n);
    CHECK(res.report.rows[n].reads_total == 100);
    CHECK(res.report.rows[n].reads_local + res.report.rows[n].reads_nonlocal == 100);
    CHECK(res.report.rows[n].relocations > 0);
  }
  auto csv = res.report.to_csv();
  CHECK(csv.find("node,reads_total,reads_local,reads_nonlocal,relocations,"
                 "mean_rt_ms,mean_block_ms,metric") == 0);
  auto json = res.report.to_json();
  CHECK(json.find("\"reads_total\"") != std::string::npos);
}

TEST_CASE("prefetching the next point removes blocked waits and remote reads") {
  LatencyOptions opt;
  opt.points_per_worker = 40;
  opt.keys_per_point = 3;
  LatencyResult with, without;
  {
    SimExecutor ex(4, 2, 17);
    opt.lookahead = 1;
    with = run_latency_hiding(ex, opt);
  }
  {
    SimExecutor ex(4, 2, 17);
    opt.lookahead = 0;
    without = run_latency_hiding(ex, opt);
  }
  CHECK(with.nonlocal_reads_from_point2 == 0);
  CHECK(without.nonlocal_reads_from_point2 == 0);
  CHECK(with.blocked_waits < without.blocked_waits);
}
