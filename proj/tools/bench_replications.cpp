// Times the replication loop in its serial and parallel variants on the same
// configuration and verifies that both produce identical results.
#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "deconfound/harness.hpp"

namespace {

using deconfound::FamilyRun;

double seconds_for(const deconfound::ExperimentConfig& cfg, FamilyRun* out) {
  const auto start = std::chrono::steady_clock::now();
  *out = deconfound::run_family(cfg);
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(stop - start).count();
}

bool identical(const FamilyRun& a, const FamilyRun& b) {
  if (a.replications.size() != b.replications.size()) return false;
  for (std::size_t i = 0; i < a.replications.size(); ++i) {
    const deconfound::ReplicationResult& ra = a.replications[i];
    const deconfound::ReplicationResult& rb = b.replications[i];
    if (ra.failed != rb.failed || ra.params != rb.params) return false;
    if (ra.methods.size() != rb.methods.size()) return false;
    for (std::size_t j = 0; j < ra.methods.size(); ++j) {
      const deconfound::MethodResult& ma = ra.methods[j];
      const deconfound::MethodResult& mb = rb.methods[j];
      if (ma.mse != mb.mse || ma.accuracy != mb.accuracy) return false;
      if (ma.env_mse != mb.env_mse) return false;
      if (ma.stability_error != mb.stability_error) return false;
      if (ma.cov_xhat_y.size() != mb.cov_xhat_y.size()) return false;
      if ((ma.cov_xhat_y.array() != mb.cov_xhat_y.array()).any()) return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replication-loop benchmark: serial reference vs parallel"};
  std::string family = "A";
  int replications = 20;
  deconfound::Index n_train = 2000;
  deconfound::Index n_test = 2000;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--family", family, "Experiment family A..G");
  app.add_option("--replications", replications, "Replication count");
  app.add_option("--n-train", n_train, "Training rows");
  app.add_option("--n-test", n_test, "Test rows");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--threads", threads, "Parallel worker threads (0 = default)");
  CLI11_PARSE(app, argc, argv);

  try {
    deconfound::ExperimentConfig cfg;
    cfg.family = deconfound::family_from_string(family);
    cfg.replications = replications;
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    cfg.master_seed = seed;
    cfg.threads = threads;

    cfg.parallel = false;
    FamilyRun serial;
    const double serial_s = seconds_for(cfg, &serial);

    cfg.parallel = true;
    FamilyRun parallel;
    const double parallel_s = seconds_for(cfg, &parallel);

    const bool match = identical(serial, parallel);
    std::cout << "family " << family << ", " << replications
              << " replications, n_train " << n_train << ", n_test " << n_test
              << "\n"
              << "serial:   " << serial_s << " s\n"
              << "parallel: " << parallel_s << " s\n"
              << "speedup:  " << serial_s / parallel_s << "x\n"
              << "results identical: " << (match ? "yes" : "NO") << "\n";
    return match ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
