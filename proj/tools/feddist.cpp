// Command-line front end: single runs, axis sweeps and the verification
// checks, with JSON-lines metrics output.
//
//   feddist run   --config cfg.txt --out metrics.jsonl
//   feddist sweep --config cfg.txt --axis alpha --values 0,0.1,0.45 --out dir
//   feddist check --names all --out checks.jsonl
//
// Exit codes: 0 success, 1 failed check, 2 config error, 3 runtime failure.
// BDS_THREADS caps how many sweep runs execute in parallel.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "feddist/checks.hpp"
#include "feddist/config.hpp"
#include "feddist/defences.hpp"
#include "feddist/federation.hpp"
#include "feddist/metrics.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::size_t thread_budget(std::size_t jobs) {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BDS_THREADS")) {
    char* end = nullptr;
    const unsigned long parsed = std::strtoul(env, &end, 10);
    if (end != env && parsed > 0) cap = parsed;
  }
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

std::string value_token(double v) {
  std::ostringstream out;
  out << v;
  std::string s = out.str();
  for (char& c : s) {
    if (c == '.') c = 'p';
  }
  return s;
}

int cmd_run(const std::string& config_path, const std::string& out_path) {
  feddist::ExperimentConfig config;
  try {
    config = feddist::load_config_file(config_path);
    config.check();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const auto records = feddist::run_experiment(config);
    feddist::write_metrics_file(out_path, config, records);
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

struct SweepJob {
  feddist::ExperimentConfig config;
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
  bool ok = false;
  double final_accuracy = 0.0;
  std::string error;
};

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::string& values_csv, const std::string& out_dir) {
  feddist::ExperimentConfig base;
  try {
    base = feddist::load_config_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (axis != "alpha" && axis != "clients" && axis != "rounds") {
    std::cerr << "config error: axis must be alpha|clients|rounds\n";
    return kExitConfig;
  }

  std::vector<double> values;
  {
    std::stringstream ss(values_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        std::cerr << "config error: bad axis value '" << item << "'\n";
        return kExitConfig;
      }
    }
  }
  if (values.empty()) {
    std::cerr << "config error: no axis values\n";
    return kExitConfig;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << out_dir << '\n';
    return kExitRuntime;
  }

  std::vector<SweepJob> jobs;
  for (double v : values) {
    for (std::uint64_t seed : base.seeds) {
      SweepJob job;
      job.config = base;
      job.axis_value = v;
      job.seed = seed;
      if (axis == "alpha") {
        job.config.alpha = v;
      } else if (axis == "clients") {
        job.config.clients = static_cast<std::size_t>(std::llround(v));
      } else {
        job.config.rounds = static_cast<std::size_t>(std::llround(v));
      }
      job.config.seed = seed;
      job.config.seeds = {seed};
      job.out_path = (fs::path(out_dir) /
                      (axis + "_" + value_token(v) + "_seed" +
                       std::to_string(seed) + ".jsonl"))
                         .string();
      jobs.push_back(std::move(job));
    }
  }

  std::atomic<std::size_t> cursor{0};
  const std::size_t workers = thread_budget(jobs.size());
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= jobs.size()) return;
      SweepJob& job = jobs[i];
      try {
        job.config.check();
        const auto records = feddist::run_experiment(job.config);
        feddist::write_metrics_file(job.out_path, job.config, records);
        job.final_accuracy =
            records.empty() ? 0.0 : records.back().test_accuracy;
        job.ok = true;
      } catch (const std::exception& e) {
        job.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  const fs::path summary_path = fs::path(out_dir) / "summary.tsv";
  std::ofstream summary(summary_path);
  if (!summary) {
    std::cerr << "cannot write " << summary_path << '\n';
    return kExitRuntime;
  }
  summary << "axis\tattack\tdefence\tacc_mean\tacc_std\n";
  for (double v : values) {
    std::vector<double> accs;
    for (const SweepJob& job : jobs) {
      if (job.axis_value == v && job.ok) accs.push_back(job.final_accuracy);
    }
    double mean = std::numeric_limits<double>::quiet_NaN();
    double stddev = std::numeric_limits<double>::quiet_NaN();
    if (!accs.empty()) {
      mean = 0.0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      stddev = 0.0;
      if (accs.size() > 1) {
        for (double a : accs) stddev += (a - mean) * (a - mean);
        stddev = std::sqrt(stddev / static_cast<double>(accs.size() - 1));
      }
    }
    summary << v << '\t' << feddist::attack_kind_name(base.attack.kind) << '\t'
            << feddist::defence_label(base.defence) << '\t' << mean << '\t'
            << stddev << '\n';
  }

  for (const SweepJob& job : jobs) {
    if (!job.ok) {
      std::cerr << "run failed (" << axis << "=" << job.axis_value << ", seed "
                << job.seed << "): " << job.error << '\n';
    }
  }
  return kExitOk;
}

int cmd_check(const std::string& names_csv, const std::string& out_path,
              std::uint64_t seed) {
  std::vector<std::string> names;
  if (names_csv == "all") {
    names = feddist::all_check_names();
  } else {
    std::stringstream ss(names_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) names.push_back(item);
    }
  }
  const auto known = feddist::all_check_names();
  for (const std::string& name : names) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      std::cerr << "unknown check '" << name << "'\n";
      return kExitConfig;
    }
  }

  std::ofstream out;
  if (!out_path.empty()) {
    out.open(out_path);
    if (!out) {
      std::cerr << "cannot write " << out_path << '\n';
      return kExitRuntime;
    }
  }

  bool all_pass = true;
  for (const std::string& name : names) {
    const feddist::CheckReport report = feddist::run_check(name, seed);
    const std::string line = report.to_json_line();
    std::cout << line << '\n';
    if (out.is_open()) out << line << '\n';
    all_pass = all_pass && report.pass;
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"byzantine-robust federated distillation simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, axis, values_csv, names = "all";
  std::uint64_t check_seed = 1;

  CLI::App* run = app.add_subcommand("run", "execute one experiment");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--out", out_path, "metrics output file")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "run a parameter sweep");
  sweep->add_option("--config", config_path, "config file")->required();
  sweep->add_option("--axis", axis, "alpha|clients|rounds")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--out", out_path, "output directory")->required();

  CLI::App* check = app.add_subcommand("check", "run verification checks");
  check->add_option("--names", names, "comma list or 'all'");
  check->add_option("--out", out_path, "report output file");
  check->add_option("--seed", check_seed, "check seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed()) return cmd_run(config_path, out_path);
  if (sweep->parsed()) return cmd_sweep(config_path, axis, values_csv, out_path);
  return cmd_check(names, out_path, check_seed);
}
