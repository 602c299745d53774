// antlgp: command-line driver for the ant clustering + LGP pipeline.
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "antlgp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace antlgp;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned jobs = 1;
  std::vector<std::string> overrides;
};

RunConfig build_config(const Globals& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : load_config(g.config_path);
  for (const std::string& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out_dir = *g.out;
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write '" + p.string() + "'");
  return os;
}

template <typename F>
void write_file(const fs::path& p, F&& f) {
  auto os = open_out(p);
  f(os);
  if (!os) throw DataError("write failed for '" + p.string() + "'");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return is;
}

// Runs fn(seed, dir) for every seed, up to `jobs` at a time. A single seed
// writes straight into the output directory; several get seed-<s>/ subdirs.
void for_each_seed(const std::vector<std::uint64_t>& seeds, unsigned jobs, const fs::path& out,
                   const std::function<void(std::uint64_t, const fs::path&)>& fn) {
  auto dir_for = [&](std::uint64_t s) { return seeds.size() == 1 ? out : out / ("seed-" + std::to_string(s)); };
  if (seeds.size() == 1 || jobs <= 1) {
    for (std::uint64_t s : seeds) fn(s, dir_for(s));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::min<std::size_t>(jobs, seeds.size()); ++j) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < seeds.size();) {
        try {
          fn(seeds[i], dir_for(seeds[i]));
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void write_cluster_outputs(const fs::path& dir, const ClusteringOutput& c) {
  write_file(dir / "assignment.csv", [&](std::ostream& os) { write_assignment_csv(os, c.assignment); });
  write_file(dir / "entropy.csv", [&](std::ostream& os) { write_entropy_csv(os, c.simulation.entropy_trace); });
  write_file(dir / "pheromone.pgm", [&](std::ostream& os) { write_pheromone_pgm(os, c.simulation.final_habitat); });
  for (const Snapshot& s : c.simulation.snapshots) {
    write_file(dir / "snapshots" / ("grid_" + std::to_string(s.step) + ".csv"), [&](std::ostream& os) { os << s.csv; });
  }
}

void write_evolution_outputs(const fs::path& dir, const lgp::EvolutionResult& r) {
  write_file(dir / "history.csv", [&](std::ostream& os) { lgp::write_history_csv(os, r.history); });
  write_file(dir / "program.txt", [&](std::ostream& os) { lgp::write_program(os, r.best, r.layout); });
}

std::string json_line(const Report& r) { return to_json(r).dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ant-colony clustering and linear GP forecasting"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "parallel jobs across seeds")->check(CLI::PositiveNumber);
  app.add_option("--set", g.overrides, "override a config key (key=value), repeatable");
  bool dump = false;
  app.add_flag("--dump-config", dump, "print the effective configuration and exit");

  // synth
  auto* synth = app.add_subcommand("synth", "write synthetic fixtures");
  synth->require_subcommand(1);
  int classes = 4, per_class = 200;
  double spread = 0.05;
  auto* s_items = synth->add_subcommand("items", "labelled Gaussian classes");
  s_items->add_option("--classes", classes)->check(CLI::PositiveNumber);
  s_items->add_option("--per-class", per_class)->check(CLI::NonNegativeNumber);
  s_items->add_option("--spread", spread)->check(CLI::NonNegativeNumber);
  int weeks = 5;
  std::string granularity = "hourly";
  double noise = 0.05;
  auto* s_traffic = synth->add_subcommand("traffic", "periodic web traffic series");
  s_traffic->add_option("--weeks", weeks)->check(CLI::PositiveNumber);
  s_traffic->add_option("--granularity", granularity)->check(CLI::IsMember({"hourly", "daily"}));
  s_traffic->add_option("--noise", noise)->check(CLI::NonNegativeNumber);
  std::size_t n_cases = 100;
  auto* s_cases = synth->add_subcommand("cases", "regression cases for y = x1*x2 + x1");
  s_cases->add_option("--n", n_cases)->check(CLI::PositiveNumber);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "run the ant colony on an item or traffic file");
  std::string items_path, data_path;
  std::optional<std::int64_t> snapshot_every;
  std::vector<std::uint64_t> seeds;
  auto* in_group = cluster->add_option_group("input");
  in_group->add_option("--items", items_path, "item CSV (label,f0,...)");
  in_group->add_option("--data", data_path, "traffic CSV (index,requests,bytes[,label])");
  in_group->require_option(1);
  cluster->add_option("--snapshot-every", snapshot_every, "grid snapshot interval in steps");
  cluster->add_option("--seeds", seeds, "run several seeds (parallel with --jobs)");

  // evolve
  auto* evolve = app.add_subcommand("evolve", "evolve a program on a case file");
  std::string cases_path, validation_path;
  std::optional<std::size_t> max_tournaments;
  evolve->add_option("--cases", cases_path, "case CSV (x0,...,target)")->required();
  evolve->add_option("--validation", validation_path, "validation case CSV (defaults to the training cases)");
  evolve->add_option("--max-tournaments", max_tournaments);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "cluster, re-index, evolve and report on a traffic file");
  bool no_clusters = false;
  std::vector<std::uint64_t> p_seeds;
  std::optional<std::size_t> p_tournaments;
  pipeline->add_option("--data", data_path, "traffic CSV")->required();
  pipeline->add_flag("--no-clusters", no_clusters, "skip clustering; the cluster input is constant");
  pipeline->add_option("--max-tournaments", p_tournaments);
  pipeline->add_option("--seeds", p_seeds, "run several seeds (parallel with --jobs)");

  // report
  auto* rep = app.add_subcommand("report", "score a saved program");
  std::string program_path, train_path, test_path;
  rep->add_option("--program", program_path)->required();
  rep->add_option("--test", test_path, "test case CSV")->required();
  rep->add_option("--train", train_path, "training case CSV (defaults to the test cases)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = build_config(g);
    if (dump) {
      std::cout << dump_config(cfg);
      return 0;
    }
    const fs::path out = cfg.out_dir;

    if (*synth) {
      Rng rng(synth_seed(cfg.seed));
      if (*s_items) {
        const auto items = synth_gaussian_classes(classes, per_class, spread, rng);
        write_file(out / "items.csv", [&](std::ostream& os) { write_items_csv(os, items); });
      } else if (*s_traffic) {
        const auto g_kind = granularity == "daily" ? Granularity::kDaily : Granularity::kHourly;
        const auto ds = synth_traffic(weeks, g_kind, noise, rng);
        write_file(out / "traffic.csv", [&](std::ostream& os) { write_csv(os, ds); });
      } else {
        const auto cases = synth_product_cases(n_cases, rng);
        write_file(out / "cases.csv", [&](std::ostream& os) { write_cases_csv(os, cases); });
      }
      return 0;
    }

    if (*cluster) {
      std::vector<DataItem> items;
      if (!items_path.empty()) {
        auto is = open_in(items_path);
        items = read_items_csv(is);
      } else {
        const auto ds = normalize(load_csv(data_path), cfg.mining.train_fraction);
        items = items_from_dataset(ds, cfg.mining.cluster_columns);
      }
      if (items.empty()) throw ConfigError("no items to cluster");
      if (seeds.empty()) seeds.push_back(cfg.seed);
      std::mutex io;
      for_each_seed(seeds, g.jobs, out, [&](std::uint64_t s, const fs::path& dir) {
        RunConfig c = cfg;
        c.seed = s;
        if (snapshot_every) c.colony.snapshot_every = *snapshot_every;
        const auto res = cluster_items(c, items);
        write_cluster_outputs(dir, res);
        std::lock_guard lock(io);
        std::cout << "seed " << s << ": " << res.assignment.n_clusters << " clusters, entropy "
                  << res.simulation.entropy_trace.front().second << " -> "
                  << res.simulation.entropy_trace.back().second;
        if (res.purity) std::cout << ", purity " << *res.purity;
        std::cout << '\n';
      });
      return 0;
    }

    if (*evolve) {
      auto cis = open_in(cases_path);
      const auto train = read_cases_csv(cis);
      lgp::Cases validation = train;
      if (!validation_path.empty()) {
        auto vis = open_in(validation_path);
        validation = read_cases_csv(vis);
      }
      RunConfig c = cfg;
      if (max_tournaments) c.evolution.max_tournaments = *max_tournaments;
      const auto res = lgp::evolve(resolve_evolution(c), train, validation);
      write_evolution_outputs(out, res);
      std::cout << "best train RMSE " << res.best_train_rmse << ", validation RMSE " << res.best_validation_rmse
                << ", length " << res.best.code.size() << '\n';
      return 0;
    }

    if (*pipeline) {
      const auto raw = staged("load", [&] { return load_csv(data_path); });
      if (p_seeds.empty()) p_seeds.push_back(cfg.seed);
      std::mutex io;
      for_each_seed(p_seeds, g.jobs, out, [&](std::uint64_t s, const fs::path& dir) {
        RunConfig c = cfg;
        c.seed = s;
        if (no_clusters) c.mining.use_clusters = false;
        if (p_tournaments) c.evolution.max_tournaments = *p_tournaments;
        const auto res = run_pipeline(c, raw);
        if (res.clustering) write_cluster_outputs(dir, *res.clustering);
        write_evolution_outputs(dir, res.evolution);
        write_file(dir / "report.json", [&](std::ostream& os) { os << json_line(res.report); });
        std::lock_guard lock(io);
        std::cout << "seed " << s << ": test RMSE " << res.report.rmse_test << " (persistence "
                  << res.report.rmse_persistence << "), CC " << res.report.cc_test << '\n';
      });
      return 0;
    }

    if (*rep) {
      auto pis = open_in(program_path);
      const auto parsed = lgp::read_program(pis);
      auto tis = open_in(test_path);
      const auto test = read_cases_csv(tis);
      lgp::Cases train = test;
      if (!train_path.empty()) {
        auto ris = open_in(train_path);
        train = read_cases_csv(ris);
      }
      if (test.n_inputs != static_cast<std::size_t>(parsed.layout.n_inputs) || train.n_inputs != static_cast<std::size_t>(parsed.layout.n_inputs)) {
        throw DataError("program expects " + std::to_string(parsed.layout.n_inputs) + " inputs");
      }
      Report r = report(parsed.program, parsed.layout, train, test);
      r.seed = cfg.seed;
      r.config_digest = config_digest(cfg);
      write_file(out / "report.json", [&](std::ostream& os) { os << json_line(r); });
      std::cout << json_line(r);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
