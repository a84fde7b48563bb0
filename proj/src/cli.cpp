// SPDX-License-Identifier: Apache-2.0
#include "altlora/cli.hpp"

#include <CLI11.hpp>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "altlora/verify.hpp"

namespace altlora::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_number(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw UsageError("cannot read '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

struct LoadedConfig {
  ExperimentSpec spec;
  std::optional<std::string> out;
  json grid = json::object();
};

LoadedConfig load_config(const fs::path& path, bool allow_grid) {
  json doc = load_json(path);
  if (!doc.is_object()) {
    throw InvalidSpec("config must be a JSON object");
  }
  LoadedConfig cfg;
  if (doc.contains("out")) {
    if (!doc["out"].is_string()) {
      throw InvalidSpec("'out' must be a string");
    }
    cfg.out = doc["out"].get<std::string>();
    doc.erase("out");
  }
  if (allow_grid && doc.contains("grid")) {
    cfg.grid = doc["grid"];
    doc.erase("grid");
  }
  cfg.spec = spec_from_json(doc, true);
  return cfg;
}

struct CellOutcome {
  bool skipped = false;
  bool diverged = false;
  long steps_to_threshold = -1;
};

CellOutcome run_cell(const ExperimentSpec& spec, const fs::path& dir) {
  const std::string stem = cell_name(spec);
  const fs::path sidecar = dir / (stem + ".json");
  if (fs::exists(sidecar)) {
    return CellOutcome{true, false, -1};
  }
  const RunRecord record = run_experiment(spec);
  std::ostringstream csv;
  write_csv(csv, record);
  write_atomic(dir / (stem + ".csv"), csv.str());
  write_atomic(sidecar, sidecar_json(spec, record).dump(2) + "\n");
  return CellOutcome{false, record.diverged, record.steps_to_threshold};
}

int run_cells(const std::vector<ExperimentSpec>& cells, const fs::path& dir, int threads,
              std::ostream& out) {
  fs::create_directories(dir);
  std::atomic<std::size_t> next{0};
  std::atomic<int> diverged{0};
  std::mutex io;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        const CellOutcome outcome = run_cell(cells[i], dir);
        diverged += outcome.diverged ? 1 : 0;
        std::lock_guard<std::mutex> lock(io);
        out << cell_name(cells[i]) << ": ";
        if (outcome.skipped) {
          out << "skipped (complete)\n";
        } else {
          out << (outcome.diverged ? "diverged" : "done") << ", steps_to_threshold "
              << outcome.steps_to_threshold << '\n';
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(io);
        if (!error) {
          error = std::current_exception();
        }
        next = cells.size();
      }
    }
  };
  const int count = std::max(1, std::min<int>(threads, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < count; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (std::thread& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
  return diverged > 0 ? kFailure : kOk;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidSpec& e) {
    err << "error: invalid config: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    fields.push_back(field);
  }
  return fields;
}

struct RunSummary {
  std::string file;
  std::string optimizer;
  std::string task;
  double kappa = 1.0;
  double eta = 0.0;
  double alpha = 0.0;
  std::string order;
  std::uint64_t seed = 0;
  long steps_to_threshold = -1;
  bool diverged = false;
  double final_loss = 0.0;
  double min_loss = 0.0;
  double final_weight_err = 0.0;
  long state_entries = 0;
  std::uint64_t flops = 0;
};

constexpr const char* kSummaryFile = "report_summary.csv";
constexpr const char* kReportFile = "report.txt";

bool better(const RunSummary& a, const RunSummary& b) {
  const bool ra = a.steps_to_threshold >= 0;
  const bool rb = b.steps_to_threshold >= 0;
  if (ra != rb) {
    return ra;
  }
  if (ra && a.steps_to_threshold != b.steps_to_threshold) {
    return a.steps_to_threshold < b.steps_to_threshold;
  }
  return a.final_loss < b.final_loss;
}

std::string render_report(const std::vector<RunSummary>& runs) {
  std::ostringstream text;
  std::map<std::string, const RunSummary*> best;
  std::map<std::string, std::map<double, long>> by_kappa;
  std::set<double> kappas;
  for (const RunSummary& run : runs) {
    auto it = best.find(run.optimizer);
    if (it == best.end() || better(run, *it->second)) {
      best[run.optimizer] = &run;
    }
    kappas.insert(run.kappa);
    auto& cell = by_kappa[run.optimizer];
    auto found = cell.find(run.kappa);
    if (found == cell.end()) {
      cell[run.kappa] = run.steps_to_threshold;
    } else if (run.steps_to_threshold >= 0 &&
               (found->second < 0 || run.steps_to_threshold < found->second)) {
      found->second = run.steps_to_threshold;
    }
  }

  text << "runs: " << runs.size() << "\n\nbest cell per optimizer\n";
  text << std::left << std::setw(16) << "optimizer" << std::setw(12) << "steps" << std::setw(14)
       << "final_loss" << "cell\n";
  for (const auto& [name, run] : best) {
    text << std::setw(16) << name << std::setw(12) << run->steps_to_threshold << std::setw(14)
         << format_number(run->final_loss) << run->file << '\n';
  }

  text << "\nsteps_to_threshold by kappa\n" << std::setw(16) << "optimizer";
  for (double kappa : kappas) {
    text << std::setw(12) << ("k=" + format_number(kappa));
  }
  text << "max/min\n";
  for (const auto& [name, cells] : by_kappa) {
    text << std::setw(16) << name;
    long lo = -1;
    long hi = -1;
    bool complete = true;
    for (double kappa : kappas) {
      auto it = cells.find(kappa);
      const long steps = it == cells.end() ? -1 : it->second;
      text << std::setw(12) << (it == cells.end() ? std::string("-") : std::to_string(steps));
      if (steps < 0) {
        complete = false;
      } else {
        lo = lo < 0 ? steps : std::min(lo, steps);
        hi = std::max(hi, steps);
      }
    }
    if (complete && lo > 0) {
      text << format_number(static_cast<double>(hi) / static_cast<double>(lo));
    } else {
      text << "n/a";
    }
    text << '\n';
  }
  return text.str();
}

}  // namespace

std::string cell_name(const ExperimentSpec& spec) {
  std::string name = std::string(to_string(spec.optimizer)) + "__eta-" + format_number(spec.train.eta) +
                     "__alpha-" + format_number(spec.alpha) + "__order-" +
                     std::string(to_string(spec.train.order)) + "__kappa-" +
                     format_number(spec.kappa) + "__seed-" + std::to_string(spec.seed);
  std::replace(name.begin(), name.end(), '+', 'p');
  return name;
}

std::vector<ExperimentSpec> expand_grid(const ExperimentSpec& base, const json& grid) {
  if (!grid.is_object()) {
    throw InvalidSpec("'grid' must be an object");
  }
  static const std::vector<std::string> axes = {"optimizer", "order", "kappa", "alpha", "eta", "seed"};
  for (const auto& [key, value] : grid.items()) {
    if (std::find(axes.begin(), axes.end(), key) == axes.end()) {
      throw InvalidSpec("unknown grid axis '" + key + "'");
    }
    if (!value.is_array() || value.empty()) {
      throw InvalidSpec("grid axis '" + key + "' must be a non-empty array");
    }
  }
  std::vector<ExperimentSpec> cells = {base};
  try {
    for (const std::string& axis : axes) {
      if (!grid.contains(axis)) {
        continue;
      }
      std::vector<ExperimentSpec> next;
      for (const ExperimentSpec& cell : cells) {
        for (const json& value : grid[axis]) {
          ExperimentSpec spec = cell;
          if (axis == "optimizer") spec.optimizer = parse_optimizer(value.get<std::string>());
          else if (axis == "order") spec.train.order = parse_order(value.get<std::string>());
          else if (axis == "kappa") spec.kappa = value.get<double>();
          else if (axis == "alpha") spec.alpha = value.get<double>();
          else if (axis == "eta") spec.train.eta = value.get<double>();
          else spec.seed = value.get<std::uint64_t>();
          next.push_back(spec);
        }
      }
      cells = std::move(next);
    }
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("bad grid value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InvalidSpec(e.what());
  }
  for (const ExperimentSpec& cell : cells) {
    validate(cell);
  }
  return cells;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write '" + tmp.string() + "'");
    }
    out << contents;
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

fs::path resolve_out_dir(const std::optional<fs::path>& flag,
                         const std::optional<std::string>& from_config) {
  if (flag) {
    return *flag;
  }
  if (from_config) {
    return *from_config;
  }
  if (const char* env = std::getenv("ALTLORA_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return fs::current_path();
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::vector<const CheckInfo*> selected = select_checks(options.filter);
    if (selected.empty()) {
      err << "no checks selected by '" << options.filter << "'\n";
      return static_cast<int>(kUsage);
    }
    std::vector<CheckResult> results;
    out << std::left << std::setw(6) << "status" << std::setw(38) << "check" << std::setw(10)
        << "instances" << std::setw(14) << "deviation" << std::setw(12) << "tolerance" << "seconds\n";
    for (const CheckInfo* info : selected) {
      CheckResult r = run_check(*info);
      const char* status = r.informational ? "info" : (r.passed ? "PASS" : "FAIL");
      out << std::setw(6) << status << std::setw(38) << r.name << std::setw(10) << r.instances
          << std::setw(14) << format_number(r.max_deviation) << std::setw(12)
          << format_number(r.tolerance) << format_number(r.seconds) << '\n';
      results.push_back(std::move(r));
    }
    const fs::path dir = resolve_out_dir(options.out, std::nullopt);
    fs::create_directories(dir);
    write_atomic(dir / "verify_report.json", report_json(results).dump(2) + "\n");
    const int failures = failure_count(results);
    out << failures << " failure(s) in " << results.size() << " check(s)\n";
    return failures == 0 ? static_cast<int>(kOk) : static_cast<int>(kFailure);
  });
}

int cmd_train(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    LoadedConfig cfg = load_config(options.config, false);
    if (options.seed) {
      cfg.spec.seed = *options.seed;
    }
    validate(cfg.spec);
    return run_cells({cfg.spec}, resolve_out_dir(options.out, cfg.out), 1, out);
  });
}

int cmd_sweep(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.threads < 1) {
      throw UsageError("--threads must be at least 1");
    }
    LoadedConfig cfg = load_config(options.config, true);
    if (options.seed) {
      cfg.spec.seed = *options.seed;
    }
    const std::vector<ExperimentSpec> cells = expand_grid(cfg.spec, cfg.grid);
    return run_cells(cells, resolve_out_dir(options.out, cfg.out), options.threads, out);
  });
}

int cmd_report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!fs::is_directory(dir)) {
      throw UsageError("'" + dir.string() + "' is not a directory");
    }
    std::vector<fs::path> csvs;
    for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
          entry.path().filename() != kSummaryFile) {
        csvs.push_back(entry.path());
      }
    }
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) {
      out << "no runs\n";
      return static_cast<int>(kOk);
    }
    std::vector<RunSummary> runs;
    std::vector<std::string> mismatched;
    for (const fs::path& csv : csvs) {
      std::ifstream in(csv);
      std::string line;
      std::getline(in, line);
      if (line != kRunCsvHeader) {
        mismatched.push_back(csv.filename().string());
        continue;
      }
      fs::path sidecar = csv;
      sidecar.replace_extension(".json");
      if (!fs::exists(sidecar)) {
        err << "warning: skipping " << csv.filename().string() << " (no sidecar, run incomplete)\n";
        continue;
      }
      const json meta = load_json(sidecar);
      RunSummary run;
      run.file = csv.stem().string();
      try {
        const json& spec = meta.at("spec");
        run.optimizer = spec.at("optimizer").get<std::string>();
        run.task = spec.at("task").get<std::string>();
        run.kappa = spec.at("kappa").get<double>();
        run.alpha = spec.at("alpha").get<double>();
        run.eta = spec.at("train").at("eta").get<double>();
        run.order = spec.at("train").at("order").get<std::string>();
        run.seed = spec.at("seed").get<std::uint64_t>();
        run.steps_to_threshold = meta.at("steps_to_threshold").get<long>();
        run.diverged = meta.at("diverged").get<bool>();
      } catch (const json::exception&) {
        mismatched.push_back(sidecar.filename().string());
        continue;
      }
      bool first = true;
      while (std::getline(in, line)) {
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 6) {
          mismatched.push_back(csv.filename().string());
          break;
        }
        const double loss = std::stod(f[1]);
        run.final_loss = loss;
        run.min_loss = first ? loss : std::min(run.min_loss, loss);
        run.final_weight_err = std::stod(f[2]);
        run.state_entries = std::stol(f[4]);
        run.flops = std::stoull(f[5]);
        first = false;
      }
      runs.push_back(run);
    }
    if (!mismatched.empty()) {
      std::ostringstream msg;
      msg << "schema mismatch in:";
      for (const std::string& name : mismatched) {
        msg << ' ' << name;
      }
      throw UsageError(msg.str());
    }
    std::ostringstream summary;
    summary << "file,optimizer,task,kappa,eta,alpha,order,seed,steps_to_threshold,diverged,"
               "final_loss,min_loss,final_weight_err,state_entries,flops\n"
            << std::setprecision(17);
    for (const RunSummary& r : runs) {
      summary << r.file << ',' << r.optimizer << ',' << r.task << ',' << r.kappa << ',' << r.eta << ','
              << r.alpha << ',' << r.order << ',' << r.seed << ',' << r.steps_to_threshold << ','
              << (r.diverged ? 1 : 0) << ',' << r.final_loss << ',' << r.min_loss << ','
              << r.final_weight_err << ',' << r.state_entries << ',' << r.flops << '\n';
    }
    write_atomic(dir / kSummaryFile, summary.str());
    const std::string text = render_report(runs);
    write_atomic(dir / kReportFile, text);
    out << text;
    return static_cast<int>(kOk);
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"AltLoRA optimizers, checks and desk-scale experiments", "altlora"};
  app.require_subcommand(1);

  VerifyOptions verify;
  std::optional<std::string> verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "run the invariant and oracle checks");
  verify_cmd->add_option("--filter", verify.filter, "glob over check names");
  verify_cmd->add_option("--out", verify_out, "directory for verify_report.json");

  RunOptions train;
  std::optional<std::string> train_out;
  auto* train_cmd = app.add_subcommand("train", "run one experiment");
  train_cmd->add_option("config", train.config, "experiment config (JSON)")->required();
  train_cmd->add_option("--seed", train.seed, "override the config seed");
  train_cmd->add_option("--out", train_out, "output directory");

  RunOptions sweep;
  std::optional<std::string> sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "run every cell of a grid");
  sweep_cmd->add_option("config", sweep.config, "sweep config (JSON with a grid)")->required();
  sweep_cmd->add_option("--seed", sweep.seed, "override the base seed");
  sweep_cmd->add_option("--out", sweep_out, "output directory");
  sweep_cmd->add_option("--threads", sweep.threads, "cells run in parallel")->check(CLI::PositiveNumber);

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "summarize a directory of runs");
  report_cmd->add_option("dir", report_dir, "directory holding run CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? static_cast<int>(kOk) : static_cast<int>(kUsage);
  }

  auto as_path = [](const std::optional<std::string>& s) -> std::optional<fs::path> {
    return s ? std::optional<fs::path>(*s) : std::nullopt;
  };
  if (*verify_cmd) {
    verify.out = as_path(verify_out);
    return cmd_verify(verify, out, err);
  }
  if (*train_cmd) {
    train.out = as_path(train_out);
    return cmd_train(train, out, err);
  }
  if (*sweep_cmd) {
    sweep.out = as_path(sweep_out);
    return cmd_sweep(sweep, out, err);
  }
  return cmd_report(report_dir, out, err);
}

}  // namespace altlora::cli
