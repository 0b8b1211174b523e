#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "vaerl/analysis.hpp"
#include "vaerl/config.hpp"
#include "vaerl/errors.hpp"
#include "vaerl/graph.hpp"
#include "vaerl/io.hpp"
#include "vaerl/managers.hpp"
#include "vaerl/toy.hpp"
#include "vaerl/vae.hpp"

namespace vaerl::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Refusing to replace an earlier artifact is a runtime failure, not a config problem.
class ArtifactExists : public Error {
 public:
  using Error::Error;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile;
  std::string kind;
  int episode = 0;
  bool toy_json = false;
};

class Run {
 public:
  Run(std::string command, const Options& opt, std::ostream& out, std::ostream& err)
      : command_(std::move(command)), out_(out), err_(err) {
    std::optional<config::Profile> requested;
    if (!opt.profile.empty()) requested = config::profile_from_string(opt.profile);
    const auto fallback = requested.value_or(config::Profile::desk);
    cfg_ = opt.config_path.empty() ? config::make_profile(fallback) : config::load_run_config(opt.config_path, fallback);
    if (requested && cfg_.profile != opt.profile)
      throw ConfigError("profile", "--profile " + opt.profile + " conflicts with the config file's '" + cfg_.profile + "'");
    if (opt.seed) cfg_.set_seed(*opt.seed);
    if (!opt.kind.empty()) {
      try {
        cfg_.manager.kind = managers::manager_kind_from_string(opt.kind);
      } catch (const InvalidArgument& e) {
        throw ConfigError("manager.kind", e.what());
      }
    }
    cfg_.validate();
    root_ = opt.out.empty() ? fs::path("runs") / cfg_.profile : fs::path(opt.out);
    hash_ = config::config_hash(cfg_);
    log(std::string("vaerl ") + std::string(config::version) + " " + command_ + " profile=" + cfg_.profile +
        " config_hash=" + hash_ + " seed=" + std::to_string(cfg_.manager.seed) + " out=" + root_.string());
  }

  const config::RunConfig& cfg() const { return cfg_; }
  std::ostream& out() { return out_; }

  void log(const std::string& msg) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
    err_ << '[' << stamp << "] " << msg << '\n';
  }

  fs::path under(const std::string& dir) const {
    const fs::path p(dir);
    return p.is_absolute() ? p : root_ / p;
  }
  fs::path checkpoints() const { return under(cfg_.paths.checkpoints); }
  fs::path traces() const { return under(cfg_.paths.traces); }
  fs::path metrics() const { return under(cfg_.paths.metrics); }
  fs::path dataset_path() const {
    return cfg_.vae.dataset.empty() ? checkpoints() / "dataset.txt" : fs::path(cfg_.vae.dataset);
  }
  fs::path vae_dir() const { return checkpoints() / "vae"; }
  fs::path manager_dir(managers::ManagerKind k) const { return checkpoints() / ("manager_" + managers::to_string(k)); }

  // Every output of a subcommand is declared up front so nothing is computed
  // when an earlier artifact would be replaced.
  void claim(const fs::path& p) {
    if (fs::exists(p)) throw ArtifactExists(p.string() + " already exists; choose another --out or remove it");
    claimed_.push_back(p);
  }
  void claim_manifest(const std::string& name) {
    manifest_ = root_ / "manifests" / (name + ".json");
    claim(manifest_);
  }

  void write(const fs::path& p, const std::string& contents) {
    io::write_file_atomic(p.string(), contents);
    log("wrote " + p.string());
  }

  std::shared_ptr<const vae::VaeModel> load_vae() const {
    const auto dir = vae_dir();
    if (!fs::exists(dir / "vae.json"))
      throw MissingArtifact("no VAE checkpoint at " + dir.string() + "; run train-vae first");
    auto model = std::make_shared<vae::VaeModel>(vae::VaeModel::load(dir.string()));
    if (model->n() != cfg_.env.n_agents)
      throw MissingArtifact("VAE at " + dir.string() + " was trained for n = " + std::to_string(model->n()) +
                            ", the run uses n = " + std::to_string(cfg_.env.n_agents));
    return model;
  }

  // Manifest listing every file produced, with content hashes relative to the output root.
  void finish() {
    json artifacts = json::array();
    for (const auto& p : claimed_) {
      if (p == manifest_) continue;
      std::vector<fs::path> files;
      if (fs::is_directory(p)) {
        for (const auto& e : fs::recursive_directory_iterator(p))
          if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
      } else {
        files.push_back(p);
      }
      for (const auto& f : files) {
        const fs::path rel = f.lexically_relative(root_);
        artifacts.push_back({{"path", (rel.empty() || *rel.begin() == "..") ? f.generic_string() : rel.generic_string()},
                             {"fnv1a", io::fnv1a_hex(io::read_file(f.string()))}});
      }
    }
    json m;
    m["command"] = command_;
    m["version"] = std::string(config::version);
    m["config_hash"] = hash_;
    m["config"] = json::parse(config::to_json(cfg_));
    m["artifacts"] = artifacts;
    write(manifest_, m.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::ostream& out_;
  std::ostream& err_;
  config::RunConfig cfg_;
  fs::path root_;
  std::string hash_;
  std::vector<fs::path> claimed_;
  fs::path manifest_;
};

std::string scenario_label(const env::EnvConfig& e) {
  const auto& v = e.vision_ranges;
  const bool homogeneous = std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  return "n" + std::to_string(e.n_agents) + "_v" + (homogeneous ? num(v.front()) : std::string("mixed"));
}

void gen_dataset(Run& run) {
  const auto& c = run.cfg();
  const auto path = run.dataset_path();
  run.claim(path);
  run.claim_manifest("gen-dataset");
  const auto ds = c.vae.scheme == "enumerate" ? graph::enumerate_all(c.env.n_agents)
                                              : graph::sample_topologies(c.env.n_agents, c.vae.samples, c.vae.train.seed);
  run.write(path, graph::format_dataset(ds));
  run.finish();
  run.out() << "dataset: " << ds.topologies.size() << " topologies on n = " << ds.n << " (" << ds.scheme << ")\n";
}

void train_vae(Run& run) {
  const auto& c = run.cfg();
  const auto path = run.dataset_path();
  if (!fs::exists(path)) throw MissingArtifact("no dataset at " + path.string() + "; run gen-dataset first");
  auto ds = graph::parse_dataset(io::read_file(path.string()));
  if (ds.n != c.env.n_agents)
    throw MissingArtifact("dataset " + path.string() + " has n = " + std::to_string(ds.n) + ", the run uses n = " +
                          std::to_string(c.env.n_agents));
  const auto report_path = run.metrics() / "vae_report.csv";
  run.claim(run.vae_dir());
  run.claim(report_path);
  run.claim_manifest("train-vae");

  const auto all = ds.topologies;
  auto result = vae::train_vae(std::move(ds), c.vae.train);
  result.model.save(run.vae_dir().string());
  run.write(report_path, result.report.to_csv());
  run.finish();
  const auto full = vae::evaluate(result.model, all, c.vae.train.beta);
  run.out() << "vae: best epoch " << result.report.best_epoch << ", validation link accuracy "
            << num(result.report.final_link_accuracy) << ", exact round trips "
            << static_cast<long>(std::lround(full.exact_fraction * static_cast<double>(all.size()))) << "/" << all.size()
            << "\n";
}

std::shared_ptr<const vae::VaeModel> decoder_for(Run& run, managers::ManagerKind kind) {
  if (kind != managers::ManagerKind::vae_rl) return nullptr;
  auto model = run.load_vae();
  if (model->latent_dim() != run.cfg().vae.train.latent_dim)
    throw MissingArtifact("VAE checkpoint has latent dimension " + std::to_string(model->latent_dim()) +
                          ", the config asks for " + std::to_string(run.cfg().vae.train.latent_dim));
  return model;
}

void train_manager(Run& run) {
  const auto& c = run.cfg();
  const auto kind = c.manager.kind;
  const auto name = managers::to_string(kind);
  auto decoder = decoder_for(run, kind);
  const auto dir = run.manager_dir(kind);
  const auto curve_path = run.metrics() / ("curve_" + name + ".csv");
  run.claim(dir);
  run.claim(curve_path);
  run.claim_manifest("train-manager_" + name);

  auto manager = managers::make_manager(c.env.n_agents, c.manager, decoder);
  const int every = std::max(1, c.manager.episodes / 20);
  const auto curve = managers::train_manager(c.env, *manager, c.manager, [&](const managers::CurveRow& r) {
    if ((r.episode + 1) % every == 0)
      run.log(name + " episode " + std::to_string(r.episode + 1) + "/" + std::to_string(c.manager.episodes) +
              " return " + num(r.episode_return) + " exploration " + num(r.exploration));
  });
  manager->save(dir.string());
  run.write(curve_path, curve.to_csv());
  run.finish();
  double tail = 0;
  const std::size_t k = std::min<std::size_t>(100, curve.rows.size());
  for (std::size_t i = curve.rows.size() - k; i < curve.rows.size(); ++i) tail += curve.rows[i].episode_return;
  run.out() << name << ": trained " << curve.rows.size() << " episodes";
  if (k > 0) run.out() << ", mean return over the last " << k << " " << num(tail / static_cast<double>(k));
  run.out() << "\n";
}

std::unique_ptr<managers::Manager> load_trained(Run& run) {
  const auto kind = run.cfg().manager.kind;
  const auto dir = run.manager_dir(kind);
  if (!fs::exists(dir / "manifest.json")) {
    if (kind == managers::ManagerKind::random) return std::make_unique<managers::RandomManager>(run.cfg().env.n_agents);
    throw MissingArtifact("no " + managers::to_string(kind) + " checkpoint at " + dir.string() +
                          "; run train-manager first");
  }
  auto m = managers::load_manager(dir.string(), decoder_for(run, kind));
  if (m->n_agents() != run.cfg().env.n_agents)
    throw MissingArtifact("manager at " + dir.string() + " was trained for n = " + std::to_string(m->n_agents()));
  return m;
}

void evaluate(Run& run) {
  const auto& c = run.cfg();
  const auto name = managers::to_string(c.manager.kind);
  auto manager = load_trained(run);
  const auto trace_path = run.traces() / ("eval_" + name + ".jsonl");
  const auto metrics_path = run.metrics() / ("eval_" + name + ".json");
  const auto summary_path = run.metrics() / ("summary_" + name + ".csv");
  run.claim(trace_path);
  run.claim(metrics_path);
  run.claim(summary_path);
  run.claim_manifest("eval_" + name);

  const auto s = managers::evaluate(c.env, *manager, c.eval.episodes, c.eval.seed);
  json j;
  j["method"] = name;
  j["scenario"] = scenario_label(c.env);
  j["episodes"] = s.episodes;
  j["seed"] = c.eval.seed;
  j["mean_return"] = s.mean_return;
  j["stderr_return"] = s.stderr_return;
  j["mean_performance"] = s.mean_performance;
  j["stderr_performance"] = s.stderr_performance;
  j["mean_cost"] = s.mean_cost;
  j["stderr_cost"] = s.stderr_cost;
  j["mean_step_cost"] = s.mean_step_cost;
  j["returns"] = s.returns;
  j["config_hash"] = config::config_hash(c);

  run.write(trace_path, env::traces_to_jsonl(s.traces));
  run.write(metrics_path, j.dump(2) + "\n");
  run.write(summary_path,
            analysis::summary_csv({analysis::summarize(name, scenario_label(c.env), analysis::group_episodes(s.traces))}));
  run.finish();
  run.out() << name << ": mean return " << num(s.mean_return) << " +/- " << num(s.stderr_return) << " over "
            << s.episodes << " episodes, cost per step " << num(s.mean_step_cost) << "\n";
}

json welch_json(const analysis::WelchResult& w) {
  return json{{"mean_a", w.mean_a}, {"mean_b", w.mean_b}, {"t", w.t_statistic}, {"dof", w.dof}, {"p", w.p_value}};
}

void analyze(Run& run) {
  const auto& c = run.cfg();
  const auto dir = run.traces();
  std::vector<std::pair<std::string, fs::path>> inputs;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto file = e.path().filename().string();
      if (file.rfind("eval_", 0) == 0 && e.path().extension() == ".jsonl")
        inputs.emplace_back(file.substr(5, file.size() - 5 - 6), e.path());
    }
  if (inputs.empty()) throw MissingArtifact("no eval_*.jsonl traces in " + dir.string() + "; run eval first");
  std::sort(inputs.begin(), inputs.end());

  const auto m = run.metrics();
  run.claim(m / "summary.csv");
  for (const auto& [name, path] : inputs) {
    run.claim(m / ("density_" + name + ".csv"));
    run.claim(m / ("centrality_" + name + ".csv"));
  }
  run.claim(m / "analysis.json");
  run.claim_manifest("analyze");

  const auto scenario = scenario_label(c.env);
  std::vector<analysis::SummaryRow> rows;
  std::map<std::string, std::vector<double>> returns;
  json report;
  for (const auto& [name, path] : inputs) {
    const auto episodes = analysis::group_episodes(env::parse_trace_jsonl(io::read_file(path.string())));
    rows.push_back(analysis::summarize(name, scenario, episodes));
    run.write(m / ("density_" + name + ".csv"), analysis::density_distribution(episodes).to_csv());
    run.write(m / ("centrality_" + name + ".csv"), analysis::grouped_series(episodes, c.env.vision_ranges).to_csv());
    const auto pc = analysis::phase_contrast(episodes);
    report[name]["phase"] = {{"early_window", {pc.early_begin, pc.early_end}},
                             {"late_window", {pc.late_begin, pc.late_end}},
                             {"early_mean_links", pc.early_mean},
                             {"late_mean_links", pc.late_mean},
                             {"difference", pc.difference},
                             {"welch", welch_json(pc.test)},
                             {"significant", pc.significant}};
    auto& r = returns[name];
    for (const auto& ep : episodes) {
      double total = 0;
      for (const auto& rec : ep) total += rec.reward;
      r.push_back(total);
    }
  }
  if (returns.count("random"))
    for (const auto& [name, r] : returns)
      if (name != "random") report[name]["vs_random"] = welch_json(analysis::welch_test(r, returns.at("random")));

  run.write(m / "summary.csv", analysis::summary_csv(rows));
  run.write(m / "analysis.json", report.dump(2) + "\n");
  run.finish();
  for (const auto& row : rows)
    run.out() << row.method << ": mean return " << num(row.mean_return) << " +/- " << num(row.stderr_return)
              << ", links early/late " << num(report[row.method]["phase"]["early_mean_links"].get<double>()) << "/"
              << num(report[row.method]["phase"]["late_mean_links"].get<double>()) << "\n";
}

void trace(Run& run, int episode) {
  const auto& c = run.cfg();
  if (episode < 0) throw ConfigError("--episode", "must be >= 0");
  const auto name = managers::to_string(c.manager.kind);
  auto manager = load_trained(run);
  const auto path = run.traces() / ("trace_" + name + "_ep" + std::to_string(episode) + ".jsonl");
  run.claim(path);
  run.claim_manifest("trace_" + name + "_ep" + std::to_string(episode));
  const auto t = managers::evaluation_episode(c.env, *manager, c.eval.seed, episode);
  run.write(path, env::traces_to_jsonl({t}));
  run.finish();
  run.out() << "t  links  reward\n";
  for (const auto& s : t.steps)
    run.out() << s.record.t << "  " << s.record.topology.link_count() << "  " << num(s.reward) << "\n";
  run.out() << "return " << num(t.total_return) << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Topology managers for partially observable multi-agent teams"};
  app.name("vaerl");
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config_path, "JSON run configuration (overrides the profile)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every section, overriding the config");
  app.add_option("--out", opt.out, "Output root (default runs/<profile>)");
  app.add_option("--profile", opt.profile, "Base profile")->check(CLI::IsMember({"desk", "paper"}));

  auto* gen = app.add_subcommand("gen-dataset", "Write the VAE topology dataset");
  auto* tvae = app.add_subcommand("train-vae", "Train the topology VAE");
  auto* tman = app.add_subcommand("train-manager", "Train a topology manager");
  auto* ev = app.add_subcommand("eval", "Evaluate a trained manager");
  auto* an = app.add_subcommand("analyze", "Metrics CSVs from evaluation traces");
  auto* toy = app.add_subcommand("toy", "Print the three-agent flipping-rank example");
  auto* tr = app.add_subcommand("trace", "Export one evaluation episode");
  auto* show = app.add_subcommand("config", "Print the resolved configuration");
  for (auto* s : {tman, ev, tr})
    s->add_option("--kind", opt.kind, "Manager kind, overriding manager.kind")
        ->check(CLI::IsMember({"vae_rl", "bdqn", "flat_dqn", "random"}));
  tr->add_option("--episode", opt.episode, "Evaluation episode index");
  toy->add_flag("--json", opt.toy_json, "Print JSON instead of text");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'vaerl --help' for usage\n";
    return config_error;
  }
  if (*seed_opt) opt.seed = seed;

  try {
    if (toy->parsed()) {
      const auto report = toy::flipping_rank_report(toy::ToyConfig{});
      out << (opt.toy_json ? report.to_json() + "\n" : report.to_text());
      return ok;
    }
    CLI::App* sub = app.get_subcommands().front();
    if (sub == show) {
      std::ostringstream quiet;
      Run r(sub->get_name(), opt, out, quiet);
      out << config::to_json(r.cfg()) << "\n";
      return ok;
    }
    Run r(sub->get_name(), opt, out, err);
    if (sub == gen) gen_dataset(r);
    else if (sub == tvae) train_vae(r);
    else if (sub == tman) train_manager(r);
    else if (sub == ev) evaluate(r);
    else if (sub == an) analyze(r);
    else if (sub == tr) trace(r, opt.episode);
    return ok;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << "\n";
    return missing_artifact;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return runtime_failure;
  }
}

}  // namespace vaerl::cli
