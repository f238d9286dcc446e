// Copyright 2026 The Metagame Eval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment configuration and the pipeline steps behind the command-line
// verbs. Relative paths inside a config resolve against the config file's
// directory; outputs go to the output directory.

#ifndef METAGAME_EXPERIMENT_HPP
#define METAGAME_EXPERIMENT_HPP

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/common.hpp"
#include "metagame/external_policy.hpp"
#include "metagame/instances.hpp"
#include "metagame/metagame.hpp"
#include "metagame/policy.hpp"
#include "metagame/search.hpp"
#include "metagame/selfplay.hpp"
#include "metagame/simulate.hpp"
#include "metagame/solver.hpp"

namespace metagame {

namespace fs = std::filesystem;

struct StrategySpec {
   std::string name;
   std::vector< std::string > seed_labels;
   std::vector< json > providers;  // one provider spec per seed
};

struct ExperimentConfig {
   json raw;  // as loaded, with command-line overrides applied
   fs::path base_dir = ".";
   GameParams game;
   std::optional< std::string > instances_path;
   std::optional< json > inline_instances;
   InstanceConstraints constraints;
   std::vector< StrategySpec > roster;
   uint64_t n_sims_per_entry = 20000;
   uint64_t n_replicates = 1000000;
   std::vector< Statistic > statistics{Statistic::ne_regret, Statistic::uniform_score, Statistic::ne_nbs};
   double eps_ent = 0.05;
   uint64_t master_seed = 0;
   fs::path output_dir = "out";
   size_t workers = 1;
   size_t histogram_bins = 50;
   bool keep_replicates = false;
   SelfPlayConfig selfplay;

   /// Hash of everything that determines simulated payoffs. Recorded in
   /// every output; analysis refuses tables whose hash differs.
   [[nodiscard]] std::string hash() const
   {
      json key{{"game", raw.value("game", json::object())},
               {"instances", raw.value("instances", json::object())},
               {"roster", raw.value("roster", json::array())},
               {"n_sims_per_entry", n_sims_per_entry},
               {"master_seed", master_seed}};
      return hex64(fnv1a(key.dump()));
   }

   [[nodiscard]] fs::path resolve(const std::string& p) const
   {
      fs::path path(p);
      return path.is_absolute() ? path : base_dir / path;
   }
};

struct Overrides {
   std::optional< uint64_t > seed;
   std::optional< size_t > workers;
   std::optional< std::string > out;
};

namespace detail {

inline std::vector< StrategySpec > parse_roster(const json& arr)
{
   if(!arr.is_array() || arr.empty())
      throw ConfigError("config: 'roster' must be a nonempty array");
   std::vector< StrategySpec > out;
   std::set< std::string > names;
   for(const auto& e : arr) {
      StrategySpec s;
      s.name = e.at("name").get< std::string >();
      if(!names.insert(s.name).second)
         throw ConfigError(str_cat("config: duplicate strategy name '", s.name, "'"));
      if(e.contains("seeds") && e.at("seeds").is_array()) {
         size_t i = 0;
         for(const auto& sd : e.at("seeds")) {
            s.seed_labels.push_back(sd.value("label", str_cat("s", i)));
            s.providers.push_back(sd.at("provider"));
            ++i;
         }
      } else {
         int n = e.value("seeds", 1);
         if(n < 1)
            throw ConfigError(str_cat("config: strategy '", s.name, "' needs at least one seed"));
         for(int i = 0; i < n; ++i) {
            s.seed_labels.push_back(str_cat("s", i));
            s.providers.push_back(e.at("provider"));
         }
      }
      if(s.providers.empty())
         throw ConfigError(str_cat("config: strategy '", s.name, "' has no seeds"));
      out.push_back(std::move(s));
   }
   return out;
}

inline void check_provider_files(const ExperimentConfig& cfg, const json& spec)
{
   std::string type = spec.value("type", "");
   if(type == "tabular") {
      auto p = cfg.resolve(spec.at("path").get< std::string >());
      if(!fs::exists(p))
         throw ConfigError(str_cat("config: tabular policy file ", p.string(), " does not exist"));
   } else if(type == "search") {
      check_provider_files(cfg, spec.at("base"));
   } else if(type == "external") {
      if(!spec.contains("command") || !spec.at("command").is_array() || spec.at("command").empty())
         throw ConfigError("config: external provider needs a nonempty 'command' array");
   } else if(type != "heuristic") {
      throw ConfigError(str_cat("config: unknown provider type '", type, "'"));
   }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir, const Overrides& ov = {})
{
   ExperimentConfig cfg;
   cfg.raw = j;
   cfg.base_dir = base_dir;
   try {
      if(j.contains("game")) {
         const auto& g = j.at("game");
         cfg.game.max_rounds = g.value("max_rounds", cfg.game.max_rounds);
         cfg.game.terminate_prob = g.value("terminate_prob", cfg.game.terminate_prob);
         cfg.game.discount = g.value("discount", cfg.game.discount);
      }
      cfg.game.validate();
      if(j.contains("instances")) {
         const auto& in = j.at("instances");
         if(in.contains("path"))
            cfg.instances_path = in.at("path").get< std::string >();
         if(in.contains("inline"))
            cfg.inline_instances = in.at("inline");
         if(in.contains("constraints"))
            cfg.constraints = InstanceConstraints::from_json(in.at("constraints"));
      }
      cfg.roster = detail::parse_roster(j.value("roster", json::array()));
      cfg.n_sims_per_entry = j.value("n_sims_per_entry", cfg.n_sims_per_entry);
      cfg.n_replicates = j.value("n_replicates", cfg.n_replicates);
      if(j.contains("statistics")) {
         cfg.statistics.clear();
         for(const auto& s : j.at("statistics"))
            cfg.statistics.push_back(statistic_from_name(s.get< std::string >()));
      }
      cfg.eps_ent = j.value("eps_ent", cfg.eps_ent);
      cfg.histogram_bins = j.value("histogram_bins", cfg.histogram_bins);
      cfg.keep_replicates = j.value("keep_replicates", cfg.keep_replicates);
      cfg.workers = j.value("workers", cfg.workers);
      if(j.contains("output_dir"))
         cfg.output_dir = cfg.resolve(j.at("output_dir").get< std::string >());
      if(j.contains("selfplay")) {
         const auto& sp = j.at("selfplay");
         cfg.selfplay.episodes = sp.value("episodes", cfg.selfplay.episodes);
         cfg.selfplay.delayed_period = sp.value("delayed_period", cfg.selfplay.delayed_period);
         cfg.selfplay.checkpoint_every = sp.value("checkpoint_every", cfg.selfplay.checkpoint_every);
         if(sp.contains("search"))
            cfg.selfplay.search = SearchConfig::from_json(sp.at("search"));
      }
      if(ov.seed)
         cfg.master_seed = *ov.seed;
      else if(j.contains("master_seed"))
         cfg.master_seed = j.at("master_seed").get< uint64_t >();
      else
         throw ConfigError("config: 'master_seed' is mandatory (or pass --seed)");
   } catch(const json::exception& e) {
      throw ConfigError(str_cat("config: ", e.what()));
   }
   if(ov.workers)
      cfg.workers = *ov.workers;
   if(ov.out)
      cfg.output_dir = *ov.out;
   cfg.raw["master_seed"] = cfg.master_seed;
   if(cfg.n_sims_per_entry < 1)
      throw ConfigError("config: n_sims_per_entry must be >= 1");
   if(cfg.n_replicates < 1)
      throw ConfigError("config: n_replicates must be >= 1");
   if(cfg.eps_ent <= 0.0)
      throw ConfigError("config: eps_ent must be > 0");
   if(cfg.instances_path && !fs::exists(cfg.resolve(*cfg.instances_path)))
      throw ConfigError(str_cat("config: instance DB ", cfg.resolve(*cfg.instances_path).string(),
                                " does not exist (run gen-instances first)"));
   for(const auto& s : cfg.roster)
      for(const auto& p : s.providers)
         detail::check_provider_files(cfg, p);
   return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const Overrides& ov = {})
{
   std::ifstream f(path);
   if(!f)
      throw ConfigError(str_cat("cannot read config ", path));
   json j;
   try {
      f >> j;
   } catch(const json::parse_error& e) {
      throw ConfigError(str_cat(path, ": ", e.what()));
   }
   return parse_config(j, fs::path(path).parent_path(), ov);
}

/// Instance DB named by the config: a file, an inline list, or the
/// enumeration of the configured constraints.
inline std::shared_ptr< const InstanceDB > load_instances(const ExperimentConfig& cfg)
{
   if(cfg.instances_path)
      return std::make_shared< const InstanceDB >(load_db(cfg.resolve(*cfg.instances_path).string()));
   if(cfg.inline_instances)
      return std::make_shared< const InstanceDB >(InstanceDB::from_json(*cfg.inline_instances));
   return std::make_shared< const InstanceDB >(enumerate_instances(cfg.constraints));
}

/// Builds a provider from its JSON spec.
inline PolicyPtr make_provider(const std::string& name, const json& spec, const ExperimentConfig& cfg,
                               const std::shared_ptr< const InstanceDB >& db)
{
   std::string type = spec.value("type", "");
   if(type == "heuristic") {
      return std::make_shared< RenamedPolicy >(name, make_heuristic(spec.at("policy").get< std::string >()));
   }
   if(type == "tabular") {
      auto t = load_tabular(cfg.resolve(spec.at("path").get< std::string >()).string());
      return std::make_shared< TabularPolicy >(std::move(t));
   }
   if(type == "external") {
      auto argv = spec.at("command").get< std::vector< std::string > >();
      if(!argv.empty() && argv[0].find('/') != std::string::npos)
         argv[0] = cfg.resolve(argv[0]).string();
      return std::make_shared< ExternalPolicy >(name, argv, cfg.game, spec.value("timeout_ms", 10000));
   }
   if(type == "search") {
      PolicyPtr base = make_provider(name + ":base", spec.at("base"), cfg, db);
      SearchConfig sc = SearchConfig::from_json(spec.value("search", json::object()));
      std::string ev = spec.value("evaluator", std::string("rollout"));
      LeafEvaluator evaluator;
      if(ev == "rollout")
         evaluator = rollout_evaluator(base, spec.value("rollouts", 1));
      else if(ev == "exact")
         evaluator = exact_evaluator(base);
      else if(ev == "value")
         evaluator = provider_value_evaluator(base);
      else
         throw ConfigError(str_cat("unknown leaf evaluator '", ev, "'"));
      return std::make_shared< SearchPolicy >(name, db, cfg.game, base, evaluator, sc);
   }
   throw ConfigError(str_cat("unknown provider type '", type, "'"));
}

inline Roster build_roster(const ExperimentConfig& cfg, const std::shared_ptr< const InstanceDB >& db)
{
   Roster r;
   for(const auto& s : cfg.roster) {
      std::vector< PolicyPtr > seeds;
      for(size_t i = 0; i < s.providers.size(); ++i) {
         try {
            seeds.push_back(make_provider(s.name, s.providers[i], cfg, db));
         } catch(const ProviderError& e) {
            throw ProviderError(str_cat("strategy ", s.name, "/", s.seed_labels[i], ": ", e.what()));
         }
      }
      r.push_back(std::move(seeds));
   }
   return r;
}

inline void ensure_dir(const fs::path& p)
{
   std::error_code ec;
   fs::create_directories(p, ec);
   if(ec)
      throw Error(str_cat("cannot create output directory ", p.string(), ": ", ec.message()));
}

inline void write_text(const fs::path& p, const std::string& text)
{
   std::ofstream f(p, std::ios::binary);
   if(!f)
      throw Error(str_cat("cannot write ", p.string()));
   f << text;
   if(!f)
      throw Error(str_cat("write failed for ", p.string()));
}

// ---------------------------------------------------------------------------
// Pipeline steps

struct GenInstancesResult {
   fs::path db_path;
   size_t count = 0;
   size_t distinct[2] = {0, 0};
};

inline GenInstancesResult cmd_gen_instances(const ExperimentConfig& cfg)
{
   ensure_dir(cfg.output_dir);
   InstanceDB db = enumerate_instances(cfg.constraints);
   GenInstancesResult r;
   r.db_path = cfg.output_dir / "instances.json";
   r.count = db.size();
   r.distinct[0] = db.distinct_valuations(0);
   r.distinct[1] = db.distinct_valuations(1);
   write_text(r.db_path, db.to_json().dump(1) + "\n");
   json summary{{"count", db.size()},
                {"distinct_valuations", {{"player1", r.distinct[0]}, {"player2", r.distinct[1]}}},
                {"reference_count", kReferenceInstanceCount},
                {"constraint_delta", db.constraints().delta_note(db.size())},
                {"constraints", db.constraints().to_json()},
                {"fingerprint", hex64(db.fingerprint())}};
   write_text(cfg.output_dir / "instances_summary.json", summary.dump(2) + "\n");
   return r;
}

inline PayoffTable empty_table(const ExperimentConfig& cfg, const InstanceDB& db)
{
   std::vector< std::string > names;
   std::vector< std::vector< std::string > > seeds;
   for(const auto& s : cfg.roster) {
      names.push_back(s.name);
      seeds.push_back(s.seed_labels);
   }
   PayoffTable t(names, seeds);
   t.header = {{"config_hash", cfg.hash()},
               {"game", cfg.game.to_string()},
               {"game_hash", hex64(fnv1a(cfg.game.to_string()))},
               {"db_hash", hex64(db.fingerprint())},
               {"n_sims", cfg.n_sims_per_entry}};
   return t;
}

struct SimulateResult {
   PayoffTable table;
   fs::path path;
   size_t missing = 0;
};

/// Estimates the payoff table, checkpointing each finished entry so an
/// interrupted run resumed with `resume` produces the same table.
inline SimulateResult cmd_simulate(const ExperimentConfig& cfg, bool resume, bool verbose = false)
{
   ensure_dir(cfg.output_dir);
   auto db = load_instances(cfg);
   Roster roster = build_roster(cfg, db);
   SimulateResult r{empty_table(cfg, *db), cfg.output_dir / "payoff_table.json", 0};
   EstimateOptions opt;
   opt.n_sims = cfg.n_sims_per_entry;
   opt.workers = cfg.workers;
   opt.checkpoint = (cfg.output_dir / "payoff_table.ckpt.jsonl").string();
   opt.resume = resume;
   if(verbose)
      opt.progress = [](size_t done, size_t total) { std::cerr << "\rentries " << done << "/" << total << std::flush; };
   fs::path header_path = cfg.output_dir / "payoff_table.ckpt.header.json";
   if(resume && fs::exists(header_path)) {
      std::ifstream f(header_path);
      json h = json::parse(f);
      if(h.value("config_hash", "") != cfg.hash())
         throw ConfigError("--resume: checkpoint was written by a different config");
   } else if(resume && fs::exists(opt.checkpoint)) {
      throw ConfigError("--resume: checkpoint has no header; rerun without --resume");
   }
   write_text(header_path, r.table.header.dump() + "\n");
   estimate_payoff_table(r.table, roster, *db, cfg.game, opt, Rng(cfg.master_seed));
   if(verbose)
      std::cerr << "\n";
   r.missing = r.table.missing().size();
   save_table(r.table, r.path.string());
   return r;
}

struct AnalyzeResult {
   BootstrapReport report;
   fs::path report_json, report_csv, dot;
};

inline PayoffTable load_matching_table(const ExperimentConfig& cfg)
{
   fs::path p = cfg.output_dir / "payoff_table.json";
   if(!fs::exists(p))
      throw IncompleteError(str_cat("no payoff table at ", p.string(), " (run simulate first)"));
   PayoffTable t = load_table(p.string());
   std::string h = t.header.value("config_hash", "");
   if(h != cfg.hash())
      throw ConfigError(str_cat("payoff table config hash ", h, " does not match this config (", cfg.hash(), ")"));
   t.require_complete();
   return t;
}

inline std::string csv_escape(const std::string& s)
{
   if(s.find_first_of(",\"\n") == std::string::npos)
      return s;
   std::string out = "\"";
   for(char c : s)
      out += c == '"' ? std::string("\"\"") : std::string(1, c);
   return out + "\"";
}

/// Bootstrap analysis of a complete table: report (JSON + CSV), per-strategy
/// histograms, aggregated best-response graph.
inline AnalyzeResult cmd_analyze(const ExperimentConfig& cfg)
{
   PayoffTable table = load_matching_table(cfg);
   BootstrapOptions opt;
   opt.n_replicates = cfg.n_replicates;
   opt.statistics = cfg.statistics;
   opt.eps_ent = cfg.eps_ent;
   opt.workers = cfg.workers;
   opt.keep_replicates = cfg.keep_replicates;
   AnalyzeResult r{bootstrap_run(table, opt, cfg.master_seed), {}, {}, {}};
   const auto& rep = r.report;
   ensure_dir(cfg.output_dir);

   json out{{"config_hash", cfg.hash()},
            {"n_replicates", rep.n_replicates},
            {"failures", rep.failures},
            {"failure_rate", static_cast< double >(rep.failures) / static_cast< double >(rep.n_replicates)},
            {"statistics", rep.to_json()}};
   r.report_json = cfg.output_dir / "report.json";
   write_text(r.report_json, out.dump(2) + "\n");

   std::string csv = "strategy";
   for(Statistic s : rep.statistics)
      csv += str_cat(",", statistic_name(s), ",", statistic_name(s), "_mean,", statistic_name(s), "_ci_lo,",
                     statistic_name(s), "_ci_hi");
   csv += "\n";
   for(size_t m = 0; m < rep.strategies.size(); ++m) {
      csv += csv_escape(rep.strategies[m]);
      for(size_t k = 0; k < rep.statistics.size(); ++k) {
         char nums[128];
         std::snprintf(nums, sizeof(nums), ",%.17g,%.17g,%.17g", rep.mean(k, m), rep.ci_lo(k, m), rep.ci_hi(k, m));
         csv += "," + format_ci(rep.mean(k, m), rep.halfwidth(k, m)) + nums;
      }
      csv += "\n";
   }
   r.report_csv = cfg.output_dir / "report.csv";
   write_text(r.report_csv, csv);

   fs::path hist_dir = cfg.output_dir / "histograms";
   ensure_dir(hist_dir);
   for(size_t k = 0; k < rep.statistics.size(); ++k)
      for(size_t m = 0; m < rep.strategies.size(); ++m) {
         auto h = Histogram::from_items(rep.summary[k][m].sketch.items(), cfg.histogram_bins);
         std::string text = "bin_lo,bin_hi,count\n";
         for(size_t b = 0; b < h.counts.size(); ++b) {
            char line[128];
            std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", h.edges[b], h.edges[b + 1], h.counts[b]);
            text += line;
         }
         std::string label = rep.strategies[m];
         for(auto& c : label)
            if(!std::isalnum(static_cast< unsigned char >(c)) && c != '-' && c != '_')
               c = '_';
         std::string fname = str_cat(statistic_name(rep.statistics[k]), "_", m, "_", label, ".csv");
         write_text(hist_dir / fname, text);
      }

   r.dot = cfg.output_dir / "br_graph.dot";
   write_text(r.dot, rep.br_graph.to_dot());

   if(cfg.keep_replicates) {
      std::string text = "replicate";
      for(Statistic s : rep.statistics)
         for(const auto& n : rep.strategies)
            text += "," + csv_escape(statistic_name(s) + ":" + n);
      text += "\n";
      for(size_t i = 0; i < rep.replicate_values.size(); ++i) {
         text += std::to_string(i);
         for(const auto& row : rep.replicate_values[i])
            for(double x : row) {
               char buf[32];
               std::snprintf(buf, sizeof(buf), ",%.17g", x);
               text += buf;
            }
         text += "\n";
      }
      write_text(cfg.output_dir / "replicates.csv", text);
   }
   return r;
}

struct SelfPlayTrainResult {
   SelfPlayResult result;
   fs::path policy_path, curve_path;
};

inline SelfPlayTrainResult cmd_selfplay_train(const ExperimentConfig& cfg)
{
   auto db = load_instances(cfg);
   fs::path dir = cfg.output_dir / "selfplay";
   ensure_dir(dir / "checkpoints");
   SelfPlayTrainResult r;
   r.result = self_play_train(*db, cfg.game, cfg.selfplay, Rng(cfg.master_seed),
                              [&](int episode, const TabularPolicy& p) {
                                 save_tabular(p, (dir / "checkpoints" / str_cat("policy_ep", episode, ".json")).string());
                              });
   r.policy_path = dir / "policy.json";
   save_tabular(*r.result.trained, r.policy_path.string());
   std::string curve = "episode,sum_regret\n";
   for(const auto& pt : r.result.curve) {
      char line[64];
      std::snprintf(line, sizeof(line), "%d,%.17g\n", pt.episode, pt.sum_regret);
      curve += line;
   }
   r.curve_path = dir / "curve.csv";
   write_text(r.curve_path, curve);
   return r;
}

struct PlayReport {
   std::vector< Transcript > transcripts;
   std::array< double, 2 > mean{0.0, 0.0};
};

inline const StrategySpec& find_strategy(const ExperimentConfig& cfg, const std::string& name)
{
   for(const auto& s : cfg.roster)
      if(s.name == name)
         return s;
   throw ConfigError(str_cat("unknown strategy '", name, "'"));
}

/// Plays n games of strategy a (first seat) against b, first seed of each.
inline PlayReport cmd_play(const ExperimentConfig& cfg, const std::string& a, const std::string& b, int n_games,
                           std::ostream* out = nullptr)
{
   if(n_games < 0)
      throw ConfigError("number of games must be >= 0");
   const auto& sa = find_strategy(cfg, a);
   const auto& sb = find_strategy(cfg, b);
   auto db = load_instances(cfg);
   PolicyPtr pa = make_provider(sa.name, sa.providers.front(), cfg, db);
   PolicyPtr pb = make_provider(sb.name, sb.providers.front(), cfg, db);
   PlayReport rep;
   Rng rng(cfg.master_seed);
   for(int g = 0; g < n_games; ++g) {
      Rng game_rng = rng.split(static_cast< uint64_t >(g));
      Transcript t;
      play_episode(db->sample(game_rng), cfg.game, *pa, *pb, game_rng, &t);
      rep.mean[0] += t.outcome.payoffs[0] / n_games;
      rep.mean[1] += t.outcome.payoffs[1] / n_games;
      if(out) {
         *out << "game " << g << " pool " << to_string(t.instance.pool) << " w1 " << to_string(t.instance.w1)
              << " w2 " << to_string(t.instance.w2) << ":";
         for(const auto& act : t.actions)
            *out << " " << act.to_string();
         if(t.chance_terminated)
            *out << " [terminated]";
         *out << " -> " << t.outcome.payoffs[0] << ", " << t.outcome.payoffs[1] << "\n";
      }
      rep.transcripts.push_back(std::move(t));
   }
   if(out)
      *out << a << " vs " << b << ": " << n_games << " games, mean payoffs " << rep.mean[0] << ", " << rep.mean[1]
           << "\n";
   return rep;
}

}  // namespace metagame

#endif  // METAGAME_EXPERIMENT_HPP
