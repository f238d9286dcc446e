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

// metagame: command-line front end.
//
//   metagame gen-instances  --config C [--out DIR]
//   metagame simulate       --config C [--seed S] [--workers N] [--out DIR] [--resume]
//   metagame analyze        --config C [--seed S] [--workers N] [--out DIR]
//   metagame selfplay-train --config C [--seed S] [--out DIR]
//   metagame play           --config C A B [-n GAMES]
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 incomplete
// inputs, 4 provider/protocol failure.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "metagame/experiment.hpp"

namespace mg = metagame;

int main(int argc, char** argv)
{
   CLI::App app{"Empirical meta-game evaluation of bargaining agents"};
   app.require_subcommand(1);

   std::string config_path;
   std::optional< uint64_t > seed;
   std::optional< size_t > workers;
   std::optional< std::string > out;
   bool resume = false;
   bool verbose = false;

   auto add_common = [&](CLI::App* sub) {
      sub->add_option("--config", config_path, "experiment config (JSON)")->required();
      sub->add_option("--seed", seed, "master seed (overrides the config)");
      sub->add_option("--workers", workers, "worker threads");
      sub->add_option("--out", out, "output directory (overrides the config)");
      sub->add_flag("-v,--verbose", verbose, "progress on stderr");
   };

   auto* gen = app.add_subcommand("gen-instances", "enumerate the instance database");
   add_common(gen);
   auto* sim = app.add_subcommand("simulate", "estimate the payoff table");
   add_common(sim);
   sim->add_flag("--resume", resume, "continue from the entry checkpoint");
   auto* ana = app.add_subcommand("analyze", "bootstrap statistics over a payoff table");
   add_common(ana);
   auto* spt = app.add_subcommand("selfplay-train", "tabular self-play with search");
   add_common(spt);
   auto* play = app.add_subcommand("play", "play one matchup and print transcripts");
   add_common(play);
   std::string strat_a, strat_b;
   int n_games = 10;
   play->add_option("A", strat_a, "first-seat strategy")->required();
   play->add_option("B", strat_b, "second-seat strategy")->required();
   play->add_option("-n,--games", n_games, "number of games");

   try {
      app.parse(argc, argv);
   } catch(const CLI::ParseError& e) {
      int rc = app.exit(e);
      return rc == 0 ? 0 : 2;
   }

   try {
      mg::Overrides ov{seed, workers, out};
      if(*gen) {
         // gen-instances needs no roster or seed.
         mg::json j;
         {
            std::ifstream f(config_path);
            if(!f)
               throw mg::ConfigError("cannot read config " + config_path);
            f >> j;
         }
         mg::ExperimentConfig cfg;
         cfg.base_dir = mg::fs::path(config_path).parent_path();
         if(j.contains("instances") && j["instances"].contains("constraints"))
            cfg.constraints = mg::InstanceConstraints::from_json(j["instances"]["constraints"]);
         cfg.output_dir = out ? mg::fs::path(*out) : cfg.resolve(j.value("output_dir", std::string("out")));
         auto r = mg::cmd_gen_instances(cfg);
         std::cout << "wrote " << r.db_path.string() << ": " << r.count << " instances, " << r.distinct[0] << "/"
                   << r.distinct[1] << " distinct valuation vectors (player 1/2)\n";
         return 0;
      }
      mg::ExperimentConfig cfg = mg::load_config(config_path, ov);
      if(*sim) {
         auto r = mg::cmd_simulate(cfg, resume, verbose);
         std::cout << "wrote " << r.path.string() << " (" << r.table.num_entries() << " entries, " << r.missing
                   << " missing)\n";
         if(r.missing > 0) {
            std::cerr << "error: " << r.missing << " entries failed; rerun with --resume after fixing providers\n";
            return 4;
         }
         return 0;
      }
      if(*ana) {
         auto r = mg::cmd_analyze(cfg);
         const auto& rep = r.report;
         for(size_t k = 0; k < rep.statistics.size(); ++k) {
            std::cout << mg::statistic_name(rep.statistics[k]) << "\n";
            for(size_t m = 0; m < rep.strategies.size(); ++m)
               std::cout << "  " << rep.strategies[m] << "  " << mg::format_ci(rep.mean(k, m), rep.halfwidth(k, m))
                         << "\n";
         }
         std::cout << "failures: " << rep.failures << "/" << rep.n_replicates << "\n"
                   << "wrote " << r.report_json.string() << ", " << r.report_csv.string() << ", " << r.dot.string()
                   << "\n";
         return 0;
      }
      if(*spt) {
         auto r = mg::cmd_selfplay_train(cfg);
         std::cout << "wrote " << r.policy_path.string() << " and " << r.curve_path.string() << "\n";
         for(const auto& pt : r.result.curve)
            std::cout << "  episode " << pt.episode << "  sum_regret " << pt.sum_regret << "\n";
         return 0;
      }
      if(*play) {
         mg::cmd_play(cfg, strat_a, strat_b, n_games, &std::cout);
         return 0;
      }
   } catch(const mg::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
   } catch(const mg::IncompleteError& e) {
      std::cerr << "incomplete input: " << e.what() << "\n";
      return 3;
   } catch(const mg::ProviderError& e) {
      std::cerr << "provider error: " << e.what() << "\n";
      return 4;
   } catch(const nlohmann::json::exception& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
   } catch(const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
   }
   return 0;
}
