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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "metagame/experiment.hpp"

using namespace metagame;
namespace fs = std::filesystem;

namespace {

struct RunResult {
   int code = -1;
   std::string out;
};

RunResult run(const std::string& args)
{
   std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
   RunResult r;
   FILE* pipe = popen(cmd.c_str(), "r");
   if(!pipe)
      return r;
   std::array< char, 4096 > buf;
   size_t n;
   while((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
      r.out.append(buf.data(), n);
   int status = pclose(pipe);
   r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
   return r;
}

std::string slurp(const fs::path& p)
{
   std::ifstream f(p, std::ios::binary);
   return {std::istreambuf_iterator< char >(f), {}};
}

class CliTest : public ::testing::Test {
  protected:
   void SetUp() override
   {
      dir_ = fs::temp_directory_path() /
             ("metagame_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
      fs::remove_all(dir_);
      fs::create_directories(dir_);
   }
   void TearDown() override { fs::remove_all(dir_); }

   std::string write_config(json j, const std::string& name = "config.json")
   {
      if(!j.contains("output_dir"))
         j["output_dir"] = "out";
      auto p = dir_ / name;
      std::ofstream(p) << j.dump(2);
      return p.string();
   }

   static json heuristics(uint64_t n_sims = 300)
   {
      return {{"game", {{"max_rounds", 10}, {"terminate_prob", 0.0}, {"discount", 1.0}}},
              {"roster",
               {{{"name", "Uniform"}, {"provider", {{"type", "heuristic"}, {"policy", "uniform"}}}},
                {{"name", "Tough"}, {"provider", {{"type", "heuristic"}, {"policy", "tough"}}}},
                {{"name", "Soft"}, {"provider", {{"type", "heuristic"}, {"policy", "soft"}}}}}},
              {"n_sims_per_entry", n_sims},
              {"n_replicates", 200},
              {"master_seed", 11}};
   }

   static json toy()
   {
      json j = heuristics(200);
      j["game"] = {{"max_rounds", 2}, {"terminate_prob", 0.0}, {"discount", 1.0}};
      j["instances"] = {{"inline",
                         {{{"pool", {1, 1, 1}}, {"w1", {2, 3, 5}}, {"w2", {5, 5, 0}}},
                          {{"pool", {1, 1, 1}}, {"w1", {2, 3, 5}}, {"w2", {0, 5, 5}}}}}};
      return j;
   }

   fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenInstancesSummaryAndDeterminism)
{
   std::string cfg = write_config(heuristics());
   auto r = run("gen-instances --config " + cfg);
   ASSERT_EQ(r.code, 0) << r.out;
   json summary = json::parse(slurp(dir_ / "out" / "instances_summary.json"));
   EXPECT_EQ(summary.at("distinct_valuations").at("player1"), 142);
   EXPECT_EQ(summary.at("distinct_valuations").at("player2"), 142);
   std::string first = slurp(dir_ / "out" / "instances.json");
   ASSERT_EQ(run("gen-instances --config " + cfg).code, 0);
   EXPECT_EQ(slurp(dir_ / "out" / "instances.json"), first);
}

TEST_F(CliTest, GenInstancesEchoesCustomConstraints)
{
   json j = heuristics();
   j["instances"] = {{"constraints", {{"max_total_items", 5}, {"max_value", 6}}}};
   ASSERT_EQ(run("gen-instances --config " + write_config(j)).code, 0);
   json db = json::parse(slurp(dir_ / "out" / "instances.json"));
   EXPECT_EQ(db.at("constraints").at("max_total_items"), 5);
   EXPECT_EQ(db.at("constraints").at("max_value"), 6);
}

TEST_F(CliTest, SimulateAnalyzePipeline)
{
   std::string cfg = write_config(heuristics());
   auto sim = run("simulate --config " + cfg + " --workers 2");
   ASSERT_EQ(sim.code, 0) << sim.out;
   PayoffTable t = load_table((dir_ / "out" / "payoff_table.json").string());
   EXPECT_EQ(t.num_entries(), 9u);
   EXPECT_EQ(t.entry(1, 2).mean[0], 10.0);

   auto ana = run("analyze --config " + cfg);
   ASSERT_EQ(ana.code, 0) << ana.out;
   json rep = json::parse(slurp(dir_ / "out" / "report.json"));
   for(const auto& [stat, per] : rep.at("statistics").items())
      for(const auto& [name, v] : per.items())
         EXPECT_EQ(v.at("ci_lo"), v.at("ci_hi")) << stat << " " << name;
   std::string csv = slurp(dir_ / "out" / "report.csv");
   EXPECT_NE(csv.find("\xC2\xB1" "0.000"), std::string::npos);
   std::string dot = slurp(dir_ / "out" / "br_graph.dot");
   EXPECT_EQ(dot.rfind("digraph best_response {", 0), 0u);
   EXPECT_EQ(std::count(dot.begin(), dot.end(), '{'), std::count(dot.begin(), dot.end(), '}'));
   EXPECT_NE(dot.find("\"Soft\" -> \"Tough\" [label=\"1.000\""), std::string::npos);
   EXPECT_TRUE(fs::exists(dir_ / "out" / "histograms" / "ne_regret_0_Uniform.csv"));
}

TEST_F(CliTest, ResumeMatchesUninterruptedRun)
{
   std::string cfg = write_config(heuristics(200));
   ASSERT_EQ(run("simulate --config " + cfg).code, 0);
   std::string full = slurp(dir_ / "out" / "payoff_table.json");
   // Keep three checkpoint lines, as if the run had been killed.
   auto ckpt = dir_ / "out" / "payoff_table.ckpt.jsonl";
   std::istringstream lines(slurp(ckpt));
   std::string line, kept;
   for(int i = 0; i < 3 && std::getline(lines, line); ++i)
      kept += line + "\n";
   std::ofstream(ckpt, std::ios::trunc) << kept;
   fs::remove(dir_ / "out" / "payoff_table.json");
   ASSERT_EQ(run("simulate --config " + cfg + " --resume --workers 3").code, 0);
   EXPECT_EQ(slurp(dir_ / "out" / "payoff_table.json"), full);
}

TEST_F(CliTest, AnalyzeRefusesForeignOrMissingTables)
{
   std::string cfg = write_config(heuristics());
   EXPECT_EQ(run("analyze --config " + cfg).code, 3);
   ASSERT_EQ(run("simulate --config " + cfg).code, 0);
   EXPECT_EQ(run("analyze --config " + cfg + " --seed 12").code, 2);
}

TEST_F(CliTest, ConfigErrors)
{
   json j = heuristics();
   j.erase("master_seed");
   std::string cfg = write_config(j);
   EXPECT_EQ(run("simulate --config " + cfg).code, 2);
   EXPECT_EQ(run("simulate --config " + cfg + " --seed 3 --out " + (dir_ / "o2").string()).code, 0);
   json bad = heuristics();
   bad["roster"] = json::array();
   EXPECT_EQ(run("simulate --config " + write_config(bad, "bad.json")).code, 2);
   json missing = heuristics();
   missing["roster"][0]["provider"] = {{"type", "tabular"}, {"path", "nope.json"}};
   EXPECT_EQ(run("simulate --config " + write_config(missing, "missing.json")).code, 2);
   EXPECT_EQ(run("simulate --config " + (dir_ / "absent.json").string()).code, 2);
   EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(CliTest, ProviderFailuresExitWithProviderCode)
{
   json j = heuristics(20);
   j["roster"][0]["provider"] = {{"type", "external"}, {"command", {ECHO_POLICY_PATH, "--garbage"}}};
   auto r = run("simulate --config " + write_config(j));
   EXPECT_EQ(r.code, 4) << r.out;
   PayoffTable t = load_table((dir_ / "out" / "payoff_table.json").string());
   EXPECT_EQ(t.missing().size(), 5u);  // every entry involving the broken provider
   json launch = heuristics(20);
   launch["roster"][0]["provider"] = {{"type", "external"}, {"command", {"/nonexistent/binary"}}};
   EXPECT_EQ(run("simulate --config " + write_config(launch, "launch.json")).code, 4);
}

TEST_F(CliTest, ExternalProviderInPipeline)
{
   json j = heuristics(50);
   j["roster"][0]["provider"] = {{"type", "external"}, {"command", {ECHO_POLICY_PATH}}};
   auto r = run("simulate --config " + write_config(j));
   ASSERT_EQ(r.code, 0) << r.out;
}

TEST_F(CliTest, SelfPlayTrainZeroEpisodes)
{
   json j = toy();
   j["selfplay"] = {{"episodes", 0}};
   ASSERT_EQ(run("selfplay-train --config " + write_config(j)).code, 0);
   TabularPolicy p = load_tabular((dir_ / "out" / "selfplay" / "policy.json").string());
   EXPECT_EQ(p.size(), 0u);
}

TEST_F(CliTest, SelfPlayTrainCurveAndDeterminism)
{
   json j = toy();
   j["selfplay"] = {{"episodes", 600}, {"delayed_period", 50}, {"checkpoint_every", 200}};
   std::string cfg = write_config(j);
   auto r = run("selfplay-train --config " + cfg);
   ASSERT_EQ(r.code, 0) << r.out;
   std::istringstream curve(slurp(dir_ / "out" / "selfplay" / "curve.csv"));
   std::string line;
   std::vector< double > regrets;
   std::getline(curve, line);
   while(std::getline(curve, line))
      regrets.push_back(std::stod(line.substr(line.find(',') + 1)));
   ASSERT_EQ(regrets.size(), 4u);
   EXPECT_LT(regrets.back(), regrets.front());
   std::string ckpt = slurp(dir_ / "out" / "selfplay" / "checkpoints" / "policy_ep400.json");
   ASSERT_EQ(run("selfplay-train --config " + cfg).code, 0);
   EXPECT_EQ(slurp(dir_ / "out" / "selfplay" / "checkpoints" / "policy_ep400.json"), ckpt);
}

TEST_F(CliTest, SelfPlaySizeGuard)
{
   json j = heuristics();
   j["selfplay"] = {{"episodes", 1}};
   EXPECT_EQ(run("selfplay-train --config " + write_config(j)).code, 2);
}

TEST_F(CliTest, PlayToughAgainstSoft)
{
   std::string cfg = write_config(heuristics());
   auto r = run("play --config " + cfg + " Tough Soft -n 10");
   ASSERT_EQ(r.code, 0) << r.out;
   EXPECT_NE(r.out.find("mean payoffs 10, "), std::string::npos) << r.out;
   EXPECT_EQ(run("play --config " + cfg + " Tough Soft -n 0").code, 0);
   EXPECT_EQ(run("play --config " + cfg + " Tough Nobody").code, 2);

   ExperimentConfig c = load_config(cfg);
   PlayReport rep = cmd_play(c, "Tough", "Soft", 10);
   ASSERT_EQ(rep.transcripts.size(), 10u);
   for(const auto& t : rep.transcripts) {
      EXPECT_EQ(t.outcome.agreement_round, 1);
      ASSERT_EQ(t.actions.size(), 2u);
      EXPECT_TRUE(t.actions.back().agree);
   }
}

TEST_F(CliTest, PlayTranscriptsReplay)
{
   ExperimentConfig c = load_config(write_config(heuristics()));
   PlayReport rep = cmd_play(c, "Uniform", "Soft", 25);
   for(const auto& t : rep.transcripts)
      EXPECT_EQ(replay(t, c.game).payoffs, t.outcome.payoffs);
   EXPECT_TRUE(cmd_play(c, "Uniform", "Soft", 0).transcripts.empty());
}

TEST_F(CliTest, ShippedConfigsParse)
{
   for(const char* name : {"barg10.json", "barg30.json", "toy_selfplay.json"}) {
      ExperimentConfig c = load_config(std::string(SOURCE_DIR) + "/configs/" + name);
      EXPECT_FALSE(c.roster.empty()) << name;
   }
   ExperimentConfig b30 = load_config(std::string(SOURCE_DIR) + "/configs/barg30.json");
   EXPECT_EQ(b30.game, (GameParams{30, 0.125, 0.935}));
}
