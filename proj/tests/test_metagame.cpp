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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "metagame/instances.hpp"
#include "metagame/metagame.hpp"
#include "metagame/sketch.hpp"

using namespace metagame;
namespace fs = std::filesystem;

namespace {

const InstanceDB& default_db()
{
   static const InstanceDB db = enumerate_instances(InstanceConstraints{});
   return db;
}

class FailingPolicy : public PolicyProvider {
  public:
   [[nodiscard]] std::string name() const override { return "broken"; }
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      throw ProviderError("broken provider at " + s.key());
   }
};

// Table with deterministic entry means: mean1(p, q) = u[p][q], mean2 = v[p][q].
PayoffTable table_from(const std::vector< std::string >& names, const std::vector< std::vector< std::string > >& seeds,
                       const std::vector< std::vector< double > >& u, const std::vector< std::vector< double > >& v)
{
   PayoffTable t(names, seeds);
   for(size_t p = 0; p < t.num_policies(); ++p)
      for(size_t q = 0; q < t.num_policies(); ++q) {
         auto& e = t.entry(p, q);
         e.mean = {u[p][q], v[p][q]};
         e.n = 1;
      }
   return t;
}

}  // namespace

TEST(Entry, ToughAgainstSoftIsExactlyTen)
{
   EntryStats st = simulate_entry(*make_tough(), *make_soft(), default_db(), GameParams{10, 0.0, 1.0}, 2000, Rng(1));
   EXPECT_EQ(st.mean[0], 10.0);
   EXPECT_EQ(st.variance[0], 0.0);
}

TEST(Entry, UniformSelfPlaySeatsAgree)
{
   EntryStats st =
       simulate_entry(*make_uniform(), *make_uniform(), default_db(), GameParams{10, 0.0, 1.0}, 20000, Rng(2));
   double se = std::sqrt((st.variance[0] + st.variance[1]) / 20000.0);
   EXPECT_NEAR(st.mean[0], st.mean[1], 2.0 * se);
}

TEST(Table, LayoutAndCompleteness)
{
   PayoffTable t({"A", "B", "C"}, {{"x", "y"}, {"x", "y"}, {"x", "y"}});
   EXPECT_EQ(t.num_policies(), 6u);
   EXPECT_EQ(t.num_entries(), 36u);
   EXPECT_EQ(t.policy_of(3), (std::pair< size_t, size_t >{1, 1}));
   EXPECT_EQ(t.policy_label(4), "C/x");
   EXPECT_FALSE(t.complete());
   EXPECT_THROW(t.require_complete(), IncompleteError);
   EXPECT_THROW(symmetrized_policy_payoffs(t), IncompleteError);
}

TEST(Table, EstimateFillsEveryEntryAndSurvivesRoundTrip)
{
   PayoffTable t({"Uniform", "Tough", "Soft"}, {{"s0"}, {"s0"}, {"s0"}});
   Roster roster{{make_uniform()}, {make_tough()}, {make_soft()}};
   EstimateOptions opt;
   opt.n_sims = 200;
   estimate_payoff_table(t, roster, default_db(), GameParams{10, 0.0, 1.0}, opt, Rng(3));
   EXPECT_TRUE(t.complete());
   EXPECT_EQ(t.entry(1, 2).mean[0], 10.0);

   auto path = fs::temp_directory_path() / "metagame_table.json";
   t.header = {{"n_sims", 200}};
   save_table(t, path.string());
   PayoffTable back = load_table(path.string());
   EXPECT_EQ(back.to_json(), t.to_json());
   fs::remove(path);
}

TEST(Table, WorkerCountDoesNotChangeResults)
{
   Roster roster{{make_uniform(), make_soft()}, {make_tough()}};
   PayoffTable a({"A", "B"}, {{"s0", "s1"}, {"s0"}}), b = a;
   EstimateOptions opt;
   opt.n_sims = 100;
   estimate_payoff_table(a, roster, default_db(), GameParams{}, opt, Rng(4));
   opt.workers = 4;
   estimate_payoff_table(b, roster, default_db(), GameParams{}, opt, Rng(4));
   EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Table, ResumeReproducesTheUninterruptedTable)
{
   auto dir = fs::temp_directory_path() / "metagame_resume";
   fs::create_directories(dir);
   Roster roster{{make_uniform()}, {make_tough()}, {make_soft()}};
   auto layout = [] { return PayoffTable({"U", "T", "S"}, {{"s0"}, {"s0"}, {"s0"}}); };
   EstimateOptions opt;
   opt.n_sims = 150;
   opt.checkpoint = (dir / "full.jsonl").string();
   PayoffTable full = layout();
   estimate_payoff_table(full, roster, default_db(), GameParams{}, opt, Rng(5));

   // Interrupted run: only the first four finished entries plus a torn line.
   std::ifstream in(opt.checkpoint);
   std::ofstream partial(dir / "partial.jsonl");
   std::string line;
   for(int i = 0; i < 4 && std::getline(in, line); ++i)
      partial << line << "\n";
   partial << "{\"entry\": 7, \"n\":";
   partial.close();

   PayoffTable resumed = layout();
   opt.checkpoint = (dir / "partial.jsonl").string();
   opt.resume = true;
   estimate_payoff_table(resumed, roster, default_db(), GameParams{}, opt, Rng(5));
   EXPECT_EQ(resumed.to_json(), full.to_json());

   // The repaired checkpoint resumes to the same table again.
   PayoffTable again = layout();
   estimate_payoff_table(again, roster, default_db(), GameParams{}, opt, Rng(5));
   EXPECT_EQ(again.to_json(), full.to_json());
   fs::remove_all(dir);
}

TEST(Table, ProviderFailureMarksOnlyItsEntries)
{
   PayoffTable t({"Ok", "Broken"}, {{"s0"}, {"s0"}});
   Roster roster{{make_uniform()}, {std::make_shared< FailingPolicy >()}};
   EstimateOptions opt;
   opt.n_sims = 10;
   estimate_payoff_table(t, roster, default_db(), GameParams{}, opt, Rng(6));
   EXPECT_TRUE(t.entry(0, 0).present());
   EXPECT_FALSE(t.entry(0, 1).present());
   EXPECT_FALSE(t.entry(1, 0).present());
   EXPECT_EQ(t.missing().size(), 3u);
   try {
      t.require_complete();
      FAIL();
   } catch(const IncompleteError& e) {
      EXPECT_NE(std::string(e.what()).find("broken provider"), std::string::npos);
   }
}

TEST(Resample, SingleSeedAlwaysItself)
{
   for(uint64_t r = 0; r < 50; ++r) {
      auto plan = resample_seeds({1, 1}, 9, r);
      EXPECT_EQ(plan.seeds, (std::vector< std::vector< size_t > >{{0}, {0}}));
   }
}

TEST(Resample, DeterministicPerReplicate)
{
   EXPECT_EQ(resample_seeds({10, 4}, 42, 17).seeds, resample_seeds({10, 4}, 42, 17).seeds);
   EXPECT_NE(resample_seeds({10, 4}, 42, 17).seeds, resample_seeds({10, 4}, 42, 18).seeds);
}

TEST(Resample, MultiplicitiesAverageToOne)
{
   const uint64_t R = 1000000;
   std::vector< double > count(10, 0.0);
   for(uint64_t r = 0; r < R; ++r) {
      ResamplePlan plan = resample_seeds({10}, 7, r);
      for(size_t s : plan.seeds[0])
         count[s] += 1.0;
   }
   for(double c : count)
      EXPECT_NEAR(c / R, 1.0, 0.01);
}

TEST(MetaGame, SeatAveragedPayoffs)
{
   // A earns 10 when seated first against B and 0 when seated second.
   auto t = table_from({"A", "B"}, {{"s"}, {"s"}}, {{0, 10}, {0, 0}}, {{0, 0}, {0, 0}});
   auto g = build_meta_game(t, ResamplePlan::identity({1, 1})).game;
   EXPECT_DOUBLE_EQ(g.u[0][1], 5.0);
   EXPECT_DOUBLE_EQ(g.u[1][0], 0.0);
}

TEST(MetaGame, MultisetWeights)
{
   // Strategy A has three seeds with payoffs 3, 6, 9 against B (both seats).
   std::vector< std::vector< double > > u(4, std::vector< double >(4, 0.0)), v = u;
   for(size_t s = 0; s < 3; ++s) {
      u[s][3] = 3.0 * (s + 1);
      v[3][s] = 3.0 * (s + 1);
   }
   auto t = table_from({"A", "B"}, {{"w", "x", "y"}, {"z"}}, u, v);
   ResamplePlan plan;
   plan.seeds = {{0, 0, 2}, {0}};
   auto g = build_meta_game(t, plan).game;
   EXPECT_DOUBLE_EQ(g.u[0][1], 2.0 / 3.0 * 3.0 + 1.0 / 3.0 * 9.0);
   ResamplePlan bad;
   bad.seeds = {{0, 0}, {0}};
   EXPECT_THROW(build_meta_game(t, bad), Error);
}

TEST(Bootstrap, SingleSeedHasZeroWidth)
{
   auto t = table_from({"A", "B", "C"}, {{"s"}, {"s"}, {"s"}}, {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}},
                       {{0, 1, -1}, {-1, 0, 1}, {1, -1, 0}});
   BootstrapOptions opt;
   opt.n_replicates = 300;
   auto rep = bootstrap_run(t, opt, 3);
   for(size_t k = 0; k < rep.statistics.size(); ++k)
      for(size_t m = 0; m < 3; ++m) {
         EXPECT_EQ(rep.halfwidth(k, m), 0.0);
         EXPECT_DOUBLE_EQ(rep.mean(k, m), rep.full_sample[k][m]);
      }
   EXPECT_EQ(format_ci(rep.mean(0, 0), rep.halfwidth(0, 0)), "0.000\xC2\xB1" "0.000");
}

TEST(Bootstrap, UniformScoreOnFixedToy)
{
   auto t = table_from({"A", "B"}, {{"s"}, {"s"}}, {{1, 2}, {4, 0}}, {{1, 3}, {6, 0}});
   BootstrapOptions opt;
   opt.n_replicates = 50;
   opt.statistics = {Statistic::uniform_score};
   auto rep = bootstrap_run(t, opt, 1);
   // u(A,A) = 1, u(A,B) = (2 + 6) / 2 = 4.
   EXPECT_DOUBLE_EQ(rep.mean(0, 0), 2.5);
   auto j = rep.to_json();
   EXPECT_EQ(j.at("uniform_score").at("A").at("n_replicates"), 50);
}

TEST(Bootstrap, IndependentOfWorkersAndChunking)
{
   std::mt19937_64 gen(1);
   std::uniform_real_distribution< double > d(-1, 1);
   std::vector< std::vector< double > > u(6, std::vector< double >(6)), v = u;
   for(size_t p = 0; p < 6; ++p)
      for(size_t q = 0; q < 6; ++q) {
         u[p][q] = d(gen);
         v[p][q] = d(gen);
      }
   auto t = table_from({"A", "B", "C"}, {{"0", "1"}, {"0", "1"}, {"0", "1"}}, u, v);
   BootstrapOptions opt;
   opt.n_replicates = 1000;
   opt.keep_replicates = true;
   auto a = bootstrap_run(t, opt, 11);
   opt.workers = 3;
   auto b = bootstrap_run(t, opt, 11);
   EXPECT_EQ(a.to_json(), b.to_json());
   EXPECT_EQ(a.replicate_values, b.replicate_values);
   EXPECT_EQ(a.br_graph.to_dot(), b.br_graph.to_dot());
   // Replicate r is a pure function of (master seed, r).
   auto g = build_meta_game(t, resample_seeds({2, 2, 2}, 11, 123)).game;
   EXPECT_DOUBLE_EQ(a.replicate_values[123][1][0], uniform_score(g, 0));
}

TEST(Bootstrap, IncompleteTableRefused)
{
   PayoffTable t({"A"}, {{"s"}});
   EXPECT_THROW(bootstrap_run(t, BootstrapOptions{}, 1), IncompleteError);
}

TEST(Sketch, ExactBelowCapacity)
{
   QuantileSketch s(64);
   for(int i = 1; i <= 40; ++i)
      s.add(41 - i);
   EXPECT_TRUE(s.exact());
   EXPECT_EQ(s.quantile(0.025), 1.0);
   EXPECT_EQ(s.quantile(0.5), 20.0);
   EXPECT_EQ(s.quantile(0.975), 39.0);
}

TEST(Sketch, RankErrorWithinBound)
{
   QuantileSketch a(256), b(256);
   std::vector< double > all;
   std::mt19937_64 gen(3);
   std::normal_distribution< double > d;
   for(int i = 0; i < 20000; ++i) {
      double x = d(gen);
      (i % 2 ? a : b).add(x);
      all.push_back(x);
   }
   a.merge(b);
   std::sort(all.begin(), all.end());
   EXPECT_EQ(a.count(), all.size());
   for(double q : {0.025, 0.5, 0.975}) {
      double x = a.quantile(q);
      double rank = std::lower_bound(all.begin(), all.end(), x) - all.begin() + 1;
      EXPECT_LE(std::abs(rank - std::ceil(q * all.size())), a.rank_error_bound() + 1);
   }
}

TEST(Sketch, RunningStatsMerge)
{
   RunningStats a, b, all;
   for(int i = 0; i < 100; ++i) {
      double x = std::sin(i);
      (i < 30 ? a : b).add(x);
      all.add(x);
   }
   a.merge(b);
   EXPECT_NEAR(a.mean(), all.mean(), 1e-12);
   EXPECT_NEAR(a.variance(), all.variance(), 1e-12);
}

TEST(Histogram, CountsSumToItems)
{
   QuantileSketch s;
   for(int i = 0; i < 1000; ++i)
      s.add(i % 17);
   auto h = Histogram::from_items(s.items(), 10);
   double total = 0.0;
   for(double c : h.counts)
      total += c;
   EXPECT_DOUBLE_EQ(total, 1000.0);
   EXPECT_EQ(h.edges.size(), 11u);
}
