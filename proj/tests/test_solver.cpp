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

#include <cmath>
#include <numbers>
#include <random>

#include "metagame/lp.hpp"
#include "metagame/solver.hpp"
#include "oracles.hpp"

using namespace metagame;

namespace {

using Matrix = std::vector< std::vector< double > >;

const Matrix kRps{{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
const Matrix kCoordination{{1, 0}, {0, 1}};
const Matrix kUnequal{{3, 0}, {0, 1}};

Matrix random_game(std::mt19937_64& gen, int M, int lo, int hi)
{
   std::uniform_int_distribution< int > pay(lo, hi);
   Matrix u(M, std::vector< double >(M));
   for(auto& row : u)
      for(auto& x : row)
         x = pay(gen);
   return u;
}

void expect_certificate(const SymmetricGame& g, const SolveResult& r)
{
   double tol = 1e-6 * g.span() + 1e-12;
   EXPECT_LE(regret(r.sigma, r.sigma, g), tol);
   for(size_t i : r.support)
      EXPECT_NEAR(r.payoffs[i], r.u_star, tol);
   for(size_t i = 0; i < g.size(); ++i)
      EXPECT_LE(r.payoffs[i], r.u_star + tol);
}

}  // namespace

TEST(Lp, SolvesASmallProgram)
{
   // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  ->  (1.6, 1.2)
   lp::Problem p(2);
   p.objective = {1.0, 1.0};
   p.add({1.0, 2.0}, lp::Sense::le, 4.0);
   p.add({3.0, 1.0}, lp::Sense::le, 6.0);
   auto s = lp::solve(p);
   ASSERT_EQ(s.status, lp::Status::optimal);
   EXPECT_NEAR(s.x[0], 1.6, 1e-9);
   EXPECT_NEAR(s.x[1], 1.2, 1e-9);
   EXPECT_NEAR(s.objective, 2.8, 1e-9);
}

TEST(Lp, DetectsInfeasibility)
{
   lp::Problem p(1);
   p.objective = {1.0};
   p.add({1.0}, lp::Sense::le, 1.0);
   p.add({1.0}, lp::Sense::ge, 2.0);
   EXPECT_EQ(lp::solve(p).status, lp::Status::infeasible);
}

TEST(Regret, ZeroForBestResponseAndEquilibrium)
{
   SymmetricGame g(kRps);
   MixedStrategy sigma{0.5, 0.3, 0.2};
   // Best pure response to sigma: the row with the highest payoff.
   size_t best = 0;
   for(size_t i = 1; i < 3; ++i)
      if(g.payoff_vs(i, sigma) > g.payoff_vs(best, sigma))
         best = i;
   EXPECT_NEAR(regret(pure(3, best), sigma, g), 0.0, 1e-12);
   MixedStrategy u3(3, 1.0 / 3.0);
   EXPECT_NEAR(sum_regret(u3, u3, g), 0.0, 1e-12);
}

TEST(Regret, CoordinationMismatch)
{
   SymmetricGame g(kCoordination);
   EXPECT_DOUBLE_EQ(sum_regret(pure(2, 0), pure(2, 1), g), 2.0);
   EXPECT_THROW(regret({0.5, 0.6}, {0.5, 0.5}, g), Error);
}

TEST(MaxEntropyNe, RockPaperScissors)
{
   SymmetricGame g(kRps);
   auto r = max_entropy_ne(g);
   for(double x : r.sigma)
      EXPECT_NEAR(x, 1.0 / 3.0, 1e-9);
   EXPECT_NEAR(r.entropy, std::log(3.0), 0.05);
   expect_certificate(g, r);
}

TEST(MaxEntropyNe, CoordinationPicksTheMixedEquilibrium)
{
   SymmetricGame g(kCoordination);
   auto r = max_entropy_ne(g);
   EXPECT_NEAR(r.sigma[0], 0.5, 1e-9);
   EXPECT_NEAR(r.entropy, std::log(2.0), 1e-9);
}

TEST(MaxEntropyNe, UnequalCoordination)
{
   SymmetricGame g(kUnequal);
   auto r = max_entropy_ne(g);
   EXPECT_NEAR(r.sigma[0], 0.25, 1e-9);
   EXPECT_NEAR(r.sigma[1], 0.75, 1e-9);
   // Independent check: grid search over the NE set at step 1e-4.
   EXPECT_NEAR(r.entropy, oracle::grid_max_entropy_ne(kUnequal, 1e-4), 1e-9);
}

TEST(MaxEntropyNe, SegmentCount)
{
   EXPECT_EQ(segments_for(17, 0.05), 126);
   Matrix u(17, std::vector< double >(17, 0.0));
   for(int i = 0; i < 17; ++i)
      u[i][i] = 1.0;
   auto r = max_entropy_ne(SymmetricGame(u), 0.05);
   EXPECT_EQ(r.segments, 126);
   EXPECT_NEAR(r.gap, 17.0 / (std::numbers::e * 126), 1e-12);
   EXPECT_NEAR(r.entropy, std::log(17.0), 1e-6);
}

TEST(MaxEntropyNe, MatchesGridOracleOnSmallGames)
{
   std::mt19937_64 gen(2024);
   for(int t = 0; t < 300; ++t) {
      int M = 2 + t % 2;
      Matrix u = random_game(gen, M, -3, 3);
      SymmetricGame g(u);
      auto r = max_entropy_ne(g, 0.05);
      expect_certificate(g, r);
      EXPECT_LE(r.entropy_lower_bound, r.entropy + 1e-9);
      EXPECT_NEAR(r.entropy, oracle::grid_max_entropy_ne(u, 1e-3), 0.05) << "game " << t;
   }
}

TEST(MaxEntropyNe, LowerBoundMonotoneInSegments)
{
   std::mt19937_64 gen(5);
   for(int t = 0; t < 40; ++t) {
      Matrix u = random_game(gen, 4, -5, 5);
      SymmetricGame g(u);
      double prev = -1.0;
      for(int K : {2, 4, 8, 16, 32}) {
         auto r = max_entropy_ne(g, 0.05, K);
         EXPECT_GE(r.entropy_lower_bound, prev - 1e-9);
         prev = r.entropy_lower_bound;
      }
   }
}

TEST(MaxEntropyNe, ShiftAndScaleCovariance)
{
   std::mt19937_64 gen(77);
   for(int t = 0; t < 40; ++t) {
      Matrix u = random_game(gen, 4, -4, 4);
      Matrix shifted = u, scaled = u;
      for(size_t i = 0; i < u.size(); ++i)
         for(size_t j = 0; j < u.size(); ++j) {
            shifted[i][j] += 7.5;
            scaled[i][j] *= 3.0;
         }
      SymmetricGame g(u), gs(shifted), gx(scaled);
      auto r = max_entropy_ne(g), rs = max_entropy_ne(gs), rx = max_entropy_ne(gx);
      EXPECT_EQ(r.support, rs.support);
      EXPECT_EQ(r.support, rx.support);
      for(size_t m = 0; m < u.size(); ++m) {
         EXPECT_NEAR(ne_regret_score(gs, m, rs.sigma), ne_regret_score(g, m, r.sigma), 1e-6);
         EXPECT_NEAR(ne_regret_score(gx, m, rx.sigma), 3.0 * ne_regret_score(g, m, r.sigma), 1e-6);
         EXPECT_EQ(best_responses(gs, m), best_responses(g, m));
         EXPECT_EQ(best_responses(gx, m), best_responses(g, m));
      }
   }
}

TEST(MaxEntropyNe, ConstantGame)
{
   SymmetricGame g(Matrix(3, std::vector< double >(3, 2.5)));
   auto r = max_entropy_ne(g);
   EXPECT_NEAR(r.entropy, std::log(3.0), 0.05);
   EXPECT_EQ(r.to_json().at("support").size(), 3u);
}

TEST(Piecewise, DeviationBound)
{
   double prev = 0.0;
   for(int K : {1, 2, 4, 8, 16, 32, 64, 128}) {
      double dev = piecewise_bound_check(K);
      EXPECT_LE(dev, 1.0 / (std::numbers::e * K) + 1e-9);
      if(prev > 0.0) {
         EXPECT_LE(dev, prev / 2.0 * (1.0 + 1e-3));
      }
      prev = dev;
   }
}

TEST(Piecewise, ChordsLieAboveTheFunction)
{
   PiecewiseEntropy pw(10);
   for(int i = 0; i <= 1000; ++i) {
      double x = i / 1000.0;
      EXPECT_GE(pw.envelope(x), xlogx(x) - 1e-15);
   }
}

TEST(Bimatrix, MatchingPennies)
{
   Matrix A{{1, -1}, {-1, 1}}, B{{-1, 1}, {1, -1}};
   auto r = max_entropy_bimatrix_ne(A, B);
   EXPECT_NEAR(r.row[0], 0.5, 1e-9);
   EXPECT_NEAR(r.col[0], 0.5, 1e-9);
   EXPECT_NEAR(r.entropy, 2.0 * std::log(2.0), 1e-9);
}

TEST(Bimatrix, AgreesWithSymmetricSolverOnSymmetricGames)
{
   auto r = max_entropy_bimatrix_ne(kUnequal, kUnequal);
   EXPECT_NEAR(r.row[0], 0.25, 1e-9);
   EXPECT_NEAR(r.col[0], 0.25, 1e-9);
}

TEST(NeRegret, ScoresFromTheSolution)
{
   // Third strategy is strictly dominated.
   Matrix u{{3, 0, 2}, {0, 1, 0.5}, {-1, -1, -1}};
   SymmetricGame g(u);
   auto r = max_entropy_ne(g);
   EXPECT_NEAR(r.sigma[0], 0.25, 1e-9);
   EXPECT_NEAR(r.sigma[1], 0.75, 1e-9);
   EXPECT_NEAR(ne_regret_score(g, 0, r.sigma), 0.0, 1e-9);
   EXPECT_NEAR(ne_regret_score(g, 1, r.sigma), 0.0, 1e-9);
   EXPECT_GT(ne_regret_score(g, 2, r.sigma), 0.0);
   EXPECT_NEAR(ne_regret_score(g, 2, r.sigma), r.u_star - r.payoffs[2], 1e-12);
   EXPECT_THROW(ne_regret_score(g, 0, {0.5, 0.5}), Error);
}

TEST(UniformScore, RowMeans)
{
   SymmetricGame g(Matrix{{1, 2}, {0, 0}});
   EXPECT_DOUBLE_EQ(uniform_score(g, 0), 1.5);
   EXPECT_DOUBLE_EQ(uniform_score(g, 0, false), 2.0);
   SymmetricGame c(Matrix(3, std::vector< double >(3, 4.0)));
   for(size_t m = 0; m < 3; ++m)
      EXPECT_DOUBLE_EQ(uniform_score(c, m), 4.0);
}

TEST(UniformScore, InvariantUnderRelabeling)
{
   Matrix u{{1, 2, 3}, {4, 5, 6}, {7, 8, 0}};
   std::vector< size_t > perm{2, 0, 1};
   Matrix v(3, std::vector< double >(3));
   for(size_t i = 0; i < 3; ++i)
      for(size_t j = 0; j < 3; ++j)
         v[i][j] = u[perm[i]][perm[j]];
   for(size_t i = 0; i < 3; ++i)
      EXPECT_DOUBLE_EQ(uniform_score(SymmetricGame(v), i), uniform_score(SymmetricGame(u), perm[i]));
}

TEST(NeNbs, Examples)
{
   SymmetricGame g(kCoordination);
   EXPECT_DOUBLE_EQ(ne_nbs(g, 0, {0.5, 0.5}), 0.25);
   EXPECT_DOUBLE_EQ(ne_nbs(g, 0, pure(2, 0)), 1.0);
   SymmetricGame h(Matrix{{0, 3}, {2, 1}});
   EXPECT_DOUBLE_EQ(ne_nbs(h, 0, pure(2, 0)), 0.0);
   EXPECT_DOUBLE_EQ(ne_nbs(h, 1, pure(2, 1)), 1.0);
}

TEST(BrGraph, SingleGameUnitEdges)
{
   BestResponseGraph graph({"A", "B", "C"});
   graph.add(SymmetricGame(kRps, {"A", "B", "C"}));
   for(size_t i = 0; i < 3; ++i) {
      double out = 0.0;
      for(size_t j = 0; j < 3; ++j)
         out += graph.weight(i, j);
      EXPECT_DOUBLE_EQ(out, 1.0);
   }
   EXPECT_DOUBLE_EQ(graph.weight(0, 1), 1.0);  // paper beats rock
   EXPECT_NE(graph.to_dot().find("\"A\" -> \"B\" [label=\"1.000\""), std::string::npos);
}

TEST(BrGraph, TiesSplitEvenly)
{
   BestResponseGraph graph({"A", "B", "C"});
   Matrix u{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}};
   for(int i = 0; i < 5; ++i)
      graph.add(SymmetricGame(u));
   EXPECT_DOUBLE_EQ(graph.weight(2, 0), 0.5);
   EXPECT_DOUBLE_EQ(graph.weight(2, 1), 0.5);
   EXPECT_NE(graph.to_dot().find("[label=\"0.500\""), std::string::npos);
}

TEST(BrGraph, MergeEqualsSequentialAdds)
{
   std::mt19937_64 gen(3);
   BestResponseGraph all({"a", "b", "c"}), left({"a", "b", "c"}), right({"a", "b", "c"});
   for(int i = 0; i < 20; ++i) {
      SymmetricGame g(random_game(gen, 3, 0, 2));
      all.add(g);
      (i < 7 ? left : right).add(g);
   }
   left.merge(right);
   EXPECT_EQ(left.to_dot(), all.to_dot());
}
