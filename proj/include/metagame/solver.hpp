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

// Normal-form analytics over symmetric two-player games: regret, the
// max-entropy symmetric Nash equilibrium, and meta-game statistics.
//
// Max-entropy equilibrium. The mixed-integer program over support
// indicators b (b = 1 iff a strategy is outside the support) is solved by
// enumerating the b-vectors. For a fixed support S the remaining problem
//
//    min  sum_j gamma_j
//    s.t. gamma_j >= l_k(sigma_j)              for all segments k
//         u_i(sigma) = u*  (i in S),  u_i(sigma) <= u*  (i not in S)
//         sigma_j = 0 (j not in S),  sigma >= 0,  sum sigma = 1
//
// is a linear program. l_k are the chords of f(x) = x log x over
// [k/K, (k+1)/K], so max_k l_k is the piecewise-linear interpolant of f,
// which lies above f by at most 1/(eK). Minimizing sum gamma therefore
// maximizes a lower bound -sum gamma on the entropy -sum f(sigma_j), and
// K = floor(M / (e eps)) + 1 keeps the total slack below eps. Chord
// constraints are generated lazily: only chords violated by the current LP
// optimum are added, which reaches the same optimum as the full program.

#ifndef METAGAME_SOLVER_HPP
#define METAGAME_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/common.hpp"
#include "metagame/lp.hpp"

namespace metagame {

using MixedStrategy = std::vector< double >;

/// Symmetric two-player game: u[row][col] is the row strategy's payoff
/// when it meets the column strategy.
struct SymmetricGame {
   std::vector< std::string > names;
   std::vector< std::vector< double > > u;

   SymmetricGame() = default;
   explicit SymmetricGame(std::vector< std::vector< double > > payoffs, std::vector< std::string > labels = {})
       : names(std::move(labels)), u(std::move(payoffs))
   {
      if(names.empty())
         for(size_t i = 0; i < u.size(); ++i)
            names.push_back(str_cat("S", i));
      for(const auto& row : u)
         if(row.size() != u.size())
            throw Error("symmetric game payoff matrix must be square");
      if(names.size() != u.size())
         throw Error("strategy name count does not match payoff matrix");
   }

   [[nodiscard]] size_t size() const { return u.size(); }

   /// Payoff span U = max u - min u.
   [[nodiscard]] double span() const
   {
      if(u.empty())
         return 0.0;
      double lo = u[0][0], hi = u[0][0];
      for(const auto& row : u)
         for(double x : row) {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
         }
      return hi - lo;
   }

   /// u(row, sigma).
   [[nodiscard]] double payoff_vs(size_t row, const MixedStrategy& sigma) const
   {
      double v = 0.0;
      for(size_t j = 0; j < size(); ++j)
         v += sigma[j] * u[row][j];
      return v;
   }

   /// u(sigma, col).
   [[nodiscard]] double payoff_of(const MixedStrategy& sigma, size_t col) const
   {
      double v = 0.0;
      for(size_t i = 0; i < size(); ++i)
         v += sigma[i] * u[i][col];
      return v;
   }

   /// u(sigma_row, sigma_col).
   [[nodiscard]] double payoff(const MixedStrategy& row, const MixedStrategy& col) const
   {
      double v = 0.0;
      for(size_t i = 0; i < size(); ++i)
         if(row[i] != 0.0)
            v += row[i] * payoff_vs(i, col);
      return v;
   }
};

inline void check_strategy(const SymmetricGame& game, const MixedStrategy& s)
{
   if(s.size() != game.size())
      throw Error(str_cat("strategy has ", s.size(), " entries, game has ", game.size(), " strategies"));
   double total = 0.0;
   for(double x : s) {
      if(!(x >= -1e-12))
         throw Error(str_cat("strategy has a negative entry ", x));
      total += x;
   }
   if(std::abs(total - 1.0) > 1e-9)
      throw Error(str_cat("strategy sums to ", total));
}

/// max_pi u(pi, sigma) - u(sigma_prime, sigma).
inline double regret(const MixedStrategy& sigma_prime, const MixedStrategy& sigma, const SymmetricGame& game)
{
   check_strategy(game, sigma_prime);
   check_strategy(game, sigma);
   double best = -std::numeric_limits< double >::infinity();
   for(size_t i = 0; i < game.size(); ++i)
      best = std::max(best, game.payoff_vs(i, sigma));
   return std::max(0.0, best - game.payoff(sigma_prime, sigma));
}

/// Sum of both players' regrets in the profile (row, col).
inline double sum_regret(const MixedStrategy& row, const MixedStrategy& col, const SymmetricGame& game)
{
   return regret(row, col, game) + regret(col, row, game);
}

inline MixedStrategy pure(size_t n, size_t i)
{
   MixedStrategy s(n, 0.0);
   s[i] = 1.0;
   return s;
}

// ---------------------------------------------------------------------------
// Piecewise-linear x log x

/// Segment count guaranteeing an eps-optimal entropy over `num_strategies`.
inline int segments_for(size_t num_strategies, double eps)
{
   return static_cast< int >(std::floor(static_cast< double >(num_strategies) / (std::numbers::e * eps))) + 1;
}

inline double xlogx(double x)
{
   return x > 0.0 ? x * std::log(x) : 0.0;
}

/// Chords l_k of x log x over [k/K, (k+1)/K], k = 0..K-1.
struct PiecewiseEntropy {
   int K = 1;

   explicit PiecewiseEntropy(int segments) : K(segments)
   {
      if(K < 1)
         throw Error("segment count must be >= 1");
   }

   [[nodiscard]] double slope(int k) const
   {
      double a = static_cast< double >(k) / K, b = static_cast< double >(k + 1) / K;
      return (xlogx(b) - xlogx(a)) * K;
   }

   [[nodiscard]] double intercept(int k) const
   {
      double a = static_cast< double >(k) / K;
      return xlogx(a) - slope(k) * a;
   }

   [[nodiscard]] double segment(int k, double x) const { return intercept(k) + slope(k) * x; }

   [[nodiscard]] int segment_of(double x) const
   {
      return std::clamp(static_cast< int >(std::floor(x * K)), 0, K - 1);
   }

   /// max_k l_k(x): the interpolant of x log x at the breakpoints.
   [[nodiscard]] double envelope(double x) const { return segment(segment_of(x), x); }

   /// Location of the largest gap on segment k >= 1.
   [[nodiscard]] double segment_argmax(int k) const
   {
      return (k + 1) / (std::numbers::e * K) * std::pow(1.0 + 1.0 / k, k);
   }
};

/// Largest |x log x - l_k(x)| over each segment's own interval, by dense
/// sampling (`samples` points per segment).
inline double piecewise_bound_check(int K, int samples = 4096)
{
   PiecewiseEntropy pw(K);
   double worst = 0.0;
   for(int k = 0; k < K; ++k) {
      double a = static_cast< double >(k) / K;
      for(int i = 0; i <= samples; ++i) {
         double x = a + static_cast< double >(i) / (static_cast< double >(samples) * K);
         worst = std::max(worst, std::abs(xlogx(x) - pw.segment(k, x)));
      }
   }
   return worst;
}

// ---------------------------------------------------------------------------
// Max-entropy equilibrium

struct SolveResult {
   MixedStrategy sigma;
   double entropy = 0.0;              // nats, exact entropy of sigma
   double entropy_lower_bound = 0.0;  // -sum of chord envelope values
   std::vector< size_t > support;     // strategies with positive mass
   std::vector< double > payoffs;     // u_pi = u(pi, sigma)
   double u_star = 0.0;
   double gap = 0.0;  // guaranteed entropy optimality gap
   std::vector< bool > outside_support;
   int segments = 0;
   double max_violation = 0.0;  // LP residual
   bool relaxed = false;        // certificate needed a tolerance beyond 1e-6 U

   [[nodiscard]] nlohmann::json to_json() const
   {
      return nlohmann::json{{"sigma", sigma},   {"entropy", entropy}, {"support", support},
                            {"u_star", u_star}, {"gap", gap},         {"segments", segments}};
   }
};

namespace detail {

// One population of a normal-form game for the support-enumeration LP.
// `payoff[i][j]` is the payoff of pure strategy i against opponent-strategy j
// drawn from population `opponent`.
struct Population {
   const std::vector< std::vector< double > >* payoff;
   size_t opponent;
};

struct SupportLpResult {
   bool feasible = false;
   std::vector< MixedStrategy > sigma;
   double objective = -std::numeric_limits< double >::infinity();  // -sum gamma
   double max_violation = 0.0;
};

// Solves the fixed-support LP with lazy chord generation. Variables per
// population p: sigma over its support, gamma' = gamma + 1 >= 0 per support
// entry, then one u* per population (payoffs are shifted to be >= 0 so
// u* >= 0 is without loss of generality).
inline SupportLpResult solve_support_lp(const std::vector< Population >& pops,
                                        const std::vector< std::vector< size_t > >& supports,
                                        const std::vector< double >& shift, const PiecewiseEntropy& pw)
{
   const size_t P = pops.size();
   std::vector< size_t > sigma_off(P), gamma_off(P), ustar(P);
   size_t n = 0;
   for(size_t p = 0; p < P; ++p) {
      sigma_off[p] = n;
      n += supports[p].size();
   }
   for(size_t p = 0; p < P; ++p) {
      gamma_off[p] = n;
      n += supports[p].size();
   }
   for(size_t p = 0; p < P; ++p)
      ustar[p] = n++;

   lp::Problem base(n);
   for(size_t p = 0; p < P; ++p) {
      const auto& pay = *pops[p].payoff;
      size_t q = pops[p].opponent;
      std::vector< bool > in_support(pay.size(), false);
      for(size_t i : supports[p])
         in_support[i] = true;
      for(size_t i = 0; i < pay.size(); ++i) {
         std::vector< double > row(n, 0.0);
         for(size_t jj = 0; jj < supports[q].size(); ++jj)
            row[sigma_off[q] + jj] = pay[i][supports[q][jj]] - shift[p];
         row[ustar[p]] = -1.0;
         base.add(std::move(row), in_support[i] ? lp::Sense::eq : lp::Sense::le, 0.0);
      }
      std::vector< double > simplex(n, 0.0);
      for(size_t jj = 0; jj < supports[p].size(); ++jj) {
         simplex[sigma_off[p] + jj] = 1.0;
         base.objective[gamma_off[p] + jj] = -1.0;
      }
      base.add(std::move(simplex), lp::Sense::eq, 1.0);
   }

   auto add_chord = [&](lp::Problem& prob, size_t p, size_t jj, int k) {
      std::vector< double > row(n, 0.0);
      row[gamma_off[p] + jj] = 1.0;
      row[sigma_off[p] + jj] = -pw.slope(k);
      prob.add(std::move(row), lp::Sense::ge, pw.intercept(k) + 1.0);
   };
   lp::Problem prob = base;
   std::vector< std::vector< std::vector< bool > > > added(P);
   for(size_t p = 0; p < P; ++p) {
      added[p].assign(supports[p].size(), std::vector< bool >(static_cast< size_t >(pw.K), false));
      int k0 = pw.segment_of(1.0 / static_cast< double >(supports[p].size()));
      for(size_t jj = 0; jj < supports[p].size(); ++jj) {
         add_chord(prob, p, jj, k0);
         added[p][jj][k0] = true;
      }
   }

   SupportLpResult out;
   for(int round = 0; round < 10000; ++round) {
      lp::Solution sol = lp::solve(prob);
      if(sol.status != lp::Status::optimal)
         return out;
      bool violated = false;
      for(size_t p = 0; p < P; ++p)
         for(size_t jj = 0; jj < supports[p].size(); ++jj) {
            double x = sol.x[sigma_off[p] + jj];
            double g = sol.x[gamma_off[p] + jj] - 1.0;
            int k = pw.segment_of(x);
            if(g < pw.segment(k, x) - 1e-12 && !added[p][jj][k]) {
               add_chord(prob, p, jj, k);
               added[p][jj][k] = true;
               violated = true;
            }
         }
      if(violated)
         continue;
      out.feasible = true;
      out.max_violation = sol.max_violation;
      out.objective = 0.0;
      out.sigma.resize(P);
      for(size_t p = 0; p < P; ++p) {
         out.sigma[p].assign(pops[p].payoff->size(), 0.0);
         for(size_t jj = 0; jj < supports[p].size(); ++jj) {
            double x = sol.x[sigma_off[p] + jj];
            out.sigma[p][supports[p][jj]] = x;
            out.objective -= pw.envelope(x);
         }
      }
      return out;
   }
   return out;
}

// Strategies of a square game that survive iterated strict dominance by
// pure strategies; strictly dominated strategies carry no equilibrium mass.
inline std::vector< size_t > undominated(const std::vector< std::vector< double > >& u)
{
   std::vector< size_t > alive(u.size());
   std::iota(alive.begin(), alive.end(), 0);
   bool changed = true;
   while(changed) {
      changed = false;
      for(size_t a = 0; a < alive.size() && !changed; ++a)
         for(size_t b = 0; b < alive.size() && !changed; ++b) {
            if(a == b)
               continue;
            bool strictly = true;
            for(size_t c : alive)
               if(!(u[alive[a]][c] < u[alive[b]][c])) {
                  strictly = false;
                  break;
               }
            if(strictly) {
               alive.erase(alive.begin() + static_cast< long >(a));
               changed = true;
            }
         }
   }
   return alive;
}

inline std::vector< std::vector< size_t > > subsets_by_size(const std::vector< size_t >& items)
{
   std::vector< std::vector< size_t > > out;
   size_t n = items.size();
   if(n >= 31)
      throw Error(str_cat("support enumeration over ", n, " strategies is not supported"));
   for(uint32_t mask = 1; mask < (1u << n); ++mask) {
      std::vector< size_t > s;
      for(size_t i = 0; i < n; ++i)
         if(mask & (1u << i))
            s.push_back(items[i]);
      out.push_back(std::move(s));
   }
   std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
   return out;
}

}  // namespace detail

/// Equilibrium certificate tolerance: 1e-6 of the payoff span, plus an
/// absolute floor for constant games where the span is zero.
inline double certificate_tolerance(const SymmetricGame& game)
{
   return 1e-6 * game.span() + 1e-12;
}

/// eps-maximum-entropy symmetric Nash equilibrium (entropy in nats).
/// `segments` overrides the segment count derived from eps_ent when > 0.
inline SolveResult max_entropy_ne(const SymmetricGame& game, double eps_ent = 0.05, int segments = 0)
{
   if(!(eps_ent > 0.0))
      throw Error("eps_ent must be > 0");
   const size_t M = game.size();
   if(M == 0)
      throw Error("empty game");
   SolveResult res;
   res.segments = segments > 0 ? segments : segments_for(M, eps_ent);
   PiecewiseEntropy pw(res.segments);
   double lo = std::numeric_limits< double >::infinity();
   for(const auto& row : game.u)
      for(double x : row)
         lo = std::min(lo, x);

   std::vector< size_t > alive = detail::undominated(game.u);
   detail::Population pop{&game.u, 0};
   detail::SupportLpResult best;
   for(const auto& support : detail::subsets_by_size(alive)) {
      // Entropy on this support is at most log |S|.
      if(best.feasible && std::log(static_cast< double >(support.size())) <= best.objective + 1e-12)
         continue;
      auto r = detail::solve_support_lp({pop}, {support}, {lo}, pw);
      if(r.feasible && (!best.feasible || r.objective > best.objective + 1e-12))
         best = std::move(r);
   }
   if(!best.feasible)
      throw Error("no symmetric equilibrium found; LP tolerances too tight for this game");

   res.sigma = best.sigma[0];
   double total = std::accumulate(res.sigma.begin(), res.sigma.end(), 0.0);
   for(auto& x : res.sigma)
      x /= total;
   res.entropy = entropy_nats(res.sigma);
   res.entropy_lower_bound = best.objective;
   res.max_violation = best.max_violation;
   res.gap = static_cast< double >(M) / (std::numbers::e * res.segments);
   res.payoffs.resize(M);
   res.u_star = -std::numeric_limits< double >::infinity();
   for(size_t i = 0; i < M; ++i) {
      res.payoffs[i] = game.payoff_vs(i, res.sigma);
      res.u_star = std::max(res.u_star, res.payoffs[i]);
   }
   res.outside_support.resize(M);
   for(size_t i = 0; i < M; ++i) {
      res.outside_support[i] = res.sigma[i] <= 1e-12;
      if(!res.outside_support[i])
         res.support.push_back(i);
   }
   res.relaxed = regret(res.sigma, res.sigma, game) > certificate_tolerance(game);
   return res;
}

struct BimatrixResult {
   MixedStrategy row, col;
   double entropy = 0.0;  // H(row) + H(col)
   double row_value = 0.0, col_value = 0.0;
   int segments = 0;
};

/// Two-population variant: maximizes H(row) + H(col) over Nash equilibria
/// of the bimatrix game (A for the row player, B for the column player).
inline BimatrixResult max_entropy_bimatrix_ne(const std::vector< std::vector< double > >& A,
                                              const std::vector< std::vector< double > >& B, double eps_ent = 0.05)
{
   const size_t M = A.size();
   const size_t N = M ? A[0].size() : 0;
   if(M == 0 || N == 0 || B.size() != M || B[0].size() != N)
      throw Error("bimatrix payoffs must be non-empty with matching shapes");
   std::vector< std::vector< double > > Bt(N, std::vector< double >(M));
   double loA = std::numeric_limits< double >::infinity(), loB = loA;
   for(size_t i = 0; i < M; ++i)
      for(size_t j = 0; j < N; ++j) {
         Bt[j][i] = B[i][j];
         loA = std::min(loA, A[i][j]);
         loB = std::min(loB, B[i][j]);
      }
   BimatrixResult res;
   res.segments = segments_for(M + N, eps_ent);
   PiecewiseEntropy pw(res.segments);
   std::vector< size_t > rows(M), cols(N);
   std::iota(rows.begin(), rows.end(), 0);
   std::iota(cols.begin(), cols.end(), 0);
   auto row_sets = detail::subsets_by_size(rows);
   auto col_sets = detail::subsets_by_size(cols);
   std::vector< detail::Population > pops{{&A, 1}, {&Bt, 0}};
   detail::SupportLpResult best;
   for(const auto& rs : row_sets)
      for(const auto& cs : col_sets) {
         double bound = std::log(static_cast< double >(rs.size())) + std::log(static_cast< double >(cs.size()));
         if(best.feasible && bound <= best.objective + 1e-12)
            continue;
         auto r = detail::solve_support_lp(pops, {rs, cs}, {loA, loB}, pw);
         if(r.feasible && (!best.feasible || r.objective > best.objective + 1e-12))
            best = std::move(r);
      }
   if(!best.feasible)
      throw Error("no equilibrium found for bimatrix game");
   res.row = best.sigma[0];
   res.col = best.sigma[1];
   res.entropy = entropy_nats(res.row) + entropy_nats(res.col);
   for(size_t i = 0; i < M; ++i)
      for(size_t j = 0; j < N; ++j) {
         res.row_value += res.row[i] * res.col[j] * A[i][j];
         res.col_value += res.row[i] * res.col[j] * B[i][j];
      }
   return res;
}

// ---------------------------------------------------------------------------
// Meta-game statistics

/// Regret of pure strategy `pi` against the equilibrium mixture.
inline double ne_regret_score(const SymmetricGame& game, size_t pi, const MixedStrategy& sigma_star)
{
   check_strategy(game, sigma_star);
   if(pi >= game.size())
      throw Error(str_cat("strategy index ", pi, " out of range"));
   return regret(pure(game.size(), pi), sigma_star, game);
}

/// Mean payoff against every strategy, itself included by default.
inline double uniform_score(const SymmetricGame& game, size_t pi, bool include_self = true)
{
   double total = 0.0;
   size_t count = 0;
   for(size_t j = 0; j < game.size(); ++j) {
      if(!include_self && j == pi)
         continue;
      total += game.u[pi][j];
      ++count;
   }
   return count ? total / static_cast< double >(count) : 0.0;
}

/// u(pi, sigma*) * u(sigma*, pi).
inline double ne_nbs(const SymmetricGame& game, size_t pi, const MixedStrategy& sigma_star)
{
   check_strategy(game, sigma_star);
   return game.payoff_vs(pi, sigma_star) * game.payoff_of(sigma_star, pi);
}

/// Relative tolerance for calling two payoffs tied in best-response checks.
inline constexpr double kTieTolerance = 1e-9;

/// Best responses to `opponent`: every m' maximizing u(m', opponent).
inline std::vector< size_t > best_responses(const SymmetricGame& game, size_t opponent)
{
   double best = -std::numeric_limits< double >::infinity();
   for(size_t m = 0; m < game.size(); ++m)
      best = std::max(best, game.u[m][opponent]);
   double tol = kTieTolerance * std::max(1.0, std::abs(best));
   std::vector< size_t > out;
   for(size_t m = 0; m < game.size(); ++m)
      if(game.u[m][opponent] >= best - tol)
         out.push_back(m);
   return out;
}

/// Frequency-weighted best-response digraph aggregated over many games.
class BestResponseGraph {
  public:
   explicit BestResponseGraph(std::vector< std::string > names)
       : names_(std::move(names)), weight_(names_.size(), std::vector< double >(names_.size(), 0.0))
   {
   }

   void add(const SymmetricGame& game)
   {
      if(game.size() != names_.size())
         throw Error("best-response graph: game size does not match strategy index");
      for(size_t m1 = 0; m1 < game.size(); ++m1) {
         auto brs = best_responses(game, m1);
         for(size_t m2 : brs)
            weight_[m1][m2] += 1.0 / static_cast< double >(brs.size());
      }
      ++count_;
   }

   void merge(const BestResponseGraph& other)
   {
      for(size_t i = 0; i < weight_.size(); ++i)
         for(size_t j = 0; j < weight_.size(); ++j)
            weight_[i][j] += other.weight_[i][j];
      count_ += other.count_;
   }

   /// Fraction of games in which `to` is a best response to `from`.
   [[nodiscard]] double weight(size_t from, size_t to) const
   {
      return count_ ? weight_[from][to] / static_cast< double >(count_) : 0.0;
   }

   [[nodiscard]] size_t count() const { return count_; }
   [[nodiscard]] const std::vector< std::string >& names() const { return names_; }

   /// Graphviz digraph; edge labels are frequencies rounded to 3 decimals.
   [[nodiscard]] std::string to_dot() const
   {
      std::ostringstream out;
      out << "digraph best_response {\n";
      for(const auto& n : names_)
         out << "  \"" << n << "\";\n";
      for(size_t i = 0; i < names_.size(); ++i)
         for(size_t j = 0; j < names_.size(); ++j) {
            double w = weight(i, j);
            if(w <= 0.0)
               continue;
            char label[32];
            std::snprintf(label, sizeof(label), "%.3f", w);
            out << "  \"" << names_[i] << "\" -> \"" << names_[j] << "\" [label=\"" << label << "\", weight=" << label
                << "];\n";
         }
      out << "}\n";
      return out.str();
   }

  private:
   std::vector< std::string > names_;
   std::vector< std::vector< double > > weight_;
   size_t count_ = 0;
};

}  // namespace metagame

#endif  // METAGAME_SOLVER_HPP
