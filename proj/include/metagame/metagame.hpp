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

// Empirical meta-games: a memoized payoff table over (strategy, seed)
// policies, symmetrization by seat permutation, and the seed-resampling
// bootstrap.

#ifndef METAGAME_METAGAME_HPP
#define METAGAME_METAGAME_HPP

#include <array>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/common.hpp"
#include "metagame/instances.hpp"
#include "metagame/policy.hpp"
#include "metagame/simulate.hpp"
#include "metagame/sketch.hpp"
#include "metagame/solver.hpp"

namespace metagame {

using json = nlohmann::json;

struct EntryStats {
   std::array< double, 2 > mean{0.0, 0.0};
   std::array< double, 2 > variance{0.0, 0.0};
   uint64_t n = 0;
   std::optional< std::string > error;  // set when the entry is missing

   [[nodiscard]] bool present() const { return !error && n > 0; }
};

/// Payoffs for every ordered pair of (strategy, seed) policies. Policies
/// are indexed flat: strategy m's seeds occupy a contiguous block.
class PayoffTable {
  public:
   PayoffTable() = default;
   PayoffTable(std::vector< std::string > strategies, std::vector< std::vector< std::string > > seeds)
       : strategies_(std::move(strategies)), seeds_(std::move(seeds))
   {
      if(strategies_.empty())
         throw ConfigError("payoff table needs at least one strategy");
      if(seeds_.size() != strategies_.size())
         throw ConfigError("one seed list per strategy is required");
      for(size_t m = 0; m < seeds_.size(); ++m) {
         if(seeds_[m].empty())
            throw ConfigError(str_cat("strategy ", strategies_[m], " has no seeds"));
         offset_.push_back(num_policies_);
         num_policies_ += seeds_[m].size();
      }
      entries_.assign(num_policies_ * num_policies_, EntryStats{});
   }

   [[nodiscard]] const std::vector< std::string >& strategies() const { return strategies_; }
   [[nodiscard]] const std::vector< std::vector< std::string > >& seeds() const { return seeds_; }
   [[nodiscard]] size_t num_strategies() const { return strategies_.size(); }
   [[nodiscard]] size_t num_policies() const { return num_policies_; }
   [[nodiscard]] size_t num_entries() const { return entries_.size(); }
   [[nodiscard]] size_t policy_index(size_t m, size_t seed) const { return offset_[m] + seed; }
   [[nodiscard]] std::pair< size_t, size_t > policy_of(size_t p) const
   {
      size_t m = std::upper_bound(offset_.begin(), offset_.end(), p) - offset_.begin() - 1;
      return {m, p - offset_[m]};
   }
   [[nodiscard]] std::string policy_label(size_t p) const
   {
      auto [m, s] = policy_of(p);
      return str_cat(strategies_[m], "/", seeds_[m][s]);
   }

   /// Entry with policy p1 in the first seat and p2 in the second.
   [[nodiscard]] const EntryStats& entry(size_t p1, size_t p2) const { return entries_.at(p1 * num_policies_ + p2); }
   EntryStats& entry(size_t p1, size_t p2) { return entries_.at(p1 * num_policies_ + p2); }
   [[nodiscard]] const EntryStats& entry_at(size_t e) const { return entries_.at(e); }
   EntryStats& entry_at(size_t e) { return entries_.at(e); }

   [[nodiscard]] std::vector< size_t > missing() const
   {
      std::vector< size_t > out;
      for(size_t e = 0; e < entries_.size(); ++e)
         if(!entries_[e].present())
            out.push_back(e);
      return out;
   }

   [[nodiscard]] bool complete() const { return missing().empty(); }

   /// Throws IncompleteError naming the first few missing entries.
   void require_complete() const
   {
      auto miss = missing();
      if(miss.empty())
         return;
      std::string names;
      for(size_t i = 0; i < std::min< size_t >(miss.size(), 5); ++i) {
         size_t e = miss[i];
         const auto& st = entries_[e];
         names += str_cat(i ? "; " : "", policy_label(e / num_policies_), " vs ", policy_label(e % num_policies_),
                          st.error ? str_cat(" (", *st.error, ")") : "");
      }
      throw IncompleteError(str_cat("payoff table has ", miss.size(), " missing entries: ", names));
   }

   json header;  // game/DB hashes, n_sims, config hash

   /// Columnar JSON: one array per field, rows ordered by entry index.
   [[nodiscard]] json to_json() const
   {
      json cols = {{"p1", json::array()},    {"p2", json::array()},    {"n", json::array()},
                   {"mean1", json::array()}, {"mean2", json::array()}, {"var1", json::array()},
                   {"var2", json::array()},  {"error", json::array()}};
      for(size_t e = 0; e < entries_.size(); ++e) {
         const auto& st = entries_[e];
         cols["p1"].push_back(e / num_policies_);
         cols["p2"].push_back(e % num_policies_);
         cols["n"].push_back(st.n);
         cols["mean1"].push_back(st.mean[0]);
         cols["mean2"].push_back(st.mean[1]);
         cols["var1"].push_back(st.variance[0]);
         cols["var2"].push_back(st.variance[1]);
         cols["error"].push_back(st.error ? json(*st.error) : json(nullptr));
      }
      return {{"format", "payoff-table-v1"},
              {"header", header},
              {"strategies", strategies_},
              {"seeds", seeds_},
              {"columns", cols}};
   }

   static PayoffTable from_json(const json& j)
   {
      if(j.value("format", "") != "payoff-table-v1")
         throw ConfigError("not a payoff table file");
      PayoffTable t(j.at("strategies").get< std::vector< std::string > >(),
                    j.at("seeds").get< std::vector< std::vector< std::string > > >());
      t.header = j.value("header", json::object());
      const auto& c = j.at("columns");
      size_t rows = c.at("p1").size();
      for(size_t r = 0; r < rows; ++r) {
         auto& st = t.entry(c["p1"][r].get< size_t >(), c["p2"][r].get< size_t >());
         st.n = c["n"][r].get< uint64_t >();
         st.mean = {c["mean1"][r].get< double >(), c["mean2"][r].get< double >()};
         st.variance = {c["var1"][r].get< double >(), c["var2"][r].get< double >()};
         if(!c["error"][r].is_null())
            st.error = c["error"][r].get< std::string >();
      }
      return t;
   }

  private:
   std::vector< std::string > strategies_;
   std::vector< std::vector< std::string > > seeds_;
   std::vector< size_t > offset_;
   size_t num_policies_ = 0;
   std::vector< EntryStats > entries_;
};

inline void save_table(const PayoffTable& t, const std::string& path)
{
   std::ofstream f(path);
   if(!f)
      throw Error(str_cat("cannot write payoff table to ", path));
   f << t.to_json().dump(1) << "\n";
}

inline PayoffTable load_table(const std::string& path)
{
   std::ifstream f(path);
   if(!f)
      throw ConfigError(str_cat("cannot read payoff table ", path));
   return PayoffTable::from_json(json::parse(f));
}

// ---------------------------------------------------------------------------
// Estimation

/// Policy roster: policies[m][seed].
using Roster = std::vector< std::vector< PolicyPtr > >;

/// Simulates one table entry: n games, instance drawn uniformly per game.
inline EntryStats simulate_entry(const PolicyProvider& first, const PolicyProvider& second, const InstanceDB& db,
                                 const GameParams& params, uint64_t n_sims, Rng rng)
{
   RunningStats s1, s2;
   for(uint64_t i = 0; i < n_sims; ++i) {
      const Instance& inst = db.sample(rng);
      Outcome o = play_episode(inst, params, first, second, rng);
      s1.add(o.payoffs[0]);
      s2.add(o.payoffs[1]);
   }
   EntryStats st;
   st.n = n_sims;
   st.mean = {s1.mean(), s2.mean()};
   st.variance = {s1.variance(), s2.variance()};
   return st;
}

struct EstimateOptions {
   uint64_t n_sims = 20000;
   size_t workers = 1;
   std::string checkpoint;  // JSON-lines file of finished entries; empty disables
   bool resume = false;
   std::function< void(size_t done, size_t total) > progress;
};

/// Fills every entry of `table` by simulation. Entry e uses the stream
/// master.split(e), so the result does not depend on worker count or on
/// how often the run was interrupted and resumed. Provider failures mark
/// only the affected entry as missing.
inline void estimate_payoff_table(PayoffTable& table, const Roster& roster, const InstanceDB& db,
                                  const GameParams& params, const EstimateOptions& opt, const Rng& master)
{
   if(opt.n_sims < 1)
      throw ConfigError("n_sims_per_entry must be >= 1");
   std::vector< PolicyPtr > flat;
   for(size_t m = 0; m < roster.size(); ++m) {
      if(roster[m].size() != table.seeds()[m].size())
         throw ConfigError(str_cat("strategy ", table.strategies()[m], " has ", roster[m].size(),
                                   " providers but ", table.seeds()[m].size(), " seed labels"));
      for(const auto& p : roster[m])
         flat.push_back(p);
   }
   if(flat.size() != table.num_policies())
      throw ConfigError("roster does not match payoff table layout");

   std::vector< bool > done(table.num_entries(), false);
   if(opt.resume && !opt.checkpoint.empty()) {
      std::ifstream in(opt.checkpoint);
      std::string line;
      while(std::getline(in, line)) {
         if(line.empty())
            continue;
         json j;
         try {
            j = json::parse(line);
         } catch(const json::parse_error&) {
            continue;  // torn line from an interrupted write
         }
         size_t e = j.at("entry").get< size_t >();
         if(e >= table.num_entries() || j.at("n").get< uint64_t >() != opt.n_sims)
            continue;
         auto& st = table.entry_at(e);
         st.n = opt.n_sims;
         st.mean = {j["mean1"].get< double >(), j["mean2"].get< double >()};
         st.variance = {j["var1"].get< double >(), j["var2"].get< double >()};
         st.error.reset();
         done[e] = true;
      }
   }
   std::ofstream ckpt;
   if(!opt.checkpoint.empty()) {
      bool torn = false;
      if(opt.resume) {
         std::ifstream in(opt.checkpoint, std::ios::binary | std::ios::ate);
         if(in && in.tellg() > 0) {
            in.seekg(-1, std::ios::end);
            torn = in.get() != '\n';
         }
      }
      ckpt.open(opt.checkpoint, opt.resume ? std::ios::app : std::ios::trunc);
      if(!ckpt)
         throw Error(str_cat("cannot write checkpoint ", opt.checkpoint));
      if(torn)
         ckpt << "\n";
   }
   std::vector< size_t > todo;
   for(size_t e = 0; e < table.num_entries(); ++e)
      if(!done[e])
         todo.push_back(e);

   std::mutex mu;
   size_t finished = table.num_entries() - todo.size();
   const size_t P = table.num_policies();
   parallel_for(todo.size(), opt.workers, [&](size_t i) {
      size_t e = todo[i];
      EntryStats st;
      try {
         st = simulate_entry(*flat[e / P], *flat[e % P], db, params, opt.n_sims, master.split(e));
      } catch(const Error& err) {
         st = EntryStats{};
         st.error = err.what();
      }
      std::lock_guard< std::mutex > lock(mu);
      table.entry_at(e) = st;
      if(ckpt.is_open() && st.present()) {
         ckpt << json{{"entry", e},
                      {"n", st.n},
                      {"mean1", st.mean[0]},
                      {"mean2", st.mean[1]},
                      {"var1", st.variance[0]},
                      {"var2", st.variance[1]}}
                    .dump()
              << "\n";
         ckpt.flush();
      }
      ++finished;
      if(opt.progress)
         opt.progress(finished, table.num_entries());
   });
}

// ---------------------------------------------------------------------------
// Resampling and symmetrization

/// Per-strategy seed multisets for one bootstrap replicate.
struct ResamplePlan {
   uint64_t replicate = 0;
   uint64_t master_seed = 0;
   std::vector< std::vector< size_t > > seeds;  // seeds[m]: |Omega^m| draws

   /// Identity plan: every seed exactly once (the full-sample meta-game).
   static ResamplePlan identity(const std::vector< size_t >& seed_counts)
   {
      ResamplePlan p;
      for(size_t n : seed_counts) {
         std::vector< size_t > s(n);
         std::iota(s.begin(), s.end(), 0);
         p.seeds.push_back(std::move(s));
      }
      return p;
   }
};

/// Uniform with-replacement seed draws, a pure function of
/// (master_seed, replicate).
inline ResamplePlan resample_seeds(const std::vector< size_t >& seed_counts, uint64_t master_seed,
                                   uint64_t replicate)
{
   ResamplePlan plan;
   plan.replicate = replicate;
   plan.master_seed = master_seed;
   Rng rng = Rng(master_seed).split(replicate);
   for(size_t n : seed_counts) {
      if(n == 0)
         throw ConfigError("every strategy needs at least one seed");
      std::vector< size_t > draws(n);
      for(auto& d : draws)
         d = rng.uniform_int(n);
      plan.seeds.push_back(std::move(draws));
   }
   return plan;
}

struct SymmetricEmpiricalGame {
   SymmetricGame game;
   ResamplePlan plan;
};

/// Seat-averaged pairwise payoffs: sym[p][q] = 1/2 [u1(p as P1, q as P2) +
/// u2(q as P1, p as P2)], the payoff to policy p against q.
inline std::vector< std::vector< double > > symmetrized_policy_payoffs(const PayoffTable& table)
{
   table.require_complete();
   const size_t P = table.num_policies();
   std::vector< std::vector< double > > sym(P, std::vector< double >(P));
   for(size_t p = 0; p < P; ++p)
      for(size_t q = 0; q < P; ++q)
         sym[p][q] = 0.5 * (table.entry(p, q).mean[0] + table.entry(q, p).mean[1]);
   return sym;
}

/// Meta-game for one plan: u(m, m') averages sym over the multisets of m
/// and m' (multiplicities weight the mixture). No simulation happens here.
inline SymmetricEmpiricalGame build_meta_game(const PayoffTable& table, const std::vector< std::vector< double > >& sym,
                                              const ResamplePlan& plan)
{
   const size_t M = table.num_strategies();
   if(plan.seeds.size() != M)
      throw Error("resample plan does not match the payoff table");
   std::vector< std::vector< size_t > > idx(M);
   for(size_t m = 0; m < M; ++m) {
      if(plan.seeds[m].size() != table.seeds()[m].size())
         throw Error(str_cat("plan multiset for ", table.strategies()[m], " has the wrong size"));
      for(size_t s : plan.seeds[m])
         idx[m].push_back(table.policy_index(m, s));
   }
   std::vector< std::vector< double > > u(M, std::vector< double >(M, 0.0));
   for(size_t a = 0; a < M; ++a)
      for(size_t b = 0; b < M; ++b) {
         double total = 0.0;
         for(size_t p : idx[a])
            for(size_t q : idx[b])
               total += sym[p][q];
         u[a][b] = total / static_cast< double >(idx[a].size() * idx[b].size());
      }
   return {SymmetricGame(std::move(u), table.strategies()), plan};
}

inline SymmetricEmpiricalGame build_meta_game(const PayoffTable& table, const ResamplePlan& plan)
{
   return build_meta_game(table, symmetrized_policy_payoffs(table), plan);
}

inline std::vector< size_t > seed_counts(const PayoffTable& table)
{
   std::vector< size_t > out;
   for(const auto& s : table.seeds())
      out.push_back(s.size());
   return out;
}

// ---------------------------------------------------------------------------
// Bootstrap

enum class Statistic { ne_regret, uniform_score, ne_nbs };

inline std::string statistic_name(Statistic s)
{
   switch(s) {
      case Statistic::ne_regret: return "ne_regret";
      case Statistic::uniform_score: return "uniform_score";
      case Statistic::ne_nbs: return "ne_nbs";
   }
   return "?";
}

inline Statistic statistic_from_name(const std::string& n)
{
   for(Statistic s : {Statistic::ne_regret, Statistic::uniform_score, Statistic::ne_nbs})
      if(statistic_name(s) == n)
         return s;
   throw ConfigError(str_cat("unknown statistic '", n, "'"));
}

struct BootstrapOptions {
   uint64_t n_replicates = 1000000;
   std::vector< Statistic > statistics{Statistic::ne_regret, Statistic::uniform_score, Statistic::ne_nbs};
   double eps_ent = 0.05;
   size_t workers = 1;
   size_t chunk = 256;  // replicates per accumulation chunk; fixes the merge order
   size_t sketch_capacity = QuantileSketch::kDefaultCapacity;
   bool keep_replicates = false;  // retain per-replicate values (CSV output)
};

/// Distribution of one statistic for one strategy.
struct StatSummary {
   RunningStats stats;
   QuantileSketch sketch;
   explicit StatSummary(size_t capacity) : sketch(capacity) {}

   void add(double x)
   {
      stats.add(x);
      sketch.add(x);
   }
   void merge(const StatSummary& o)
   {
      stats.merge(o.stats);
      sketch.merge(o.sketch);
   }
};

struct BootstrapReport {
   std::vector< std::string > strategies;
   std::vector< Statistic > statistics;
   uint64_t n_replicates = 0;
   uint64_t failures = 0;
   std::vector< std::vector< StatSummary > > summary;  // [statistic][strategy]
   std::vector< std::vector< double > > full_sample;   // statistic on the identity plan
   BestResponseGraph br_graph{{}};
   std::vector< std::vector< std::vector< double > > > replicate_values;  // [replicate][statistic][strategy]

   [[nodiscard]] double mean(size_t stat, size_t m) const { return summary[stat][m].stats.mean(); }
   [[nodiscard]] double ci_lo(size_t stat, size_t m) const { return summary[stat][m].sketch.quantile(0.025); }
   [[nodiscard]] double ci_hi(size_t stat, size_t m) const { return summary[stat][m].sketch.quantile(0.975); }
   [[nodiscard]] double halfwidth(size_t stat, size_t m) const { return 0.5 * (ci_hi(stat, m) - ci_lo(stat, m)); }

   [[nodiscard]] size_t stat_index(Statistic s) const
   {
      for(size_t i = 0; i < statistics.size(); ++i)
         if(statistics[i] == s)
            return i;
      throw Error(str_cat("statistic ", statistic_name(s), " was not computed"));
   }

   [[nodiscard]] json to_json() const
   {
      json out = json::object();
      for(size_t k = 0; k < statistics.size(); ++k) {
         json per = json::object();
         for(size_t m = 0; m < strategies.size(); ++m) {
            bool any = summary[k][m].stats.count() > 0;
            per[strategies[m]] = {{"mean", mean(k, m)},
                                  {"ci_lo", any ? ci_lo(k, m) : 0.0},
                                  {"ci_hi", any ? ci_hi(k, m) : 0.0},
                                  {"full_sample", full_sample.empty() ? json(nullptr) : json(full_sample[k][m])},
                                  {"n_replicates", n_replicates},
                                  {"failures", failures}};
         }
         out[statistic_name(statistics[k])] = per;
      }
      return out;
   }
};

namespace detail {

// Values of every requested statistic on one meta-game: [stat][strategy].
inline std::vector< std::vector< double > > statistics_of(const SymmetricGame& g, const std::vector< Statistic >& stats,
                                                          double eps_ent)
{
   std::optional< SolveResult > ne;
   std::vector< std::vector< double > > out;
   for(Statistic s : stats) {
      std::vector< double > row(g.size());
      if(s != Statistic::uniform_score && !ne)
         ne = max_entropy_ne(g, eps_ent);
      for(size_t m = 0; m < g.size(); ++m) {
         switch(s) {
            case Statistic::ne_regret: row[m] = ne_regret_score(g, m, ne->sigma); break;
            case Statistic::uniform_score: row[m] = uniform_score(g, m); break;
            case Statistic::ne_nbs: row[m] = ne_nbs(g, m, ne->sigma); break;
         }
      }
      out.push_back(std::move(row));
   }
   return out;
}

}  // namespace detail

/// Seed-resampling bootstrap over a complete table. Replicates are grouped
/// in fixed chunks whose summaries are merged in chunk order, so the report
/// is bit-identical for any worker count.
inline BootstrapReport bootstrap_run(const PayoffTable& table, const BootstrapOptions& opt, uint64_t master_seed)
{
   if(opt.n_replicates < 1)
      throw ConfigError("n_replicates must be >= 1");
   if(opt.chunk < 1)
      throw ConfigError("bootstrap chunk size must be >= 1");
   const auto sym = symmetrized_policy_payoffs(table);
   const auto counts = seed_counts(table);
   const size_t M = table.num_strategies();
   const size_t S = opt.statistics.size();

   struct Partial {
      std::vector< std::vector< StatSummary > > summary;
      BestResponseGraph graph;
      uint64_t failures = 0;
      std::vector< std::vector< std::vector< double > > > values;
   };
   auto fresh = [&] {
      Partial p{std::vector< std::vector< StatSummary > >(
                    S, std::vector< StatSummary >(M, StatSummary(opt.sketch_capacity))),
                BestResponseGraph(table.strategies()), 0, {}};
      return p;
   };
   size_t n_chunks = (opt.n_replicates + opt.chunk - 1) / opt.chunk;
   std::vector< std::optional< Partial > > partials(n_chunks);
   parallel_for(n_chunks, opt.workers, [&](size_t c) {
      Partial part = fresh();
      uint64_t lo = c * opt.chunk, hi = std::min< uint64_t >(opt.n_replicates, lo + opt.chunk);
      for(uint64_t r = lo; r < hi; ++r) {
         auto g = build_meta_game(table, sym, resample_seeds(counts, master_seed, r));
         part.graph.add(g.game);
         try {
            auto vals = detail::statistics_of(g.game, opt.statistics, opt.eps_ent);
            for(size_t k = 0; k < S; ++k)
               for(size_t m = 0; m < M; ++m)
                  part.summary[k][m].add(vals[k][m]);
            if(opt.keep_replicates)
               part.values.push_back(std::move(vals));
         } catch(const Error&) {
            ++part.failures;
            if(opt.keep_replicates)
               part.values.emplace_back();
         }
      }
      partials[c] = std::move(part);
   });

   BootstrapReport rep;
   rep.strategies = table.strategies();
   rep.statistics = opt.statistics;
   rep.n_replicates = opt.n_replicates;
   rep.summary.assign(S, std::vector< StatSummary >(M, StatSummary(opt.sketch_capacity)));
   rep.br_graph = BestResponseGraph(table.strategies());
   for(auto& p : partials) {
      for(size_t k = 0; k < S; ++k)
         for(size_t m = 0; m < M; ++m)
            rep.summary[k][m].merge(p->summary[k][m]);
      rep.br_graph.merge(p->graph);
      rep.failures += p->failures;
      for(auto& v : p->values)
         rep.replicate_values.push_back(std::move(v));
   }
   auto full = build_meta_game(table, sym, ResamplePlan::identity(counts));
   try {
      rep.full_sample = detail::statistics_of(full.game, opt.statistics, opt.eps_ent);
   } catch(const Error&) {
      rep.full_sample.clear();
   }
   return rep;
}

/// "mean±halfwidth" with three decimals, the layout of the result tables.
inline std::string format_ci(double mean, double halfwidth)
{
   char buf[64];
   std::snprintf(buf, sizeof(buf), "%.3f\xC2\xB1%.3f", mean, halfwidth);
   return buf;
}

}  // namespace metagame

#endif  // METAGAME_METAGAME_HPP
