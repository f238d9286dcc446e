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

#ifndef METAGAME_INSTANCES_HPP
#define METAGAME_INSTANCES_HPP

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/common.hpp"
#include "metagame/game.hpp"

namespace metagame {

using nlohmann::json;

/// Size of the published negotiation database these constraints stand in for.
inline constexpr int kReferenceInstanceCount = 6796;

/// Filter used to enumerate (pool, w1, w2) configurations.
///
/// The defaults reproduce 142 distinct valuation vectors per player. They
/// yield 6774 instances; the published database lists 6796, and the delta
/// is recorded in every generated DB header.
struct InstanceConstraints {
   int min_count = 1;  // per item type
   int max_count = 5;
   int min_total_items = 5;
   int max_total_items = 7;
   int min_value = 0;
   int max_value = 8;
   int total_value = 10;
   bool require_covered = false;  // every type valued by at least one player
   bool require_shared = false;   // some type valued by both players

   [[nodiscard]] json to_json() const
   {
      return json{{"min_count", min_count},           {"max_count", max_count},
                  {"min_total_items", min_total_items}, {"max_total_items", max_total_items},
                  {"min_value", min_value},           {"max_value", max_value},
                  {"total_value", total_value},       {"require_covered", require_covered},
                  {"require_shared", require_shared}};
   }

   static InstanceConstraints from_json(const json& j)
   {
      InstanceConstraints c;
      auto get = [&](const char* k, auto& field) {
         if(j.contains(k))
            field = j.at(k).get< std::decay_t< decltype(field) > >();
      };
      try {
         get("min_count", c.min_count);
         get("max_count", c.max_count);
         get("min_total_items", c.min_total_items);
         get("max_total_items", c.max_total_items);
         get("min_value", c.min_value);
         get("max_value", c.max_value);
         get("total_value", c.total_value);
         get("require_covered", c.require_covered);
         get("require_shared", c.require_shared);
      } catch(const json::exception& e) {
         throw ConfigError(str_cat("bad instance constraints: ", e.what()));
      }
      return c;
   }

   /// Human-readable difference from the published generator's count.
   [[nodiscard]] std::string delta_note(size_t achieved) const
   {
      if(static_cast< int >(achieved) == kReferenceInstanceCount)
         return "none";
      return str_cat("generated ", achieved, " instances vs reference ", kReferenceInstanceCount,
                     "; the reference filter is unpublished. This set enumerates every pool with ", min_count,
                     "..", max_count, " units per type and ", min_total_items, "..", max_total_items,
                     " total units, and every pair of integer valuations in [", min_value, ",", max_value,
                     "] with pool value ", total_value,
                     require_covered ? ", each type valued by some player" : "",
                     require_shared ? ", some type valued by both" : "",
                     ". The per-unit value cap is chosen so that each player has exactly 142 distinct"
                     " valuation vectors.");
   }
};

class InstanceDB {
  public:
   InstanceDB() = default;
   InstanceDB(std::vector< Instance > instances, InstanceConstraints constraints = {})
       : instances_(std::move(instances)), constraints_(constraints)
   {
      std::sort(instances_.begin(), instances_.end());
      instances_.erase(std::unique(instances_.begin(), instances_.end()), instances_.end());
      build_index();
   }

   [[nodiscard]] const std::vector< Instance >& instances() const { return instances_; }
   [[nodiscard]] size_t size() const { return instances_.size(); }
   [[nodiscard]] bool empty() const { return instances_.empty(); }
   [[nodiscard]] const Instance& operator[](size_t i) const { return instances_[i]; }
   [[nodiscard]] const InstanceConstraints& constraints() const { return constraints_; }

   [[nodiscard]] size_t distinct_valuations(int player) const
   {
      std::set< Vec3 > seen;
      for(const auto& inst : instances_)
         seen.insert(inst.valuation(player));
      return seen.size();
   }

   /// Opponent valuations co-occurring with (pool, own valuation of
   /// `player`), each listed once per matching instance.
   [[nodiscard]] const std::vector< Vec3 >& opponent_valuations(int player, const Vec3& pool,
                                                                const Vec3& own) const
   {
      static const std::vector< Vec3 > empty;
      auto it = index_[player].find({pool, own});
      return it == index_[player].end() ? empty : it->second;
   }

   [[nodiscard]] const Instance& sample(Rng& rng) const { return instances_[rng.uniform_int(instances_.size())]; }

   [[nodiscard]] json to_json() const
   {
      json arr = json::array();
      for(const auto& inst : instances_)
         arr.push_back({{"pool", inst.pool}, {"w1", inst.w1}, {"w2", inst.w2}});
      return json{{"count", instances_.size()},
                  {"constraints", constraints_.to_json()},
                  {"reference_count", kReferenceInstanceCount},
                  {"constraint_delta", constraints_.delta_note(instances_.size())},
                  {"distinct_valuations", {distinct_valuations(0), distinct_valuations(1)}},
                  {"instances", arr}};
   }

   static InstanceDB from_json(const json& j)
   {
      try {
         const json& arr = j.is_array() ? j : j.at("instances");
         std::vector< Instance > out;
         for(const auto& e : arr) {
            Instance inst{e.at("pool").get< Vec3 >(), e.at("w1").get< Vec3 >(), e.at("w2").get< Vec3 >()};
            out.push_back(inst);
         }
         InstanceConstraints c;
         if(j.is_object() && j.contains("constraints"))
            c = InstanceConstraints::from_json(j.at("constraints"));
         return InstanceDB(std::move(out), c);
      } catch(const json::exception& e) {
         throw ConfigError(str_cat("malformed instance DB: ", e.what()));
      }
   }

   [[nodiscard]] uint64_t fingerprint() const
   {
      std::string s;
      for(const auto& inst : instances_)
         s += to_string(inst.pool) + "/" + to_string(inst.w1) + "/" + to_string(inst.w2) + ";";
      return fnv1a(s);
   }

  private:
   void build_index()
   {
      for(auto& m : index_)
         m.clear();
      for(const auto& inst : instances_) {
         index_[0][{inst.pool, inst.w1}].push_back(inst.w2);
         index_[1][{inst.pool, inst.w2}].push_back(inst.w1);
      }
   }

   std::vector< Instance > instances_;
   InstanceConstraints constraints_;
   std::array< std::map< std::pair< Vec3, Vec3 >, std::vector< Vec3 > >, 2 > index_;
};

/// Every (pool, w1, w2) triple satisfying `c`, deduplicated and sorted.
inline InstanceDB enumerate_instances(const InstanceConstraints& c)
{
   std::vector< Instance > out;
   auto valuations = [&](const Vec3& pool) {
      std::vector< Vec3 > vs;
      for(int a = c.min_value; a <= c.max_value; ++a)
         for(int b = c.min_value; b <= c.max_value; ++b)
            for(int d = c.min_value; d <= c.max_value; ++d)
               if(dot(pool, {a, b, d}) == c.total_value)
                  vs.push_back({a, b, d});
      return vs;
   };
   for(int x = c.min_count; x <= c.max_count; ++x)
      for(int y = c.min_count; y <= c.max_count; ++y)
         for(int z = c.min_count; z <= c.max_count; ++z) {
            int total = x + y + z;
            if(total < c.min_total_items || total > c.max_total_items)
               continue;
            Vec3 pool{x, y, z};
            auto vs = valuations(pool);
            for(const auto& w1 : vs)
               for(const auto& w2 : vs) {
                  bool covered = true, shared = false;
                  for(int j = 0; j < 3; ++j) {
                     covered = covered && (w1[j] > 0 || w2[j] > 0);
                     shared = shared || (w1[j] > 0 && w2[j] > 0);
                  }
                  if(c.require_covered && !covered)
                     continue;
                  if(c.require_shared && !shared)
                     continue;
                  out.push_back({pool, w1, w2});
               }
         }
   return InstanceDB(std::move(out), c);
}

inline void save_db(const InstanceDB& db, const std::string& path)
{
   std::ofstream f(path);
   if(!f)
      throw ConfigError(str_cat("cannot write instance DB to ", path));
   f << db.to_json().dump(1) << "\n";
}

inline InstanceDB load_db(const std::string& path)
{
   std::ifstream f(path);
   if(!f)
      throw IncompleteError(str_cat("cannot read instance DB ", path));
   json j;
   try {
      f >> j;
   } catch(const json::exception& e) {
      throw ConfigError(str_cat("cannot parse instance DB ", path, ": ", e.what()));
   }
   return InstanceDB::from_json(j);
}

struct SizeReport {
   double b = 0.0;
   double p1_infostates = 0.0;
   double p2_infostates = 0.0;
   int n_traj = 0;

   [[nodiscard]] json to_json() const
   {
      return json{{"b", b}, {"p1_infostates", p1_infostates}, {"p2_infostates", p2_infostates}, {"n_traj", n_traj}};
   }
};

/// Closed-form infostate counts from a mean branching factor. The first
/// mover's count uses exponents 0,2,4,8, the responder's 0,1,3,5,7.
inline double p1_infostate_estimate(double b, double num_valuations = 142)
{
   return num_valuations * (1 + std::pow(b, 2) + std::pow(b, 4) + std::pow(b, 8));
}

inline double p2_infostate_estimate(double b, double num_valuations = 142)
{
   return num_valuations * (1 + b + std::pow(b, 3) + std::pow(b, 5) + std::pow(b, 7));
}

/// Mean number of legal actions over all decision points of `n_traj`
/// uniform-random trajectories, plus the closed-form size estimates.
inline SizeReport estimate_game_size(const InstanceDB& db, const GameParams& params, int n_traj, Rng rng)
{
   if(n_traj < 1)
      throw ConfigError("n_traj must be >= 1");
   if(db.empty())
      throw ConfigError("empty instance DB");
   double total = 0.0;
   size_t decisions = 0;
   for(int i = 0; i < n_traj; ++i) {
      History h(db.sample(rng), params);
      while(!h.terminal()) {
         auto actions = h.legal_actions();
         total += static_cast< double >(actions.size());
         ++decisions;
         h = apply_action(h, actions[rng.uniform_int(actions.size())], rng);
      }
   }
   SizeReport r;
   r.n_traj = n_traj;
   r.b = total / static_cast< double >(decisions);
   double nv = static_cast< double >(db.distinct_valuations(0));
   r.p1_infostates = p1_infostate_estimate(r.b, nv);
   r.p2_infostates = p2_infostate_estimate(r.b, static_cast< double >(db.distinct_valuations(1)));
   return r;
}

}  // namespace metagame

#endif  // METAGAME_INSTANCES_HPP
