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

// Search-driven self-play with a tabular averaging learner.

#ifndef METAGAME_SELFPLAY_HPP
#define METAGAME_SELFPLAY_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "metagame/belief.hpp"
#include "metagame/enumerate.hpp"
#include "metagame/instances.hpp"
#include "metagame/policy.hpp"
#include "metagame/search.hpp"

namespace metagame {

/// Largest game the tabular learner accepts, in estimated infostates.
inline constexpr double kMaxTabularInfostates = 5e6;

/// Upper estimate of the number of infostates: distinct (pool, own
/// valuation) views times the number of offer histories of length < T.
inline double tabular_size_estimate(const InstanceDB& db, const GameParams& params)
{
   std::map< std::pair< Vec3, Vec3 >, int > views;
   double branching = 1.0;
   for(const auto& inst : db.instances()) {
      views[{inst.pool, inst.w1}] = 1;
      views[{inst.pool, inst.w2}] = 1;
      branching = std::max(branching, static_cast< double >(num_offers(inst.pool)));
   }
   double histories = 0.0, layer = 1.0;
   for(int t = 0; t < params.max_rounds; ++t) {
      histories += layer;
      layer *= branching;
   }
   return static_cast< double >(views.size()) * histories;
}

/// Running averages of value and policy targets per infostate. Every
/// update recomputes the mean over the whole dataset seen so far.
class TabularLearner {
  public:
   TabularLearner(std::string name, GameParams params) : name_(std::move(name)), params_(params) {}

   void add_policy_target(const std::string& key, const std::vector< double >& pi)
   {
      auto& [sum, n] = policy_acc_[key];
      if(sum.empty())
         sum.assign(pi.size(), 0.0);
      if(sum.size() != pi.size())
         throw Error(str_cat("policy target size changed at ", key));
      for(size_t i = 0; i < pi.size(); ++i)
         sum[i] += pi[i];
      ++n;
   }

   void add_value_target(const std::string& key, const Value2& r)
   {
      auto& [sum, n] = value_acc_[key];
      sum[0] += r[0];
      sum[1] += r[1];
      ++n;
   }

   /// Current (v, p) as one provider.
   [[nodiscard]] std::shared_ptr< TabularPolicy > snapshot() const
   {
      auto out = std::make_shared< TabularPolicy >(name_, params_);
      for(const auto& [key, acc] : policy_acc_) {
         std::vector< double > p = acc.first;
         double total = 0.0;
         for(double x : p)
            total += x;
         for(auto& x : p)
            x /= total;
         out->set(key, std::move(p));
      }
      for(const auto& [key, acc] : value_acc_)
         out->set_value(key, {acc.first[0] / acc.second, acc.first[1] / acc.second});
      return out;
   }

  private:
   std::string name_;
   GameParams params_;
   std::map< std::string, std::pair< std::vector< double >, double > > policy_acc_;
   std::map< std::string, std::pair< Value2, double > > value_acc_;
};

struct SelfPlayConfig {
   int episodes = 2000;
   int delayed_period = 1000;  // updates between refreshes of (v', p')
   int checkpoint_every = 0;   // episodes; 0 disables the training curve
   SearchConfig search = default_search();

   static SearchConfig default_search()
   {
      SearchConfig c;
      c.num_sim = 32;
      c.K = 8;
      return c;
   }
};

struct CurvePoint {
   int episode = 0;
   double sum_regret = 0.0;
};

struct SelfPlayResult {
   std::shared_ptr< TabularPolicy > trained;  // latest (v, p)
   std::vector< CurvePoint > curve;
   int refreshes = 0;
};

/// Leaf value from the provider's table, or one rollout of its policy when
/// the infostate has no estimate yet.
inline LeafEvaluator tabular_evaluator(PolicyPtr provider)
{
   return [provider](const History& h, int player, Rng& rng) -> Value2 {
      if(auto v = provider->value(h.infostate(player)))
         return *v;
      History cur = h;
      while(!cur.terminal()) {
         InfoState s = cur.current_infostate();
         cur = apply_action(cur, legal_actions(s)[provider->sample_action(s, rng)], rng);
      }
      return returns(cur).payoffs;
   };
}

/// Self-play training. Each episode searches with the delayed (v', p'),
/// records root visit frequencies as policy targets and realized returns
/// as value targets, then updates (v, p). (v', p') is replaced by (v, p)
/// after every `delayed_period` updates. `on_checkpoint` receives the
/// current (v, p) every `checkpoint_every` episodes.
inline SelfPlayResult self_play_train(
    const InstanceDB& db, const GameParams& params, const SelfPlayConfig& cfg, Rng rng,
    const std::function< void(int, const TabularPolicy&) >& on_checkpoint = {})
{
   if(cfg.episodes < 0)
      throw ConfigError("episodes must be >= 0");
   if(cfg.delayed_period < 1)
      throw ConfigError("delayed period must be >= 1");
   cfg.search.validate();
   double size = tabular_size_estimate(db, params);
   if(size > kMaxTabularInfostates)
      throw ConfigError(str_cat("game too large for the tabular learner: about ", size, " infostates (limit ",
                                kMaxTabularInfostates, ")"));

   TabularLearner learner("selfplay", params);
   SelfPlayResult res;
   std::shared_ptr< TabularPolicy > current = learner.snapshot();
   std::shared_ptr< TabularPolicy > delayed = current;
   auto record_curve = [&](int episode) {
      CurvePoint pt{episode, sum_regret_exact(db, params, *current, *current)};
      res.curve.push_back(pt);
      if(on_checkpoint)
         on_checkpoint(episode, *current);
   };
   if(cfg.checkpoint_every > 0)
      record_curve(0);

   int updates = 0;
   for(int ep = 1; ep <= cfg.episodes; ++ep) {
      History h(db.sample(rng), params);
      LeafEvaluator eval = tabular_evaluator(delayed);
      std::vector< std::string > visited[2];
      while(!h.terminal()) {
         InfoState s = h.current_infostate();
         Belief b = posterior_with_fallback(s, *delayed, db);
         SearchResult sr = run_search(s, *delayed, eval, cfg.search, b, params, rng);
         std::string key = s.key();
         learner.add_policy_target(key, sr.visit_policy);
         visited[s.player].push_back(std::move(key));
         h = apply_action(h, sr.action, rng);
      }
      Value2 r = returns(h).payoffs;
      for(const auto& seat : visited)
         for(const auto& key : seat)
            learner.add_value_target(key, r);
      current = learner.snapshot();
      ++updates;
      if(updates % cfg.delayed_period == 0) {
         delayed = current;
         ++res.refreshes;
      }
      if(cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0)
         record_curve(ep);
   }
   res.trained = current;
   return res;
}

}  // namespace metagame

#endif  // METAGAME_SELFPLAY_HPP
