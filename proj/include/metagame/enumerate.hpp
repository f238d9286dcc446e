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

// Exact game-tree computations for small games: expected payoffs of policy
// pairs, best responses and SumRegret. Exponential in T; intended for toy
// parametrizations and as test oracles.

#ifndef METAGAME_ENUMERATE_HPP
#define METAGAME_ENUMERATE_HPP

#include <array>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "metagame/game.hpp"
#include "metagame/instances.hpp"
#include "metagame/policy.hpp"

namespace metagame {

using Payoff2 = std::array< double, 2 >;

/// Expected payoffs from `h` when both seats follow the given behavioural
/// policies (chance handled exactly).
inline Payoff2 expected_payoffs_from(const History& h, const PolicyProvider& first, const PolicyProvider& second)
{
   if(h.terminal())
      return returns(h).payoffs;
   const PolicyProvider& pol = h.current_player() == 0 ? first : second;
   InfoState s = h.current_infostate();
   auto actions = legal_actions(s);
   auto probs = pol.action_probs(s);
   Payoff2 total{0.0, 0.0};
   for(size_t i = 0; i < actions.size(); ++i) {
      if(probs[i] <= 0.0)
         continue;
      double q = h.chance_termination_prob(actions[i]);
      if(q >= 1.0)
         continue;
      Payoff2 v = expected_payoffs_from(h.child(actions[i], false), first, second);
      for(int p = 0; p < 2; ++p)
         total[p] += probs[i] * (1.0 - q) * v[p];  // chance termination pays zero
   }
   return total;
}

/// Expected payoffs with instances drawn uniformly from `db`.
inline Payoff2 expected_payoffs(const InstanceDB& db, const GameParams& params, const PolicyProvider& first,
                                const PolicyProvider& second)
{
   Payoff2 total{0.0, 0.0};
   for(const auto& inst : db.instances()) {
      Payoff2 v = expected_payoffs_from(History(inst, params), first, second);
      total[0] += v[0];
      total[1] += v[1];
   }
   double n = static_cast< double >(db.size());
   return {total[0] / n, total[1] / n};
}

/// Exact best-response value for `responder` against `opponent` occupying
/// the other seat, with instances uniform over `db`.
class BestResponse {
  public:
   BestResponse(const InstanceDB& db, const GameParams& params, int responder, const PolicyProvider& opponent)
       : db_(db), params_(params), responder_(responder), opponent_(opponent)
   {
      double prior = 1.0 / static_cast< double >(db.size());
      for(const auto& inst : db.instances())
         collect(History(inst, params), prior);
   }

   /// Expected payoff of the best response.
   double value()
   {
      double total = 0.0;
      for(const auto& inst : db_.instances())
         total += node_value(History(inst, params_));
      return total / static_cast< double >(db_.size());
   }

   /// Best action index at one of the responder's infostates.
   size_t best_action(const std::string& key)
   {
      auto memo = decision_.find(key);
      if(memo != decision_.end())
         return memo->second;
      const auto& members = infosets_.at(key);
      auto actions = members.front().first.legal_actions();
      std::vector< double > q(actions.size(), 0.0);
      for(const auto& [h, w] : members)
         for(size_t a = 0; a < actions.size(); ++a)
            q[a] += w * action_value(h, actions[a]);
      size_t best = static_cast< size_t >(std::max_element(q.begin(), q.end()) - q.begin());
      decision_[key] = best;
      return best;
   }

  private:
   void collect(const History& h, double reach)
   {
      if(h.terminal() || reach <= 0.0)
         return;
      InfoState s = h.current_infostate();
      auto actions = legal_actions(s);
      if(h.current_player() == responder_) {
         infosets_[s.key()].emplace_back(h, reach);
         for(const auto& a : actions)
            collect(h.child(a, false), reach * (1.0 - h.chance_termination_prob(a)));
      } else {
         auto probs = opponent_.action_probs(s);
         for(size_t i = 0; i < actions.size(); ++i)
            if(probs[i] > 0.0)
               collect(h.child(actions[i], false), reach * probs[i] * (1.0 - h.chance_termination_prob(actions[i])));
      }
   }

   double action_value(const History& h, const Action& a)
   {
      double survive = 1.0 - h.chance_termination_prob(a);
      return survive > 0.0 ? survive * node_value(h.child(a, false)) : 0.0;
   }

   double node_value(const History& h)
   {
      if(h.terminal())
         return returns(h).payoffs[responder_];
      InfoState s = h.current_infostate();
      auto actions = legal_actions(s);
      if(h.current_player() == responder_)
         return action_value(h, actions[best_action(s.key())]);
      auto probs = opponent_.action_probs(s);
      double v = 0.0;
      for(size_t i = 0; i < actions.size(); ++i)
         if(probs[i] > 0.0)
            v += probs[i] * action_value(h, actions[i]);
      return v;
   }

   const InstanceDB& db_;
   GameParams params_;
   int responder_;
   const PolicyProvider& opponent_;
   std::map< std::string, std::vector< std::pair< History, double > > > infosets_;
   std::unordered_map< std::string, size_t > decision_;
};

/// SumRegret of the profile (first, second): total gain available to both
/// seats from unilateral best responses.
inline double sum_regret_exact(const InstanceDB& db, const GameParams& params, const PolicyProvider& first,
                               const PolicyProvider& second)
{
   Payoff2 on_profile = expected_payoffs(db, params, first, second);
   double br1 = BestResponse(db, params, 0, second).value();
   double br2 = BestResponse(db, params, 1, first).value();
   return (br1 - on_profile[0]) + (br2 - on_profile[1]);
}

}  // namespace metagame

#endif  // METAGAME_ENUMERATE_HPP
