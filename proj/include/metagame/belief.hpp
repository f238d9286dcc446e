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

#ifndef METAGAME_BELIEF_HPP
#define METAGAME_BELIEF_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/game.hpp"
#include "metagame/instances.hpp"
#include "metagame/policy.hpp"

namespace metagame {

/// Every candidate opponent valuation assigns zero probability to the
/// observed offers.
class BeliefCollapse : public Error {
  public:
   using Error::Error;
};

inline constexpr double kBeliefSmoothingWeight = 1e-3;

/// Posterior over the opponent's private valuation.
struct Belief {
   std::vector< std::pair< Vec3, double > > support;
   std::string infostate_key;
   std::string policy_name;
   bool smoothed = false;

   [[nodiscard]] nlohmann::json to_json() const
   {
      nlohmann::json arr = nlohmann::json::array();
      for(const auto& [w, p] : support)
         arr.push_back({{"valuation", w}, {"prob", p}});
      return arr;
   }
};

namespace detail {

inline double log_sum_exp(const std::vector< double >& xs)
{
   double m = -std::numeric_limits< double >::infinity();
   for(double x : xs)
      m = std::max(m, x);
   if(!std::isfinite(m))
      return m;
   double s = 0.0;
   for(double x : xs)
      s += std::exp(x - m);
   return m + std::log(s);
}

inline Belief posterior_impl(const InfoState& s, const PolicyProvider& opp_policy, const InstanceDB& db,
                             double smoothing)
{
   const auto& candidates = db.opponent_valuations(s.player, s.pool, s.own_valuation);
   if(candidates.empty())
      throw Error(str_cat("no instance in the DB matches infostate ", s.key()));
   const int opp = 1 - s.player;
   std::vector< double > log_post;
   log_post.reserve(candidates.size());
   double log_prior = -std::log(static_cast< double >(candidates.size()));
   for(const auto& w_opp : candidates) {
      double ll = log_prior;
      for(int k = opp; k < s.round(); k += 2) {
         InfoState view{opp, s.pool, w_opp, {s.offer_history.begin(), s.offer_history.begin() + k}, s.max_rounds};
         auto probs = opp_policy.action_probs(view);
         double p = probs[static_cast< size_t >(offer_index(s.pool, s.offer_history[k]))];
         if(smoothing > 0.0)
            p = (1.0 - smoothing) * p + smoothing / static_cast< double >(probs.size());
         ll += std::log(p);
         if(!std::isfinite(ll))
            break;
      }
      log_post.push_back(ll);
   }
   double log_total = log_sum_exp(log_post);
   if(!std::isfinite(log_total))
      throw BeliefCollapse(str_cat("belief collapse at ", s.key(), ": observed offers have zero likelihood under ",
                                   opp_policy.name(), " for every candidate valuation"));
   Belief b;
   b.infostate_key = s.key();
   b.policy_name = opp_policy.name();
   b.smoothed = smoothing > 0.0;
   for(size_t i = 0; i < candidates.size(); ++i)
      b.support.emplace_back(candidates[i], std::exp(log_post[i] - log_total));
   return b;
}

}  // namespace detail

/// Exact Bayes posterior: prior uniform over the DB instances matching the
/// pool and own valuation; likelihood is the product over the opponent's
/// past offers of `opp_policy`'s probability of that offer.
inline Belief posterior(const InfoState& s, const PolicyProvider& opp_policy, const InstanceDB& db)
{
   return detail::posterior_impl(s, opp_policy, db, 0.0);
}

/// Like `posterior`, but on collapse recomputes with the opponent policy
/// mixed with uniform at weight kBeliefSmoothingWeight.
inline Belief posterior_with_fallback(const InfoState& s, const PolicyProvider& opp_policy, const InstanceDB& db)
{
   try {
      return detail::posterior_impl(s, opp_policy, db, 0.0);
   } catch(const BeliefCollapse&) {
      return detail::posterior_impl(s, opp_policy, db, kBeliefSmoothingWeight);
   }
}

/// Full history consistent with `s` whose hidden valuation is drawn from `b`.
inline History sample_world_state(const InfoState& s, const Belief& b, const GameParams& params, Rng& rng)
{
   std::vector< double > weights;
   weights.reserve(b.support.size());
   for(const auto& entry : b.support)
      weights.push_back(entry.second);
   const Vec3& w_opp = b.support[rng.categorical(weights)].first;
   Instance inst = s.player == 0 ? Instance{s.pool, s.own_valuation, w_opp} : Instance{s.pool, w_opp, s.own_valuation};
   History h(inst, params);
   for(const auto& o : s.offer_history)
      h = h.child(Action::Offer(o), false);
   return h;
}

}  // namespace metagame

#endif  // METAGAME_BELIEF_HPP
