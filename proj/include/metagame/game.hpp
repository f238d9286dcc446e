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

// Deal-or-No-Deal alternating-offers bargaining, parametrized by the round
// cap T, the per-round chance termination probability and the discount.
//
// Rounds are counted by proposals: the k-th offer completes round k. Player 0
// ("P1") proposes first, so the player to move is `round % 2`. An offer is
// the proposer's own claimed share; the responder would receive pool - offer.
// Accepting the k-th proposal pays discount^k times the split value.

#ifndef METAGAME_GAME_HPP
#define METAGAME_GAME_HPP

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "metagame/common.hpp"

namespace metagame {

using Vec3 = std::array< int, 3 >;

inline int dot(const Vec3& a, const Vec3& b)
{
   return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 operator-(const Vec3& a, const Vec3& b)
{
   return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline std::string to_string(const Vec3& v)
{
   return str_cat(v[0], ",", v[1], ",", v[2]);
}

struct GameParams {
   int max_rounds = 10;
   double terminate_prob = 0.0;
   double discount = 1.0;

   void validate() const
   {
      if(max_rounds < 1)
         throw ConfigError(str_cat("max_rounds must be >= 1, got ", max_rounds));
      if(!(terminate_prob >= 0.0 && terminate_prob <= 1.0))
         throw ConfigError(str_cat("terminate_prob must lie in [0,1], got ", terminate_prob));
      if(!(discount > 0.0 && discount <= 1.0))
         throw ConfigError(str_cat("discount must lie in (0,1], got ", discount));
   }

   [[nodiscard]] std::string to_string() const
   {
      return str_cat("Barg(", max_rounds, ",", terminate_prob, ",", discount, ")");
   }

   bool operator==(const GameParams&) const = default;
};

struct Instance {
   Vec3 pool{};
   Vec3 w1{};
   Vec3 w2{};

   [[nodiscard]] const Vec3& valuation(int player) const { return player == 0 ? w1 : w2; }

   auto operator<=>(const Instance&) const = default;
};

/// Either an offer (the proposer's claimed share) or acceptance of the
/// standing offer.
struct Action {
   bool agree = false;
   Vec3 offer{};

   static Action Agree() { return Action{true, {}}; }
   static Action Offer(Vec3 o) { return Action{false, o}; }

   bool operator==(const Action&) const = default;

   [[nodiscard]] std::string to_string() const
   {
      return agree ? std::string("Agree") : str_cat("Offer[", metagame::to_string(offer), "]");
   }
};

// Offers over a pool, indexed lexicographically (first coordinate major).
inline int num_offers(const Vec3& pool)
{
   return (pool[0] + 1) * (pool[1] + 1) * (pool[2] + 1);
}

inline Vec3 offer_from_index(const Vec3& pool, int index)
{
   int d2 = pool[2] + 1, d1 = pool[1] + 1;
   return {index / (d1 * d2), (index / d2) % d1, index % d2};
}

inline int offer_index(const Vec3& pool, const Vec3& offer)
{
   return (offer[0] * (pool[1] + 1) + offer[1]) * (pool[2] + 1) + offer[2];
}

inline bool offer_within(const Vec3& pool, const Vec3& offer)
{
   for(int j = 0; j < 3; ++j)
      if(offer[j] < 0 || offer[j] > pool[j])
         return false;
   return true;
}

/// Canonical id of an action for a given pool: offers by lexicographic index,
/// Agree after all offers.
inline int action_id(const Vec3& pool, const Action& a)
{
   return a.agree ? num_offers(pool) : offer_index(pool, a.offer);
}

inline Action action_from_id(const Vec3& pool, int id)
{
   int n = num_offers(pool);
   if(id < 0 || id > n)
      throw Error(str_cat("action id ", id, " out of range for pool ", to_string(pool)));
   return id == n ? Action::Agree() : Action::Offer(offer_from_index(pool, id));
}

/// One player's view: role, pool, own valuation and the public offer history.
struct InfoState {
   int player = 0;
   Vec3 pool{};
   Vec3 own_valuation{};
   std::vector< Vec3 > offer_history;
   int max_rounds = 10;

   [[nodiscard]] int round() const { return static_cast< int >(offer_history.size()); }
   [[nodiscard]] bool can_agree() const { return !offer_history.empty(); }

   /// Lossless string key, e.g. "P2|c:1,2,3|w:2,1,1|o:1,2,0".
   [[nodiscard]] std::string key() const
   {
      std::string k = str_cat("P", player + 1, "|c:", to_string(pool), "|w:", to_string(own_valuation), "|o:");
      for(size_t i = 0; i < offer_history.size(); ++i) {
         if(i)
            k += ";";
         k += to_string(offer_history[i]);
      }
      return k;
   }

   bool operator==(const InfoState&) const = default;
};

/// Legal actions at a non-terminal infostate, in canonical order.
inline std::vector< Action > legal_actions(const InfoState& s)
{
   if(s.round() >= s.max_rounds)
      throw Error(str_cat("legal_actions called on terminal infostate ", s.key()));
   int n = num_offers(s.pool);
   std::vector< Action > actions;
   actions.reserve(static_cast< size_t >(n) + 1);
   for(int i = 0; i < n; ++i)
      actions.push_back(Action::Offer(offer_from_index(s.pool, i)));
   if(s.can_agree())
      actions.push_back(Action::Agree());
   return actions;
}

inline size_t num_legal_actions(const InfoState& s)
{
   return static_cast< size_t >(num_offers(s.pool)) + (s.can_agree() ? 1 : 0);
}

struct Outcome {
   std::array< double, 2 > payoffs{0.0, 0.0};
   bool agreed = false;
   std::optional< int > agreement_round;
};

class History {
  public:
   History(Instance instance, GameParams params) : instance_(instance), params_(params) {}

   [[nodiscard]] const Instance& instance() const { return instance_; }
   [[nodiscard]] const GameParams& params() const { return params_; }
   [[nodiscard]] const std::vector< Action >& actions() const { return actions_; }
   [[nodiscard]] int round() const { return round_; }
   [[nodiscard]] bool agreed() const { return agreed_; }
   [[nodiscard]] bool chance_terminated() const { return chance_terminated_; }
   [[nodiscard]] bool terminal() const
   {
      return agreed_ || chance_terminated_ || round_ >= params_.max_rounds;
   }
   [[nodiscard]] int current_player() const { return round_ % 2; }

   [[nodiscard]] std::vector< Vec3 > offer_history() const
   {
      std::vector< Vec3 > offers;
      for(const auto& a : actions_)
         if(!a.agree)
            offers.push_back(a.offer);
      return offers;
   }

   [[nodiscard]] InfoState infostate(int player) const
   {
      return InfoState{player, instance_.pool, instance_.valuation(player), offer_history(), params_.max_rounds};
   }

   [[nodiscard]] InfoState current_infostate() const { return infostate(current_player()); }

   [[nodiscard]] bool is_legal(const Action& a) const
   {
      if(terminal())
         return false;
      if(a.agree)
         return round_ > 0;
      return offer_within(instance_.pool, a.offer);
   }

   [[nodiscard]] std::vector< Action > legal_actions() const
   {
      return metagame::legal_actions(current_infostate());
   }

   /// Probability that chance ends the game right after `a` is applied.
   [[nodiscard]] double chance_termination_prob(const Action& a) const
   {
      if(a.agree || round_ + 1 >= params_.max_rounds)
         return 0.0;
      return params_.terminate_prob;
   }

   /// Apply `a` with the chance outcome fixed by the caller. Used by exact
   /// enumeration; `apply_action` draws the outcome from a stream instead.
   [[nodiscard]] History child(const Action& a, bool chance_terminates) const
   {
      if(!is_legal(a))
         throw Error(str_cat("illegal action ", a.to_string(), " at infostate ", current_infostate().key(),
                             terminal() ? " (terminal)" : ""));
      History h = *this;
      h.actions_.push_back(a);
      if(a.agree) {
         h.agreed_ = true;
      } else {
         ++h.round_;
         if(chance_terminates && h.round_ < params_.max_rounds)
            h.chance_terminated_ = true;
      }
      return h;
   }

  private:
   Instance instance_;
   GameParams params_;
   std::vector< Action > actions_;
   int round_ = 0;
   bool agreed_ = false;
   bool chance_terminated_ = false;
};

/// One Bernoulli(terminate_prob) draw after each completed round that does
/// not already end the game.
inline History apply_action(const History& h, const Action& a, Rng& rng)
{
   bool terminates = false;
   double p = h.chance_termination_prob(a);
   if(p > 0.0 && h.is_legal(a))
      terminates = rng.bernoulli(p);
   return h.child(a, terminates);
}

inline Outcome returns(const History& h)
{
   if(!h.terminal())
      throw Error("returns() called on a non-terminal history");
   Outcome out;
   if(!h.agreed())
      return out;
   int t = h.round();
   int proposer = (t - 1) % 2;
   const Vec3& offer = h.actions()[h.actions().size() - 2].offer;
   const Instance& inst = h.instance();
   double disc = std::pow(h.params().discount, t);
   out.agreed = true;
   out.agreement_round = t;
   out.payoffs[proposer] = disc * dot(inst.valuation(proposer), offer);
   out.payoffs[1 - proposer] = disc * dot(inst.valuation(1 - proposer), inst.pool - offer);
   return out;
}

/// Layout: role one-hot (2) | pool counts (3) | own valuation (3) |
/// round one-hot (T) | offer history (3T, unused slots = -1).
inline size_t observation_length(int max_rounds)
{
   return 8 + 4 * static_cast< size_t >(max_rounds);
}

inline std::vector< double > encode_observation(const InfoState& s)
{
   const int T = s.max_rounds;
   std::vector< double > obs(observation_length(T), 0.0);
   obs[static_cast< size_t >(s.player)] = 1.0;
   for(int j = 0; j < 3; ++j) {
      obs[2 + j] = s.pool[j];
      obs[5 + j] = s.own_valuation[j];
   }
   if(s.round() < T)
      obs[8 + static_cast< size_t >(s.round())] = 1.0;
   size_t base = 8 + static_cast< size_t >(T);
   for(int k = 0; k < T; ++k)
      for(int j = 0; j < 3; ++j)
         obs[base + 3 * k + j] = k < s.round() ? s.offer_history[k][j] : -1.0;
   return obs;
}

}  // namespace metagame

#endif  // METAGAME_GAME_HPP
