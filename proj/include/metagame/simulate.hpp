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

#ifndef METAGAME_SIMULATE_HPP
#define METAGAME_SIMULATE_HPP

#include <atomic>
#include <vector>

#include "metagame/game.hpp"
#include "metagame/policy.hpp"

namespace metagame {

/// Process-wide count of simulated episodes; lets callers check that an
/// analysis step performed no simulation.
inline std::atomic< uint64_t >& episode_counter()
{
   static std::atomic< uint64_t > counter{0};
   return counter;
}

struct Transcript {
   Instance instance;
   std::vector< Action > actions;
   bool chance_terminated = false;
   Outcome outcome;
};

/// Plays one episode; mixtures pick their component before the first move.
inline Outcome play_episode(const Instance& inst, const GameParams& params, const PolicyProvider& first,
                            const PolicyProvider& second, Rng& rng, Transcript* transcript = nullptr)
{
   episode_counter().fetch_add(1, std::memory_order_relaxed);
   const PolicyProvider* players[2] = {&first.select_for_episode(rng), &second.select_for_episode(rng)};
   History h(inst, params);
   while(!h.terminal()) {
      InfoState s = h.current_infostate();
      auto actions = legal_actions(s);
      size_t idx = players[h.current_player()]->sample_action(s, rng);
      if(idx >= actions.size())
         throw ProviderError(str_cat(players[h.current_player()]->name(), " chose action index ", idx, " of ",
                                     actions.size(), " at ", s.key()));
      h = apply_action(h, actions[idx], rng);
   }
   Outcome out = returns(h);
   if(transcript) {
      transcript->instance = inst;
      transcript->actions = h.actions();
      transcript->chance_terminated = h.chance_terminated();
      transcript->outcome = out;
   }
   return out;
}

/// Re-runs a recorded transcript through the engine.
inline Outcome replay(const Transcript& t, const GameParams& params)
{
   History h(t.instance, params);
   for(size_t i = 0; i < t.actions.size(); ++i) {
      bool last = i + 1 == t.actions.size();
      h = h.child(t.actions[i], last && t.chance_terminated);
   }
   return returns(h);
}

}  // namespace metagame

#endif  // METAGAME_SIMULATE_HPP
