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

// Reference external policy: uniform over the legal actions, no value head.
// Optional arguments exercise error handling: "--garbage" answers act
// requests with malformed output, "--short" with probabilities summing to
// 0.9, "--silent" never answers them.

#include <iostream>
#include <string>

#include "json.hpp"

int main(int argc, char** argv)
{
   std::string mode = argc > 1 ? argv[1] : "";
   std::string line;
   while(std::getline(std::cin, line)) {
      auto msg = nlohmann::json::parse(line, nullptr, false);
      if(msg.is_discarded())
         return 1;
      std::string kind = msg.value("kind", "");
      nlohmann::json reply;
      if(kind == "hello") {
         reply = {{"encoding_version", 1}, {"name", "echo-uniform"}};
      } else if(kind == "act") {
         if(mode == "--garbage") {
            std::cout << "not json" << std::endl;
            continue;
         }
         if(mode == "--silent")
            continue;
         size_t n = msg.at("legal").size();
         double scale = mode == "--short" ? 0.9 : 1.0;
         reply = {{"probs", std::vector< double >(n, scale / static_cast< double >(n))}};
      } else if(kind == "value") {
         reply = {{"values", nullptr}};
      } else if(kind == "bye") {
         return 0;
      } else {
         reply = {{"error", "unknown request " + kind}};
      }
      std::cout << reply.dump() << std::endl;
   }
   return 0;
}
