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

// Policy provider backed by a child process speaking JSON lines on
// stdin/stdout. One request, one reply line:
//
//   -> {"kind":"hello","game":"dond","encoding_version":1,"params":{...}}
//   <- {"encoding_version":1,"name":"..."}      (both fields optional)
//   -> {"kind":"act","obs":[...],"legal":[action ids],"key":"..."}
//   <- {"probs":[...]}
//   -> {"kind":"value","obs":[...],"key":"..."}
//   <- {"values":[v1,v2]}                      (null or absent: no estimate)
//   -> {"kind":"bye"}
//
// Action ids are canonical: offers in index order, then Agree. Any reply
// carrying "error", malformed, late or missing raises ProviderError.

#ifndef METAGAME_EXTERNAL_POLICY_HPP
#define METAGAME_EXTERNAL_POLICY_HPP

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "metagame/game.hpp"
#include "metagame/policy.hpp"

namespace metagame {

inline constexpr int kEncodingVersion = 1;

class ExternalPolicy : public PolicyProvider {
  public:
   /// Launches `argv` and performs the handshake.
   ExternalPolicy(std::string name, std::vector< std::string > argv, const GameParams& params, int timeout_ms = 10000)
       : name_(std::move(name)), argv_(std::move(argv)), timeout_ms_(timeout_ms)
   {
      if(argv_.empty())
         throw ConfigError(str_cat("external policy '", name_, "': empty command"));
      launch();
      try {
         handshake(params);
      } catch(...) {
         shutdown();
         throw;
      }
   }

   ExternalPolicy(const ExternalPolicy&) = delete;
   ExternalPolicy& operator=(const ExternalPolicy&) = delete;

   ~ExternalPolicy() override { shutdown(); }

   [[nodiscard]] std::string name() const override { return name_; }
   [[nodiscard]] const std::string& remote_name() const { return remote_name_; }

  private:
   void handshake(const GameParams& params)
   {
      auto reply = request({{"kind", "hello"},
                            {"game", "dond"},
                            {"encoding_version", kEncodingVersion},
                            {"params",
                             {{"max_rounds", params.max_rounds},
                              {"terminate_prob", params.terminate_prob},
                              {"discount", params.discount}}}});
      if(reply.contains("encoding_version") && reply.at("encoding_version") != kEncodingVersion)
         throw ProviderError(str_cat("external policy '", name_, "': unsupported encoding version in ", reply.dump()));
      remote_name_ = reply.value("name", name_);
   }

  public:
   [[nodiscard]] std::vector< double > action_probs(const InfoState& s) const override
   {
      auto actions = legal_actions(s);
      std::vector< int > ids;
      for(const auto& a : actions)
         ids.push_back(action_id(s.pool, a));
      auto reply = request({{"kind", "act"}, {"obs", encode_observation(s)}, {"legal", ids}, {"key", s.key()}});
      if(!reply.contains("probs"))
         throw ProviderError(str_cat("external policy '", name_, "': expected probs at ", s.key(), ", got ",
                                     reply.dump()));
      std::vector< double > probs;
      try {
         probs = reply.at("probs").get< std::vector< double > >();
      } catch(const nlohmann::json::exception& e) {
         throw ProviderError(str_cat("external policy '", name_, "': ", e.what()));
      }
      validate_distribution(probs, actions.size(), s.key(), name_);
      return probs;
   }

   [[nodiscard]] std::optional< std::array< double, 2 > > value(const InfoState& s) const override
   {
      auto reply = request({{"kind", "value"}, {"obs", encode_observation(s)}, {"key", s.key()}});
      if(!reply.contains("values") || reply.at("values").is_null())
         return std::nullopt;
      try {
         return reply.at("values").get< std::array< double, 2 > >();
      } catch(const nlohmann::json::exception& e) {
         throw ProviderError(str_cat("external policy '", name_, "': ", e.what()));
      }
   }

  private:
   void launch()
   {
      int to_child[2], from_child[2];
      if(pipe(to_child) != 0 || pipe(from_child) != 0)
         throw ProviderError(str_cat("external policy '", name_, "': pipe: ", std::strerror(errno)));
      pid_ = fork();
      if(pid_ < 0)
         throw ProviderError(str_cat("external policy '", name_, "': fork: ", std::strerror(errno)));
      if(pid_ == 0) {
         dup2(to_child[0], STDIN_FILENO);
         dup2(from_child[1], STDOUT_FILENO);
         close(to_child[0]);
         close(to_child[1]);
         close(from_child[0]);
         close(from_child[1]);
         std::vector< char* > args;
         for(auto& a : argv_)
            args.push_back(a.data());
         args.push_back(nullptr);
         execvp(args[0], args.data());
         _exit(127);
      }
      close(to_child[0]);
      close(from_child[1]);
      write_fd_ = to_child[1];
      read_fd_ = from_child[0];
      signal(SIGPIPE, SIG_IGN);
   }

   nlohmann::json request(const nlohmann::json& msg) const
   {
      std::lock_guard< std::mutex > lock(mu_);
      if(write_fd_ < 0)
         throw ProviderError(str_cat("external policy '", name_, "' is not running"));
      std::string line = msg.dump() + "\n";
      size_t off = 0;
      while(off < line.size()) {
         ssize_t n = write(write_fd_, line.data() + off, line.size() - off);
         if(n < 0) {
            if(errno == EINTR)
               continue;
            throw ProviderError(str_cat("external policy '", name_, "': write failed: ", std::strerror(errno)));
         }
         off += static_cast< size_t >(n);
      }
      std::string reply = read_line();
      nlohmann::json j = nlohmann::json::parse(reply, nullptr, false);
      if(j.is_discarded() || !j.is_object())
         throw ProviderError(str_cat("external policy '", name_, "': malformed reply '", reply, "' to ", msg.dump()));
      if(j.contains("error"))
         throw ProviderError(str_cat("external policy '", name_, "': error reply '", reply, "' to ", msg.dump()));
      return j;
   }

   std::string read_line() const
   {
      auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
      while(true) {
         auto nl = buffer_.find('\n');
         if(nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
         }
         auto left = std::chrono::duration_cast< std::chrono::milliseconds >(deadline -
                                                                             std::chrono::steady_clock::now());
         if(left.count() <= 0)
            throw ProviderError(str_cat("external policy '", name_, "': no reply within ", timeout_ms_, " ms"));
         pollfd pfd{read_fd_, POLLIN, 0};
         int r = poll(&pfd, 1, static_cast< int >(left.count()));
         if(r < 0 && errno == EINTR)
            continue;
         if(r <= 0)
            continue;
         char chunk[4096];
         ssize_t n = read(read_fd_, chunk, sizeof(chunk));
         if(n < 0 && errno == EINTR)
            continue;
         if(n <= 0)
            throw ProviderError(str_cat("external policy '", name_, "' exited or closed its output"));
         buffer_.append(chunk, static_cast< size_t >(n));
      }
   }

   void shutdown()
   {
      if(write_fd_ >= 0) {
         std::string bye = "{\"kind\":\"bye\"}\n";
         [[maybe_unused]] ssize_t n = write(write_fd_, bye.data(), bye.size());
         close(write_fd_);
         write_fd_ = -1;
      }
      if(read_fd_ >= 0) {
         close(read_fd_);
         read_fd_ = -1;
      }
      if(pid_ > 0) {
         int status = 0;
         for(int i = 0; i < 100; ++i) {
            if(waitpid(pid_, &status, WNOHANG) != 0) {
               pid_ = -1;
               return;
            }
            usleep(10000);
         }
         kill(pid_, SIGKILL);
         waitpid(pid_, &status, 0);
         pid_ = -1;
      }
   }

   std::string name_;
   std::vector< std::string > argv_;
   int timeout_ms_;
   std::string remote_name_;
   pid_t pid_ = -1;
   int write_fd_ = -1, read_fd_ = -1;
   mutable std::string buffer_;
   mutable std::mutex mu_;
};

}  // namespace metagame

#endif  // METAGAME_EXTERNAL_POLICY_HPP
