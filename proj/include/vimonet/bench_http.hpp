#pragma once

// HTTP(S) client for an external LLM judge. The endpoint receives
// {"prediction", "reference", "rubric"} and answers {"score": <0..5>}.

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro.
#include "vimonet/bench.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace vimonet::bench {

class HttpJudgeClient final : public JudgeClient {
 public:
  HttpJudgeClient(std::string url, std::string credential, double timeout_seconds = 30.0)
      : credential_(std::move(credential)), timeout_(timeout_seconds) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ContractError("judge url needs a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    origin_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url.substr(slash);
  }

  double score(const JudgeRequest& r) override {
    httplib::Client cli(origin_);
    const auto secs = static_cast<time_t>(timeout_);
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_bearer_token_auth(credential_);
    const nlohmann::json body = {{"prediction", r.pred}, {"reference", r.gold}, {"rubric", r.rubric}};
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) throw JudgeUnavailable("judge transport error: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403) throw JudgeUnavailable("judge rejected the credentials");
    if (res->status != 200) throw JudgeUnavailable("judge answered HTTP " + std::to_string(res->status));
    try {
      return nlohmann::json::parse(res->body).at("score").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw JudgeUnavailable(std::string("judge reply is not {\"score\": number}: ") + e.what());
    }
  }

 private:
  std::string origin_, path_, credential_;
  double timeout_;
};

}  // namespace vimonet::bench
