#pragma once

// OpenAI-compatible completions client (POST <base>/v1/completions).

#include <chrono>
#include <cstdlib>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tecfap/backend.hpp"
#include "tecfap/error.hpp"

namespace tecfap {

inline constexpr const char* kApiKeyEnv = "TECFAP_API_KEY";

struct HttpConfig {
    std::string base_url;  // scheme://host[:port][/prefix]
    std::string model;
    std::string api_key;   // empty: read from TECFAP_API_KEY
};

class HttpBackend final : public Backend {
public:
    explicit HttpBackend(HttpConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.api_key.empty()) {
            if (const char* env = std::getenv(kApiKeyEnv)) cfg_.api_key = env;
        }
        const auto scheme = cfg_.base_url.find("://");
        if (scheme == std::string::npos) throw UsageError("endpoint must look like http://host:port");
        const auto slash = cfg_.base_url.find('/', scheme + 3);
        origin_ = cfg_.base_url.substr(0, slash);
        if (slash != std::string::npos) prefix_ = cfg_.base_url.substr(slash);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    bool supports_scoring() const override { return true; }
    bool supports_logprobs() const override { return true; }

    double continuation_logprob(const PromptText& prompt, std::string_view continuation,
                                const GenConfig& cfg) override {
        const std::string text = prompt.full_text + " " + std::string(continuation);
        nlohmann::json body = {{"model", cfg_.model}, {"prompt", text},  {"max_tokens", 0},
                               {"temperature", 0},    {"echo", true},    {"logprobs", 0}};
        const auto reply = post(body, cfg);
        try {
            const auto& lp = reply.at("choices").at(0).at("logprobs");
            const auto& offsets = lp.at("text_offset");
            const auto& values = lp.at("token_logprobs");
            double total = 0.0;
            std::size_t counted = 0;
            for (std::size_t i = 0; i < values.size() && i < offsets.size(); ++i) {
                if (offsets[i].get<std::size_t>() < prompt.full_text.size() || values[i].is_null()) continue;
                total += values[i].get<double>();
                ++counted;
            }
            if (counted == 0) throw MalformedReplyError("endpoint returned no continuation log-probabilities");
            return total;
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedReplyError(std::string("unexpected echo reply: ") + ex.what());
        }
    }

    std::vector<TokenLogprob> next_token_logprobs(const PromptText& prompt, std::size_t k,
                                                  const GenConfig& cfg) override {
        nlohmann::json body = {{"model", cfg_.model}, {"prompt", prompt.full_text}, {"max_tokens", 1},
                               {"temperature", 0},    {"logprobs", k}};
        return parse_top_logprobs(post(body, cfg));
    }

protected:
    RawCompletion do_complete(const PromptText& prompt, const GenConfig& cfg) override {
        nlohmann::json body = {{"model", cfg_.model},
                               {"prompt", prompt.full_text},
                               {"max_tokens", cfg.max_new_tokens},
                               {"temperature", 0}};
        if (cfg.top_logprobs > 0) body["logprobs"] = cfg.top_logprobs;
        const auto reply = post(body, cfg);
        RawCompletion out;
        try {
            out.text = reply.at("choices").at(0).at("text").get<std::string>();
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedReplyError(std::string("completion reply lacks choices[0].text: ") + ex.what());
        }
        if (cfg.top_logprobs > 0) out.first_token_dist = parse_top_logprobs(reply);
        return out;
    }

private:
    static std::vector<TokenLogprob> parse_top_logprobs(const nlohmann::json& reply) {
        try {
            const auto& top = reply.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
            std::vector<TokenLogprob> out;
            for (const auto& [tok, lp] : top.items()) out.push_back({tok, lp.get<double>()});
            return out;
        } catch (const nlohmann::json::exception& ex) {
            throw MalformedReplyError(std::string("reply lacks top_logprobs: ") + ex.what());
        }
    }

    nlohmann::json post(const nlohmann::json& body, const GenConfig& cfg) const {
        const std::string path = prefix_ + "/v1/completions";
        const std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.retry_backoff_ms * attempt));

            httplib::Client client(origin_);
            const auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);
            if (!cfg_.api_key.empty()) client.set_bearer_token_auth(cfg_.api_key);

            auto res = client.Post(path, payload, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw BackendError("endpoint rejected request with HTTP " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200));
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error&) {
                throw MalformedReplyError("endpoint reply is not JSON");
            }
        }
        throw TransportError("request to " + origin_ + path + " failed after " + std::to_string(cfg.max_retries + 1) +
                             " attempts: " + last_error);
    }

    HttpConfig cfg_;
    std::string origin_;
    std::string prefix_;
};

}  // namespace tecfap
