#pragma once

#include <httplib.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polaris/reasoner.hpp"

// Wire-protocol client for an external reasoning engine (an LLM server or a
// scripted stub). Request/response schema is documented in
// docs/protocol.md; every failure mode degrades to a flagged NoOp.

namespace polaris {

struct EndpointConfig {
    std::string url;  // e.g. http://127.0.0.1:8123/decide
    int timeout_ms = 5000;
    int max_retries = 2;     // re-sends after the first attempt
    int max_tool_calls = 4;  // per decision

    void validate() const {
        if (url.empty()) throw ConfigError("endpoint: url must be set for the external engine");
        if (timeout_ms <= 0) throw ConfigError("endpoint: timeout_ms > 0");
        if (max_retries < 0 || max_tool_calls < 0)
            throw ConfigError("endpoint: retries and tool budget must be >= 0");
    }
};

inline void to_json(Json& j, const EndpointConfig& e) {
    j = Json{{"url", e.url},
             {"timeout_ms", e.timeout_ms},
             {"max_retries", e.max_retries},
             {"max_tool_calls", e.max_tool_calls}};
}

inline void from_json(const Json& j, EndpointConfig& e) {
    e.url = j.value("url", e.url);
    e.timeout_ms = j.value("timeout_ms", e.timeout_ms);
    e.max_retries = j.value("max_retries", e.max_retries);
    e.max_tool_calls = j.value("max_tool_calls", e.max_tool_calls);
}

namespace detail {

inline void from_json_kbquery(const Json& j, KBQuery& q) {
    if (j.contains("semantic_filter"))
        q.semantic_filter = j.at("semantic_filter").get<std::vector<std::string>>();
    if (j.contains("kinds"))
        for (const auto& k : j.at("kinds")) {
            const auto kind = episode_kind_from_string(k.get<std::string>());
            if (!kind) throw std::invalid_argument("unknown episode kind in kb_query");
            q.kinds.push_back(*kind);
        }
    if (j.contains("time_from")) q.time_from = j.at("time_from").get<double>();
    if (j.contains("time_to")) q.time_to = j.at("time_to").get<double>();
    if (j.contains("numeric"))
        for (const auto& p : j.at("numeric")) {
            KBQuery::NumericPredicate pred;
            pred.field = p.at("field").get<std::string>();
            const std::string op = p.at("op").get<std::string>();
            using Op = KBQuery::NumericPredicate::Op;
            if (op == "lt") pred.op = Op::Lt;
            else if (op == "le") pred.op = Op::Le;
            else if (op == "gt") pred.op = Op::Gt;
            else if (op == "ge") pred.op = Op::Ge;
            else if (op == "eq") pred.op = Op::Eq;
            else throw std::invalid_argument("unknown op in kb_query");
            pred.value = p.at("value").get<double>();
            q.numeric.push_back(pred);
        }
    q.limit = j.value("limit", q.limit);
}

// Splits http://host:port/path into (base, path).
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_at = scheme == std::string::npos ? url.find('/')
                                                     : url.find('/', scheme + 3);
    if (path_at == std::string::npos) return {url, "/"};
    return {url.substr(0, path_at), url.substr(path_at)};
}

}  // namespace detail

// Bounded request loop: the engine may answer each POST either with a
// tool_call envelope (the framework executes it and appends the result to
// the conversation history) or with a final action matching the output
// schema. Timeouts, transport failures, schema violations, and tool-budget
// exhaustion all yield a well-formed fail-safe NoOp.
class ExternalEngine : public ReasonerEngine {
public:
    explicit ExternalEngine(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    EngineKind kind() const override { return EngineKind::External; }

    Decision decide(const ReasoningContext& ctx, const PromptConfig& conf,
                    ToolExecutor& tools) override {
        Decision decision;
        decision.engine = EngineKind::External;
        decision.action = run_protocol(ctx, conf, tools, decision);
        decision.tool_trace = tools.take_trace();
        return decision;
    }

    const std::vector<Json>& exchange_log() const { return exchange_log_; }

private:
    AdaptationAction run_protocol(const ReasoningContext& ctx, const PromptConfig& conf,
                                  ToolExecutor& tools, Decision& decision) {
        const auto [base, path] = detail::split_url(cfg_.url);
        httplib::Client client(base);
        client.set_connection_timeout(0, cfg_.timeout_ms * 1000);
        client.set_read_timeout(0, cfg_.timeout_ms * 1000);
        client.set_write_timeout(0, cfg_.timeout_ms * 1000);

        const std::string prompt = render_prompt(conf, ctx);
        Json history = Json::array();
        int retries_left = cfg_.max_retries;
        int tool_calls_made = 0;
        int turn = 0;

        const auto fail = [&](const std::string& reason) {
            decision.fail_safe = true;
            decision.failure = reason;
            decision.rationale = "fail-safe no_op: " + reason;
            return AdaptationAction::no_op(ActionOrigin::Reasoner, ctx.snapshot.window_end,
                                           decision.rationale);
        };

        while (true) {
            Json request{{"type", "decide"},
                         {"turn", turn},
                         {"prompt", prompt},
                         {"snapshot", ctx.snapshot},
                         {"max_tool_calls", cfg_.max_tool_calls},
                         {"history", history}};
            Json tool_specs = Json::array();
            for (const auto& t : ctx.tools)
                tool_specs.push_back(Json{{"name", t.name}, {"description", t.description}});
            request["tools"] = tool_specs;

            auto res = client.Post(path, request.dump(), "application/json");
            exchange_log_.push_back(Json{{"request", request},
                                         {"status", res ? res->status : -1},
                                         {"body", res ? res->body : ""}});
            if (!res || res->status != 200) {
                const bool timed_out =
                    !res && (res.error() == httplib::Error::ConnectionTimeout ||
                             res.error() == httplib::Error::Read);
                if (retries_left-- > 0) continue;
                return fail(timed_out ? "timeout" : "transport_error");
            }

            Json reply;
            try {
                reply = Json::parse(res->body);
            } catch (const std::exception&) {
                if (retries_left-- > 0) continue;
                return fail("invalid_output");
            }

            if (reply.is_object() && reply.contains("tool_call")) {
                if (tool_calls_made >= cfg_.max_tool_calls) return fail("budget_exhausted");
                ++tool_calls_made;
                ++turn;
                history.push_back(execute_tool(reply.at("tool_call"), tools));
                continue;
            }

            auto action = parse_action(reply, ctx.snapshot.window_end, decision);
            if (!action) {
                if (retries_left-- > 0) continue;
                return fail("invalid_output");
            }
            return *action;
        }
    }

    static Json execute_tool(const Json& call, ToolExecutor& tools) {
        Json entry{{"tool_call", call}};
        try {
            const std::string name = call.value("name", "");
            const Json args = call.value("arguments", Json::object());
            if (name == "kb_query") {
                KBQuery q;
                detail::from_json_kbquery(args, q);
                Json ids = Json::array();
                for (const auto& e : tools.kb_query(q)) ids.push_back(Json(e));
                entry["result"] = ids;
                entry["ok"] = true;
            } else if (name == "wm_simulate") {
                WMQuery q;
                args.at("action").get_to(q.action);
                args.at("state").get_to(q.state);
                q.horizon = args.value("horizon", 60.0);
                entry["result"] = Json(tools.wm_simulate(q));
                entry["ok"] = true;
            } else {
                entry["ok"] = false;
                entry["error"] = "unknown tool: " + name;
            }
        } catch (const std::exception& e) {
            entry["ok"] = false;
            entry["error"] = e.what();
        }
        return entry;
    }

    std::optional<AdaptationAction> parse_action(const Json& reply, double now,
                                                 Decision& decision) const {
        if (!reply.is_object() || !reply.contains("action") || !reply.at("action").is_string())
            return std::nullopt;
        const auto kind = action_kind_from_string(reply.at("action").get<std::string>());
        if (!kind) return std::nullopt;
        std::string rationale;
        if (reply.contains("rationale")) {
            if (!reply.at("rationale").is_string()) return std::nullopt;
            rationale = reply.at("rationale").get<std::string>();
        }
        AdaptationAction action;
        action.kind = *kind;
        action.origin = ActionOrigin::Reasoner;
        action.issued_at = now;
        action.rationale = rationale;
        if (reply.contains("dimmer_target")) {
            if (!reply.at("dimmer_target").is_number()) return std::nullopt;
            action.dimmer_target = reply.at("dimmer_target").get<double>();
        }
        if (!action.well_formed()) return std::nullopt;
        decision.rationale = rationale;
        return action;
    }

    EndpointConfig cfg_;
    std::vector<Json> exchange_log_;
};

}  // namespace polaris
