#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "paffa/gateway.hpp"
#include "testenv.hpp"

using namespace paffa;
using namespace paffa::testsupport;

TEST_SUITE("gateway") {

TEST_CASE("token estimator is ceil(len/4)") {
  CHECK(count_tokens("") == 0);
  CHECK(count_tokens("12345678") == 2);
  CHECK(count_tokens("123456789") == 3);
  CHECK(count_tokens(std::string(1000, 'x')) == 250);
}

TEST_CASE("prompt keys depend on slots, not template text") {
  const std::string a = prompt_key("retrieval", {"r1", "api1"});
  CHECK(a == prompt_key("retrieval", {"r1", "api1"}));
  CHECK(a != prompt_key("retrieval", {"r1", "api2"}));
  CHECK(a != prompt_key("distill", {"r1", "api1"}));
  // slot boundaries matter
  CHECK(prompt_key("x", {"ab", "c"}) != prompt_key("x", {"a", "bc"}));
}

TEST_CASE("scripted replies replay deterministically and misses are named") {
  ScriptedGateway gateway;
  gateway.script("retrieval", {"req"}, "{\"match\":false}");
  Prompt prompt{"retrieval", "sys", "user", {"req"}};
  CHECK(gateway.complete(prompt, {ExchangeTag::retrieval}) == "{\"match\":false}");
  CHECK(gateway.complete(prompt, {ExchangeTag::retrieval}) == "{\"match\":false}");

  Prompt unknown{"retrieval", "sys", "user", {"other"}};
  try {
    gateway.complete(unknown, {ExchangeTag::retrieval});
    FAIL("expected replay-miss");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::replay_miss);
    CHECK(std::string(err.what()).find(prompt_key("retrieval", {"other"})) != std::string::npos);
  }
}

TEST_CASE("ledger records every exchange with estimator fallback") {
  ScriptedGateway gateway;
  gateway.script("distill", {"p"}, std::string(100, 'r'));  // no provider counts
  Prompt prompt{"distill", std::string(40, 's'), std::string(60, 'u'), {"p"}};
  gateway.complete(prompt, {ExchangeTag::contains_page_html});

  REQUIRE(gateway.ledger().size() == 1);
  const ChatExchange& exchange = gateway.ledger().exchanges()[0];
  CHECK(exchange.estimated);
  CHECK(exchange.prompt_tokens == count_tokens(prompt.system_text) + count_tokens(prompt.user_text));
  CHECK(exchange.completion_tokens == 25);
  CHECK(exchange.tags.count(ExchangeTag::contains_page_html) == 1);

  gateway.script("distill", {"q"}, "reply", 1234, 56);  // provider-reported counts win
  gateway.complete(Prompt{"distill", "s", "u", {"q"}}, {ExchangeTag::contains_page_html});
  CHECK_FALSE(gateway.ledger().exchanges()[1].estimated);
  CHECK(gateway.ledger().total_prompt_tokens() == exchange.prompt_tokens + 1234);
  CHECK(gateway.ledger().total_completion_tokens() == 25 + 56);
  CHECK(gateway.ledger().total_tokens() ==
        gateway.ledger().total_prompt_tokens() + gateway.ledger().total_completion_tokens());

  TokenLedger tail = gateway.ledger().slice(1);
  CHECK(tail.size() == 1);
  CHECK(tail.total_prompt_tokens() == 1234);

  // round-trip of the ledger document
  TokenLedger parsed = TokenLedger::from_json(gateway.ledger().to_json());
  CHECK(parsed.size() == 2);
  CHECK(parsed.total_tokens() == gateway.ledger().total_tokens());
}

TEST_CASE("calls without tags are refused") {
  ScriptedGateway gateway;
  gateway.script("distill", {"p"}, "x");
  CHECK_THROWS_AS(gateway.complete(Prompt{"distill", "", "", {"p"}}, {}), Error);
  CHECK(gateway.ledger().size() == 0);
}

TEST_CASE("recorded fixtures replay byte-identically") {
  auto dir = scratch_dir("record");
  {
    ScriptedGateway recorder;
    recorder.set_record_dir(dir);
    recorder.script("retrieval", {"req", "a"}, "{\"match\":false}", 11, 7);
    recorder.complete(Prompt{"retrieval", "sys", "user", {"req", "a"}}, {ExchangeTag::retrieval});
  }
  ReplayGateway replay(dir);
  Prompt prompt{"retrieval", "sys", "user", {"req", "a"}};
  CHECK(replay.complete(prompt, {ExchangeTag::retrieval}) == "{\"match\":false}");
  CHECK(replay.ledger().exchanges()[0].prompt_tokens == 11);
  CHECK(replay.ledger().exchanges()[0].completion_tokens == 7);
  CHECK_FALSE(replay.ledger().exchanges()[0].estimated);

  try {
    replay.complete(Prompt{"retrieval", "sys", "user", {"missing"}}, {ExchangeTag::retrieval});
    FAIL("expected replay-miss");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::replay_miss);
  }
}

TEST_CASE("fixture files written via the authoring helpers parse back") {
  auto dir = scratch_dir("author");
  write_replay_fixture_json(dir, "cluster", {"c1"}, json{{"clusters", json::array({{0}})}});
  ReplayGateway replay(dir);
  std::string reply = replay.complete(Prompt{"cluster", "", "", {"c1"}}, {ExchangeTag::synthesis});
  CHECK(json::parse(reply) == json{{"clusters", json::array({{0}})}});
}

TEST_CASE("prompt templates render placeholders") {
  const PromptLibrary& prompts = test_prompts();
  Prompt rendered = prompts.render("retrieval", {{"request", "find my trip"},
                                                 {"catalog", "[]"}});
  CHECK(rendered.user_text.find("find my trip") != std::string::npos);
  CHECK(rendered.user_text.find("{{request}}") == std::string::npos);
  CHECK_FALSE(rendered.system_text.empty());
  CHECK_THROWS_AS(prompts.render("no-such-template", {}), Error);
}

TEST_CASE("remote provider: usage block, rate-limit retry, transport errors") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = hits.fetch_add(1);
    if (n == 0) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    json body = json::parse(req.body);
    CHECK(body["messages"][0]["role"] == "system");
    res.set_content(json{{"choices", json::array({json{{"message", json{{"content", "hi"}}}}})},
                         {"usage", json{{"prompt_tokens", 21}, {"completion_tokens", 2}}}}
                        .dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpGateway::Options options;
  options.base_url = "http://127.0.0.1:" + std::to_string(port);
  options.backoff_ms = 10;
  HttpGateway gateway(options);
  std::string reply = gateway.complete(Prompt{"distill", "s", "u", {"k"}},
                                       {ExchangeTag::contains_page_html});
  CHECK(reply == "hi");
  CHECK(hits.load() == 2);  // one 429, one success
  CHECK(gateway.ledger().exchanges()[0].prompt_tokens == 21);
  CHECK_FALSE(gateway.ledger().exchanges()[0].estimated);

  server.stop();
  thread.join();

  HttpGateway::Options dead = options;
  dead.base_url = "http://127.0.0.1:1";
  HttpGateway unreachable(dead);
  CHECK_THROWS_AS(
      unreachable.complete(Prompt{"distill", "s", "u", {"k"}}, {ExchangeTag::contains_page_html}),
      Error);
}

}  // TEST_SUITE
