#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stella/error.hpp"
#include "stella/gateway/chat.hpp"
#include "stella/gateway/embedder.hpp"
#include "stella/gateway/tagger.hpp"
#include "stella/kernels/vector_ops.hpp"
#include "stella/parallel.hpp"

using namespace stella;
using namespace stella::gateway;
using nlohmann::json;

namespace {

GatewayConfig fast_config(int retry_limit = 3) {
  GatewayConfig c;
  c.retry_limit = retry_limit;
  c.backoff_base_ms = 1;
  return c;
}

ChatRequest json_request(std::string user = "give json") {
  ChatRequest r;
  r.system_prompt = "sys";
  r.user_prompt = std::move(user);
  r.response_format = ResponseFormat::json_object;
  return r;
}

}  // namespace

TEST(ChatGateway, ScriptedReplyIsReturnedVerbatim) {
  const std::string reply = R"({"intention":"Definition / Principle","step_1":{}})";
  ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<std::string>{reply}), fast_config());
  EXPECT_EQ(gw.chat(json_request()), reply);
}

TEST(ChatGateway, EmptyUserPromptIsPrecondition) {
  ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<std::string>{"x"}), fast_config());
  ChatRequest r;
  r.system_prompt = "sys";
  try {
    gw.chat(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::precondition);
  }
}

TEST(ChatGateway, MalformedTwiceThenValidTakesThreeAttempts) {
  auto transport = std::make_shared<ScriptedChatTransport>(
      std::vector<std::string>{"not json", "{broken", R"({"ok": true})"});
  ChatGateway gw(transport, fast_config(3));
  EXPECT_EQ(gw.chat(json_request()), R"({"ok": true})");
  const auto log = gw.call_log();
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].outcome, AttemptOutcome::malformed);
  EXPECT_EQ(log[1].outcome, AttemptOutcome::malformed);
  EXPECT_EQ(log[2].outcome, AttemptOutcome::ok);
  EXPECT_EQ(log[2].attempt, 3);
  EXPECT_EQ(transport->calls(), 3u);
}

TEST(ChatGateway, MalformedExhaustionRaises) {
  ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<std::string>{"nope"}), fast_config(2));
  try {
    gw.chat(json_request());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::malformed_response);
  }
  EXPECT_EQ(gw.call_log().size(), 3u);
}

TEST(ChatGateway, FencedJsonIsUnwrapped) {
  ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<std::string>{"```json\n{\"a\": 1}\n```"}),
                 fast_config());
  EXPECT_EQ(gw.chat(json_request()), "{\"a\": 1}");
}

TEST(ChatGateway, TransportAndRateLimitErrorsAreRetriedThenPropagated) {
  using Item = ScriptedChatTransport::Item;
  {
    ChatGateway gw(std::make_shared<ScriptedChatTransport>(
                       std::vector<Item>{Item::fail(ErrorKind::transport), Item::fail(ErrorKind::rate_limited),
                                         Item::reply("{}")}),
                   fast_config());
    EXPECT_EQ(gw.chat(json_request()), "{}");
  }
  {
    ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<Item>{Item::fail(ErrorKind::rate_limited)}),
                   fast_config(1));
    try {
      gw.chat(json_request());
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::rate_limited);
    }
  }
}

TEST(ChatGateway, ConfigValidation) {
  GatewayConfig c;
  c.retry_limit = 11;
  EXPECT_THROW(c.validate(), Error);
  c.retry_limit = 3;
  c.max_concurrent = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ChatGateway, ConcurrencyCapIsRespected) {
  std::atomic<int> in_flight{0}, peak{0};
  auto transport = std::make_shared<FunctionChatTransport>([&](const ChatRequest&) {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    return std::string("{}");
  });
  auto config = fast_config();
  config.max_concurrent = 2;
  ChatGateway gw(transport, config);
  auto errors = parallel_for(24, 8, [&](std::size_t) { gw.chat(json_request()); });
  for (auto& e : errors) EXPECT_FALSE(e);
  EXPECT_LE(peak.load(), 2);
  EXPECT_LE(gw.max_in_flight(), 2u);
  EXPECT_EQ(gw.call_log().size(), 24u);
}

TEST(ChatGateway, DeterministicLogs) {
  auto run = [] {
    ChatGateway gw(std::make_shared<ScriptedChatTransport>(std::vector<std::string>{"x", "{}"}), fast_config());
    std::vector<std::string> outs;
    for (int i = 0; i < 3; ++i) outs.push_back(gw.chat(json_request("q" + std::to_string(i))));
    std::vector<std::string> digests;
    for (const auto& e : gw.call_log()) digests.push_back(e.request_digest + to_string(e.outcome).data());
    return std::make_pair(outs, digests);
  };
  EXPECT_EQ(run(), run());
}

TEST(HashEmbedder, UnitVectorsDeterministicAndOrdered) {
  HashEmbedder e(8);
  auto a = e.embed({"a"});
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(a[0].dimension(), 8u);
  EXPECT_NEAR(kernels::squared_norm(a[0].values), 1.0, 1e-12);
  EXPECT_EQ(e.embed({"a"})[0].values, a[0].values);

  auto same = e.embed({"x", "x"});
  EXPECT_EQ(same[0].values, same[1].values);

  auto three = e.embed({"alpha wing", "nozzle throat", "ice crystal"});
  ASSERT_EQ(three.size(), 3u);
  EXPECT_EQ(three[0].values, e.embed({"alpha wing"})[0].values);
  EXPECT_EQ(three[2].values, e.embed({"ice crystal"})[0].values);
  EXPECT_NE(three[0].values, three[1].values);
  for (const auto& v : three) EXPECT_NEAR(kernels::cosine(v.values, v.values), 1.0, 1e-6);
}

TEST(HashEmbedder, RejectsEmptyTextAndOversizedBatch) {
  HashEmbedder e(8, 2);
  EXPECT_THROW(e.embed({""}), Error);
  EXPECT_THROW(e.embed({"a", "b", "c"}), Error);
  EXPECT_EQ(e.embed_all({"a", "b", "c"}).size(), 3u);
}

TEST(HeuristicTagger, Rules) {
  HeuristicTagger t;
  EXPECT_EQ(t.tag({"propellant"}), std::vector<PosTag>{PosTag::noun});
  EXPECT_EQ(t.tag({"data", "from", "MODIS", "show"}),
            (std::vector<PosTag>{PosTag::noun, PosTag::other, PosTag::propn, PosTag::other}));
  EXPECT_EQ(t.tag({"The", "Shuttle", "flew"}), (std::vector<PosTag>{PosTag::other, PosTag::propn, PosTag::other}));
  EXPECT_EQ(t.tag({"42"}), std::vector<PosTag>{PosTag::other});
  EXPECT_THROW(t.tag({""}), Error);
}

namespace {

// Minimal stand-in for the NLP sidecar: POST /tag and POST /embed.
class FakeSidecar {
 public:
  FakeSidecar() {
    server_.Post("/tag", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      json tags = json::array();
      for (const auto& tok : body["tokens"]) tags.push_back(tok.get<std::string>() == "propellant" ? "NOUN" : "OTHER");
      res.set_content(json{{"tags", tags}}.dump(), "application/json");
    });
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      json vectors = json::array();
      for (const auto& text : body["texts"]) {
        const double len = static_cast<double>(text.get<std::string>().size());
        vectors.push_back(json::array({len, 1.0, bad_dimension_ ? 0.0 : 2.0}));
        if (bad_dimension_) vectors.back().erase(2);
      }
      res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeSidecar() {
    server_.stop();
    thread_.join();
  }

  ProviderProfile profile() const {
    ProviderProfile p;
    p.kind = "sidecar";
    p.gateway.endpoint_url = "http://127.0.0.1:" + std::to_string(port_);
    p.gateway.backoff_base_ms = 1;
    p.gateway.timeout_ms = 5000;
    return p;
  }
  void set_bad_dimension(bool v) { bad_dimension_ = v; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<bool> bad_dimension_{false};
};

}  // namespace

TEST(Sidecar, TagAndEmbedOverHttp) {
  FakeSidecar sidecar;
  auto tagger = make_tagger(sidecar.profile());
  EXPECT_EQ(tagger->tag({"propellant", "burns"}), (std::vector<PosTag>{PosTag::noun, PosTag::other}));

  HttpEmbedder embedder(sidecar.profile());
  auto v = embedder.embed({"ab", "abcd"});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].values, (std::vector<double>{2, 1, 2}));
  EXPECT_EQ(v[1].values[0], 4.0);

  sidecar.set_bad_dimension(true);
  try {
    embedder.embed({"x"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::dimension_mismatch);
  }
}

TEST(Sidecar, UnreachableIsTransportError) {
  ProviderProfile p;
  p.kind = "sidecar";
  p.gateway.endpoint_url = "http://127.0.0.1:1";
  p.gateway.retry_limit = 1;
  p.gateway.backoff_base_ms = 1;
  p.gateway.timeout_ms = 500;
  auto tagger = make_tagger(p);
  try {
    tagger->tag({"x"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport);
  }
}

TEST(SimulatedChat, TranslationKeepsTermsAndRoundTrips) {
  ChatGateway gw(std::make_shared<SimulatedChatTransport>(), fast_config());
  ChatRequest r;
  r.system_prompt = "You are an expert translator specializing in technical aerospace queries.\n"
                    "Your task is to translate the given English text into Korean.\n";
  r.user_prompt =
      "2. CRITICAL RULE FOR THIS REQUEST:\nYou MUST NOT translate the following specific technical terms found in this "
      "input.\nKeep them in their original English form: [\"RSRM\"].\n\nEnglish Text:\nHow does the RSRM nozzle erode?";
  const auto ko = gw.chat(r);
  EXPECT_NE(ko.find("RSRM"), std::string::npos);
  EXPECT_EQ(ko.find("nozzle"), std::string::npos);

  ChatRequest back;
  back.system_prompt = "Your task is to translate the given Korean text back into English.\n";
  back.user_prompt = "Korean Text:\n" + ko;
  EXPECT_EQ(gw.chat(back), "How does the RSRM nozzle erode?");
}
