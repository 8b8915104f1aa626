#include "paffa/webdriver.hpp"

#include <atomic>
#include <thread>

#include <httplib.h>

namespace paffa {

namespace {

constexpr const char* kElementKey = "element-6066-11e4-a52e-4f735466cecf";

/// W3C strategy + selector for a DSL locator.
std::pair<std::string, std::string> wire_locator(const Locator& locator) {
  switch (locator.strategy) {
    case LocatorStrategy::by_id:
      return {"css selector", "[id=\"" + locator.value + "\"]"};
    case LocatorStrategy::by_name:
      return {"css selector", "[name=\"" + locator.value + "\"]"};
    case LocatorStrategy::by_css:
      return {"css selector", locator.value};
    case LocatorStrategy::by_xpath:
      return {"xpath", locator.value};
    case LocatorStrategy::by_text:
      return {"link text", locator.value};
  }
  return {"css selector", locator.value};
}

}  // namespace

WebDriverSession::WebDriverSession(std::string base_url) : base_url_(std::move(base_url)) {}

WebDriverSession::~WebDriverSession() {
  if (is_open()) {
    try {
      close();
    } catch (...) {
    }
  }
}

WebDriverSession::WireResult WebDriverSession::send(const std::string& method,
                                                    const std::string& path, const json& body) {
  httplib::Client client(base_url_);
  client.set_read_timeout(60, 0);
  httplib::Result result;
  if (method == "GET") {
    result = client.Get(path);
  } else if (method == "DELETE") {
    result = client.Delete(path);
  } else {
    result = client.Post(path, body.dump(), "application/json");
  }
  if (!result) {
    throw Error(ErrorCode::gateway_transport,
                "webdriver " + method + " " + path + ": " + httplib::to_string(result.error()));
  }
  WireResult wire;
  wire.status = result->status;
  json doc = json::parse(result->body, nullptr, false);
  if (!doc.is_discarded() && doc.contains("value")) {
    wire.value = doc["value"];
    if (wire.status >= 400 && wire.value.is_object() && wire.value.contains("error")) {
      wire.error = wire.value["error"].get<std::string>();
    }
  }
  return wire;
}

void WebDriverSession::open(const std::string& start_url) {
  WireResult result =
      send("POST", "/session", json{{"capabilities", json{{"alwaysMatch", json::object()}}}});
  if (result.status != 200 || !result.value.is_object() || !result.value.contains("sessionId")) {
    throw Error(ErrorCode::gateway_transport, "webdriver new-session failed");
  }
  session_id_ = result.value["sessionId"].get<std::string>();
  if (!start_url.empty()) navigate(start_url);
}

std::string WebDriverSession::current_url() {
  WireResult result = send("GET", "/session/" + session_id_ + "/url", {});
  return result.value.is_string() ? result.value.get<std::string>() : "";
}

std::string WebDriverSession::current_html() {
  WireResult result = send("GET", "/session/" + session_id_ + "/source", {});
  return result.value.is_string() ? result.value.get<std::string>() : "";
}

FindResult WebDriverSession::find(const Locator& locator) {
  auto [using_, value] = wire_locator(locator);
  try {
    WireResult result = send("POST", "/session/" + session_id_ + "/element",
                             json{{"using", using_}, {"value", value}});
    if (result.status == 200 && result.value.is_object() && result.value.contains(kElementKey)) {
      return {result.value[kElementKey].get<std::string>(), ""};
    }
    if (result.error == "no such element" || result.status == 404) {
      return {std::nullopt, ""};
    }
    return {std::nullopt, "webdriver error: " + result.error};
  } catch (const Error& err) {
    return {std::nullopt, std::string("transport: ") + err.what()};
  }
}

ActResult WebDriverSession::act(const std::string& handle, StepKind kind, const std::string& value) {
  const std::string element = "/session/" + session_id_ + "/element/" + handle;
  try {
    switch (kind) {
      case StepKind::click:
      case StepKind::submit: {
        WireResult result = send("POST", element + "/click", json::object());
        if (result.status == 200) return {true, ""};
        return {false, "webdriver error: " + result.error};
      }
      case StepKind::input: {
        WireResult cleared = send("POST", element + "/clear", json::object());
        if (cleared.status != 200) return {false, "webdriver error: " + cleared.error};
        WireResult result = send("POST", element + "/value", json{{"text", value}});
        if (result.status == 200) return {true, ""};
        return {false, "webdriver error: " + result.error};
      }
      case StepKind::select_option: {
        // Send-keys to the select element picks the matching option on the
        // mainstream drivers; the loopback stub applies the same meaning.
        WireResult result = send("POST", element + "/value", json{{"text", value}});
        if (result.status == 200) return {true, ""};
        return {false, "webdriver error: " + result.error};
      }
      default:
        return {false, "kind not element-addressable"};
    }
  } catch (const Error& err) {
    return {false, std::string("transport: ") + err.what()};
  }
}

ActResult WebDriverSession::navigate(const std::string& url) {
  try {
    WireResult result = send("POST", "/session/" + session_id_ + "/url", json{{"url", url}});
    if (result.status == 200) return {true, ""};
    return {false, "webdriver error: " + result.error};
  } catch (const Error& err) {
    return {false, std::string("transport: ") + err.what()};
  }
}

void WebDriverSession::wait(double seconds) {
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

void WebDriverSession::close() {
  if (session_id_.empty()) return;
  send("DELETE", "/session/" + session_id_, {});
  session_id_.clear();
}

// --- loopback conformance stub ----------------------------------------------

struct LoopbackWebDriverServer::Impl {
  explicit Impl(std::shared_ptr<const SimSite> site) : site(std::move(site)) {}

  std::shared_ptr<const SimSite> site;
  httplib::Server server;
  std::thread thread;
  std::unique_ptr<SimSession> session;
  std::map<std::string, std::pair<std::string, std::string>> elements;  // eid -> (page, path)
  std::atomic<int> next_id{1};

  static void reply(httplib::Response& res, int status, const json& value) {
    res.status = status;
    res.set_content(json{{"value", value}}.dump(), "application/json");
  }

  static void reply_error(httplib::Response& res, int status, const std::string& code,
                          const std::string& message) {
    reply(res, status, json{{"error", code}, {"message", message}, {"stacktrace", ""}});
  }

  void routes() {
    server.Post("/session", [this](const httplib::Request&, httplib::Response& res) {
      session = open_sim_session(site);
      elements.clear();
      reply(res, 200, json{{"sessionId", "sim-1"}, {"capabilities", json::object()}});
    });

    server.Delete(R"(/session/([^/]+))", [this](const httplib::Request&, httplib::Response& res) {
      if (session) session->close();
      session.reset();
      reply(res, 200, nullptr);
    });

    server.Post(R"(/session/([^/]+)/url)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!ensure_session(res)) return;
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("url")) {
        reply_error(res, 400, "invalid argument", "missing url");
        return;
      }
      ActResult result = session->navigate(body["url"].get<std::string>());
      if (result.ok) {
        reply(res, 200, nullptr);
      } else {
        reply_error(res, 404, "unknown error", result.note);
      }
    });

    server.Get(R"(/session/([^/]+)/url)", [this](const httplib::Request&, httplib::Response& res) {
      if (!ensure_session(res)) return;
      reply(res, 200, session->current_url());
    });

    server.Get(R"(/session/([^/]+)/source)", [this](const httplib::Request&, httplib::Response& res) {
      if (!ensure_session(res)) return;
      reply(res, 200, session->current_html());
    });

    server.Post(R"(/session/([^/]+)/element)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!ensure_session(res)) return;
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("using") || !body.contains("value")) {
        reply_error(res, 400, "invalid argument", "missing using/value");
        return;
      }
      const std::string strategy = body["using"].get<std::string>();
      const std::string value = body["value"].get<std::string>();
      Locator locator;
      if (strategy == "css selector") {
        locator = {LocatorStrategy::by_css, value};
      } else if (strategy == "xpath") {
        locator = {LocatorStrategy::by_xpath, value};
      } else if (strategy == "link text") {
        locator = {LocatorStrategy::by_text, value};
      } else {
        reply_error(res, 400, "invalid argument", "unsupported strategy " + strategy);
        return;
      }
      FindResult found = session->find(locator);
      if (!found.handle.has_value()) {
        reply_error(res, 404, "no such element", "nothing matches " + value);
        return;
      }
      const std::string eid = "e" + std::to_string(next_id.fetch_add(1));
      const std::size_t sep = found.handle->find('\n');
      elements[eid] = {found.handle->substr(0, sep), found.handle->substr(sep + 1)};
      reply(res, 200, json{{kElementKey, eid}});
    });

    server.Post(R"(/session/([^/]+)/element/([^/]+)/click)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  element_act(req, res, StepKind::click, "");
                });

    server.Post(R"(/session/([^/]+)/element/([^/]+)/clear)",
                [this](const httplib::Request&, httplib::Response& res) {
                  if (!ensure_session(res)) return;
                  // clearing has no transition semantics in the simulator
                  reply(res, 200, nullptr);
                });

    server.Post(R"(/session/([^/]+)/element/([^/]+)/value)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  json body = json::parse(req.body, nullptr, false);
                  std::string text;
                  if (!body.is_discarded() && body.contains("text")) {
                    text = body["text"].get<std::string>();
                  }
                  element_act(req, res, StepKind::input, text);
                });
  }

  bool ensure_session(httplib::Response& res) {
    if (!session) {
      reply_error(res, 404, "invalid session id", "no active session");
      return false;
    }
    return true;
  }

  void element_act(const httplib::Request& req, httplib::Response& res, StepKind kind,
                   const std::string& value) {
    if (!ensure_session(res)) return;
    const std::string eid = req.matches[2];
    auto it = elements.find(eid);
    if (it == elements.end()) {
      reply_error(res, 404, "no such element", "unknown element id " + eid);
      return;
    }
    StepKind applied = kind;
    if (kind == StepKind::input) {
      // send-keys to a select chooses the option; everywhere else it types
      html::Document dom = html::Document::parse(session->current_html());
      const html::Node* node = dom.resolve(Locator{LocatorStrategy::by_css, it->second.second});
      if (node != nullptr && node->tag == "select") applied = StepKind::select_option;
    }
    ActResult result = session->act(it->second.first + "\n" + it->second.second, applied, value);
    if (result.ok) {
      reply(res, 200, nullptr);
    } else if (result.note.rfind("stale element", 0) == 0) {
      reply_error(res, 404, "stale element reference", result.note);
    } else {
      reply_error(res, 400, "element not interactable", result.note);
    }
  }
};

LoopbackWebDriverServer::LoopbackWebDriverServer(std::shared_ptr<const SimSite> site)
    : impl_(std::make_unique<Impl>(std::move(site))) {}

LoopbackWebDriverServer::~LoopbackWebDriverServer() { stop(); }

void LoopbackWebDriverServer::start() {
  impl_->routes();
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) {
    throw Error(ErrorCode::gateway_transport, "loopback server could not bind");
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void LoopbackWebDriverServer::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace paffa
