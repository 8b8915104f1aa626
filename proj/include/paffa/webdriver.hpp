#pragma once

#include <memory>
#include <string>

#include "paffa/executor.hpp"
#include "paffa/sitesim.hpp"

namespace paffa {

/// Session over the W3C WebDriver HTTP+JSON wire protocol. Implemented
/// subset: new-session, navigate, find-element (css / xpath / link-text,
/// with id and name mapped onto css attribute selectors), element-click,
/// element-send-keys, element-clear, get-page-source, delete-session.
class WebDriverSession : public Session {
 public:
  explicit WebDriverSession(std::string base_url);
  ~WebDriverSession() override;

  void open(const std::string& start_url) override;
  bool is_open() const override { return !session_id_.empty(); }
  std::string current_url() override;
  std::string current_html() override;
  /// Live backends have no page-id notion; the URL stands in for it.
  std::string current_page_id() override { return current_url(); }
  FindResult find(const Locator& locator) override;
  ActResult act(const std::string& handle, StepKind kind, const std::string& value) override;
  ActResult navigate(const std::string& url) override;
  void wait(double seconds) override;
  void close() override;

 private:
  struct WireResult {
    int status = 0;
    json value;
    std::string error;  // WebDriver error code, when status >= 400
  };
  WireResult send(const std::string& method, const std::string& path, const json& body);

  std::string base_url_;
  std::string session_id_;
};

/// In-process WebDriver endpoint wrapping a SimSession — the conformance
/// stub used to check that the wire client and the direct simulator session
/// behave identically. Listens on an ephemeral localhost port.
class LoopbackWebDriverServer {
 public:
  explicit LoopbackWebDriverServer(std::shared_ptr<const SimSite> site);
  ~LoopbackWebDriverServer();

  void start();
  void stop();
  int port() const { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace paffa
