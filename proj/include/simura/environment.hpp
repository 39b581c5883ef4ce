#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "simura/actions.hpp"
#include "simura/core.hpp"
#include "simura/errors.hpp"

// Environment contract plus a deterministic synthetic-website simulator.
// The mock is a pure function of (site graph, action history), which is what
// makes episode replays byte-identical.

namespace simura {

struct EnvError {
  std::string kind;  // "action_rejected" | "crash"
  std::string message;
  bool operator==(const EnvError&) const = default;
};

struct StepResult {
  Observation observation;
  bool terminated = false;
  std::optional<EnvError> env_error;
};

inline void to_json(nlohmann::json& j, const EnvError& e) {
  j = nlohmann::json{{"kind", e.kind}, {"message", e.message}};
}
inline void from_json(const nlohmann::json& j, EnvError& e) {
  j.at("kind").get_to(e.kind);
  j.at("message").get_to(e.message);
}

class Environment {
 public:
  virtual ~Environment() = default;
  virtual Observation reset(const GoalSpec& goal) = 0;
  virtual StepResult step(const ConcreteAction& action) = 0;
};

// --- observation formatting ---------------------------------------------------

struct PageView {
  std::string url;
  int64_t scroll = 0;
  int64_t window = 720;
  int64_t height = 720;
  std::string axtree;
  std::optional<std::string> last_action_error;
};

// Header arithmetic: remaining pixels below the viewport, progress of the
// viewport bottom through the page, clamped to [0, 100].
inline Observation format_observation(const PageView& v) {
  Observation obs;
  obs.url = v.url;
  obs.scroll_position = v.scroll;
  obs.window_height = v.window;
  obs.webpage_height = v.height;
  obs.remaining_pixels = std::max<int64_t>(0, v.height - v.window - v.scroll);
  double progress = v.height > 0
                        ? static_cast<double>(v.scroll + v.window) / static_cast<double>(v.height) *
                              100.0
                        : 100.0;
  obs.scrolling_progress = std::clamp(progress, 0.0, 100.0);
  obs.axtree_text = v.axtree;
  obs.last_action_error = v.last_action_error;
  return obs;
}

// --- site graph fixtures --------------------------------------------------------

struct SiteElement {
  std::string bid;  // empty renders without a [bid] prefix
  std::string role;
  std::string name;
  int depth = 0;
  std::optional<int> y;  // defaults to 24px per element index
  std::string value;     // current form value, rendered when non-empty
};

struct FormSpec {
  std::string kind;  // "text" | "select"
  std::vector<std::string> options;
};

struct SitePage {
  std::string url;
  int height = 720;
  bool crash = false;
  std::vector<SiteElement> elements;
  std::map<std::string, std::string> links;  // bid -> page_id
  std::map<std::string, FormSpec> forms;     // bid -> input semantics
};

struct SiteGraph {
  std::map<std::string, SitePage> pages;
  std::string initial_page;
  int window_height = 720;
};

inline void from_json(const nlohmann::json& j, SiteElement& e) {
  e = SiteElement{};
  if (j.contains("bid")) j.at("bid").get_to(e.bid);
  j.at("role").get_to(e.role);
  j.at("name").get_to(e.name);
  if (j.contains("depth")) j.at("depth").get_to(e.depth);
  if (j.contains("y")) e.y = j.at("y").get<int>();
  if (j.contains("value")) j.at("value").get_to(e.value);
}
inline void from_json(const nlohmann::json& j, FormSpec& f) {
  f = FormSpec{};
  j.at("kind").get_to(f.kind);
  if (j.contains("options")) j.at("options").get_to(f.options);
}
inline void from_json(const nlohmann::json& j, SitePage& p) {
  p = SitePage{};
  j.at("url").get_to(p.url);
  if (j.contains("height")) j.at("height").get_to(p.height);
  if (j.contains("crash")) j.at("crash").get_to(p.crash);
  if (j.contains("elements")) j.at("elements").get_to(p.elements);
  if (j.contains("links")) j.at("links").get_to(p.links);
  if (j.contains("forms")) j.at("forms").get_to(p.forms);
}
inline void from_json(const nlohmann::json& j, SiteGraph& g) {
  g = SiteGraph{};
  j.at("pages").get_to(g.pages);
  j.at("initial_page").get_to(g.initial_page);
  if (j.contains("window_height")) j.at("window_height").get_to(g.window_height);
}

inline void validate_site_graph(const SiteGraph& g) {
  if (!g.pages.count(g.initial_page)) {
    fail(ErrorKind::ConfigError, "initial_page '" + g.initial_page + "' is not a page");
  }
  for (const auto& [id, page] : g.pages) {
    auto has_bid = [&](const std::string& bid) {
      return std::any_of(page.elements.begin(), page.elements.end(),
                         [&](const SiteElement& e) { return e.bid == bid; });
    };
    for (const auto& [bid, target] : page.links) {
      if (!has_bid(bid)) {
        fail(ErrorKind::ConfigError, "page '" + id + "' links unknown bid '" + bid + "'");
      }
      if (!g.pages.count(target)) {
        fail(ErrorKind::ConfigError, "page '" + id + "' links to unknown page '" + target + "'");
      }
    }
    for (const auto& [bid, form] : page.forms) {
      if (!has_bid(bid)) {
        fail(ErrorKind::ConfigError, "page '" + id + "' declares form on unknown bid '" + bid + "'");
      }
      if (form.kind != "text" && form.kind != "select") {
        fail(ErrorKind::ConfigError, "page '" + id + "' form '" + bid + "' has unknown kind");
      }
    }
  }
}

inline SiteGraph load_site_graph(const nlohmann::json& j) {
  SiteGraph g = j.get<SiteGraph>();
  validate_site_graph(g);
  return g;
}

inline SiteGraph load_site_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::ConfigError, "cannot open site fixture '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::ConfigError, "site fixture '" + path + "' is not JSON");
  return load_site_graph(j);
}

// --- mock environment -----------------------------------------------------------

class MockEnvironment : public Environment {
 public:
  explicit MockEnvironment(SiteGraph graph) : graph_(std::move(graph)) {
    validate_site_graph(graph_);
  }

  Observation reset(const GoalSpec&) override {
    page_ = graph_.initial_page;
    scroll_ = 0;
    history_ = {page_};
    history_index_ = 0;
    values_.clear();
    terminated_ = false;
    last_error_.reset();
    return observe();
  }

  StepResult step(const ConcreteAction& action) override {
    if (terminated_) {
      return reject("episode already terminated");
    }
    last_error_.reset();
    return std::visit([&](const auto& a) { return apply(a); }, action);
  }

  const std::string& current_page() const { return page_; }

 private:
  SiteGraph graph_;
  std::string page_;
  int64_t scroll_ = 0;
  std::vector<std::string> history_;
  size_t history_index_ = 0;
  std::map<std::pair<std::string, std::string>, std::string> values_;  // (page,bid) -> value
  bool terminated_ = false;
  std::optional<std::string> last_error_;

  const SitePage& page() const { return graph_.pages.at(page_); }

  const SiteElement* find_element(const std::string& bid) const {
    for (const auto& e : page().elements) {
      if (!e.bid.empty() && e.bid == bid) return &e;
    }
    return nullptr;
  }

  std::string element_value(const SiteElement& e) const {
    auto it = values_.find({page_, e.bid});
    return it == values_.end() ? e.value : it->second;
  }

  Observation observe() const {
    const SitePage& p = page();
    std::string axtree;
    int64_t default_y = 0;
    for (const auto& e : p.elements) {
      int64_t y = e.y ? *e.y : default_y;
      default_y = y + 24;
      if (y < scroll_ || y >= scroll_ + graph_.window_height) continue;
      if (!axtree.empty()) axtree.push_back('\n');
      axtree.append(static_cast<size_t>(e.depth) * 4, ' ');
      if (!e.bid.empty()) axtree += "[" + e.bid + "] ";
      axtree += e.role + " '" + e.name + "'";
      std::string value = element_value(e);
      if (!value.empty()) axtree += " value='" + value + "'";
    }
    PageView v{p.url, scroll_, graph_.window_height, p.height, std::move(axtree), last_error_};
    return format_observation(v);
  }

  StepResult reject(const std::string& message) {
    last_error_ = message;
    StepResult r;
    r.observation = observe();
    r.env_error = EnvError{"action_rejected", message};
    return r;
  }

  StepResult ok() {
    StepResult r;
    r.observation = observe();
    return r;
  }

  StepResult navigate_to(const std::string& target) {
    page_ = target;
    scroll_ = 0;
    history_.resize(history_index_ + 1);
    history_.push_back(target);
    history_index_ = history_.size() - 1;
    if (page().crash) {
      terminated_ = true;
      StepResult r;
      r.observation = observe();
      r.terminated = true;
      r.env_error = EnvError{"crash", "page '" + target + "' crashed the browser"};
      return r;
    }
    return ok();
  }

  StepResult apply(const NoopAction&) { return ok(); }

  StepResult apply(const SendMsgAction&) {
    terminated_ = true;
    StepResult r;
    r.observation = observe();
    r.terminated = true;
    return r;
  }

  StepResult apply(const ScrollAction& a) {
    int64_t max_scroll = std::max<int64_t>(0, page().height - graph_.window_height);
    scroll_ = std::clamp<int64_t>(scroll_ + static_cast<int64_t>(a.delta_y), 0, max_scroll);
    return ok();
  }

  StepResult apply(const FillAction& a) {
    const SiteElement* e = find_element(a.bid);
    if (!e) return reject("no element with bid '" + a.bid + "'");
    auto form = page().forms.find(a.bid);
    if (form == page().forms.end() || form->second.kind != "text") {
      return reject("element '" + a.bid + "' is not a fillable input");
    }
    values_[{page_, a.bid}] = a.value;
    return ok();
  }

  StepResult apply(const SelectOptionAction& a) {
    const SiteElement* e = find_element(a.bid);
    if (!e) return reject("no element with bid '" + a.bid + "'");
    auto form = page().forms.find(a.bid);
    if (form == page().forms.end() || form->second.kind != "select") {
      return reject("element '" + a.bid + "' is not a select input");
    }
    for (const auto& option : a.options) {
      if (std::find(form->second.options.begin(), form->second.options.end(), option) ==
          form->second.options.end()) {
        return reject("element '" + a.bid + "' has no option '" + option + "'");
      }
    }
    std::string joined;
    for (const auto& option : a.options) {
      if (!joined.empty()) joined += ", ";
      joined += option;
    }
    values_[{page_, a.bid}] = joined;
    return ok();
  }

  StepResult click_like(const std::string& bid) {
    const SiteElement* e = find_element(bid);
    if (!e) return reject("no element with bid '" + bid + "'");
    auto link = page().links.find(bid);
    if (link != page().links.end()) return navigate_to(link->second);
    return ok();  // clickable but inert
  }

  StepResult apply(const ClickAction& a) { return click_like(a.bid); }
  StepResult apply(const DblclickAction& a) { return click_like(a.bid); }

  StepResult apply(const HoverAction& a) {
    return find_element(a.bid) ? ok() : reject("no element with bid '" + a.bid + "'");
  }
  StepResult apply(const PressAction& a) {
    return find_element(a.bid) ? ok() : reject("no element with bid '" + a.bid + "'");
  }
  StepResult apply(const FocusAction& a) {
    return find_element(a.bid) ? ok() : reject("no element with bid '" + a.bid + "'");
  }

  StepResult apply(const ClearAction& a) {
    const SiteElement* e = find_element(a.bid);
    if (!e) return reject("no element with bid '" + a.bid + "'");
    if (!page().forms.count(a.bid)) return reject("element '" + a.bid + "' is not an input");
    values_[{page_, a.bid}] = "";
    return ok();
  }

  StepResult apply(const DragAndDropAction&) {
    return reject("drag_and_drop is not supported by this environment");
  }
  StepResult apply(const UploadFileAction&) {
    return reject("upload_file is not supported by this environment");
  }

  StepResult apply(const GoBackAction&) {
    if (history_index_ > 0) {
      --history_index_;
      page_ = history_[history_index_];
      scroll_ = 0;
    }
    return ok();
  }

  StepResult apply(const GoForwardAction&) {
    if (history_index_ + 1 < history_.size()) {
      ++history_index_;
      page_ = history_[history_index_];
      scroll_ = 0;
    }
    return ok();
  }

  StepResult apply(const GotoAction& a) {
    for (const auto& [id, p] : graph_.pages) {
      if (p.url == a.url) return navigate_to(id);
    }
    return reject("no page with url '" + a.url + "'");
  }
};

}  // namespace simura
