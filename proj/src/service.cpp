#include "teachlab/service.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "teachlab/analysis.hpp"
#include "teachlab/errors.hpp"

namespace teachlab {

namespace {

constexpr double kSliderBound = 1.0;

double checked_slider_value(double value) {
  if (!std::isfinite(value) || std::abs(value) > kSliderBound) {
    throw RequestError("feedback value must lie in [-1, 1]");
  }
  return value;
}

FeedbackValue to_feedback(const FeedbackRequest& req) {
  if (req.do_nothing == req.value.has_value()) throw RequestError("give exactly one of value and do_nothing");
  if (req.do_nothing) return FeedbackValue::do_nothing();
  return FeedbackValue::reward(checked_slider_value(*req.value));
}

std::string outcome_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::kSuccess:
      return "success";
    case OutcomeKind::kTimeout:
      return "timeout";
    case OutcomeKind::kInProgress:
      return "in_progress";
  }
  return "unknown";
}

}  // namespace

SessionConfig session_config_from_json(const nlohmann::json& doc) {
  SessionConfig cfg;
  try {
    if (!doc.is_object()) throw RequestError("session config must be an object");
    cfg.condition = doc.value("condition", cfg.condition);
    cfg.sync = doc.value("sync", cfg.sync);
    cfg.n_dogs = doc.value("n_dogs", cfg.n_dogs);
    cfg.max_steps = doc.value("max_steps", cfg.max_steps);
    cfg.epsilon = doc.value("epsilon", cfg.epsilon);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw RequestError(std::string("session config: ") + e.what());
  }
  try {
    condition_spec(cfg.condition);
  } catch (const DomainError& e) {
    throw RequestError(e.what());
  }
  if (cfg.n_dogs < 1) throw RequestError("n_dogs must be at least 1");
  if (cfg.max_steps < 1) throw RequestError("max_steps must be at least 1");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) throw RequestError("epsilon must lie in [0, 1]");
  return cfg;
}

nlohmann::json to_json(const SessionConfig& cfg) {
  return {{"condition", cfg.condition}, {"sync", cfg.sync},       {"n_dogs", cfg.n_dogs},
          {"max_steps", cfg.max_steps}, {"epsilon", cfg.epsilon}, {"seed", cfg.seed}};
}

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kAwaitingFeedback:
      return "AwaitingFeedback";
    case Phase::kDogFinished:
      return "DogFinished";
    case Phase::kSessionFinished:
      return "SessionFinished";
  }
  return "Unknown";
}

ScannerDisplay scanner_display(const QTable& q, const TeachingGoal& goal) {
  ScannerDisplay d;
  double top = 0.0;
  for (double x : q.data()) top = std::max(top, std::abs(x));
  d.scale = std::max(top, kArrowScaleFloor);
  auto sign = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
  for (int s = 0; s < q.n_states(); ++s) {
    ScannerCell c;
    c.q_left = q.at(s, kLeft.index);
    c.q_right = q.at(s, kRight.index);
    c.left_length = std::abs(c.q_left) / d.scale;
    c.right_length = std::abs(c.q_right) / d.scale;
    c.left_sign = sign(c.q_left);
    c.right_sign = sign(c.q_right);
    c.greedy = c.q_left > c.q_right ? "left" : (c.q_right > c.q_left ? "right" : "tie");
    const auto target = goal.target_action[static_cast<std::size_t>(s)];
    c.goal_match = (target == kRight && c.greedy == "right") || (target == kLeft && c.greedy == "left");
    d.cells.push_back(std::move(c));
  }
  return d;
}

nlohmann::json to_json(const ScannerDisplay& display) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : display.cells) {
    cells.push_back({{"q_left", c.q_left},
                     {"q_right", c.q_right},
                     {"left_length", c.left_length},
                     {"right_length", c.right_length},
                     {"left_sign", c.left_sign},
                     {"right_sign", c.right_sign},
                     {"greedy", c.greedy},
                     {"goal_match", c.goal_match}});
  }
  return {{"scale", display.scale}, {"cells", cells}};
}

nlohmann::json to_json(const SessionState& st) {
  nlohmann::json j{{"session_id", st.session_id},
                   {"config", to_json(st.config)},
                   {"dog_index", st.dog_index},
                   {"phase", to_string(st.phase)},
                   {"step_counter", st.step_counter},
                   {"position", st.position},
                   {"display", to_json(st.display)}};
  if (st.pending) {
    j["pending"] = {{"s", st.pending->s},
                    {"a", st.pending->a},
                    {"s_next", st.pending->s_next},
                    {"reached_absorb", st.pending->reached_absorb},
                    {"squirrel", st.pending->squirrel},
                    {"squirrel_side", st.pending->squirrel ? (st.pending->a == kLeft.index ? "left" : "right") : ""}};
  } else {
    j["pending"] = nullptr;
  }
  nlohmann::json dogs = nlohmann::json::array();
  for (const auto& d : st.finished_dogs) {
    dogs.push_back({{"dog_index", d.dog_index}, {"outcome", outcome_name(d.outcome)}, {"steps", d.steps}});
  }
  j["finished_dogs"] = dogs;
  return j;
}

FeedbackRequest feedback_request_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw RequestError("feedback must be an object");
  FeedbackRequest req;
  if (doc.contains("value") && !doc.at("value").is_null()) {
    if (!doc.at("value").is_number()) throw RequestError("value must be a number");
    req.value = doc.at("value").get<double>();
  }
  if (doc.contains("do_nothing")) {
    if (!doc.at("do_nothing").is_boolean()) throw RequestError("do_nothing must be a boolean");
    req.do_nothing = doc.at("do_nothing").get<bool>();
  }
  if (req.do_nothing == req.value.has_value()) throw RequestError("give exactly one of value and do_nothing");
  return req;
}

// ---------------------------------------------------------------------------

struct SessionService::Session {
  std::string id;
  SessionConfig config;
  LearnerSpec spec;
  TeachingGoal goal;
  int dog_index = 0;
  Phase phase = Phase::kAwaitingFeedback;
  std::unique_ptr<TeachingEpisode> episode;
  std::vector<SessionLog> finished;
  std::vector<DogResult> results;
  std::optional<std::string> log_path;
  mutable std::shared_mutex mutex;

  void append(const nlohmann::json& line) const {
    if (!log_path) return;
    std::ofstream out(*log_path, std::ios::app);
    out << line.dump() << '\n';
    out.flush();
  }

  void start_dog(const EnvModel& env) {
    EpisodeConfig ec{config.epsilon, config.max_steps, split_seed(config.seed, static_cast<std::uint64_t>(dog_index)),
                     kSliderBound};
    episode = std::make_unique<TeachingEpisode>(env, make_learner(spec, env), goal, ec);
    episode->log().meta = {{"participant_id", id},
                           {"condition", config.condition},
                           {"sync", config.sync},
                           {"dog_index", dog_index},
                           {"n_dogs", config.n_dogs}};
    append(header_to_json(episode->log()));
    episode->advance();
    phase = Phase::kAwaitingFeedback;
  }

  SessionState snapshot() const {
    SessionState st;
    st.session_id = id;
    st.config = config;
    st.dog_index = dog_index;
    st.phase = phase;
    st.finished_dogs = results;
    st.position = episode->position().index;
    st.display = scanner_display(episode->learner().q, goal);
    st.step_counter = static_cast<int>(episode->log().steps.size()) + (episode->has_pending() ? 1 : 0);
    if (episode->has_pending()) {
      const auto& obs = episode->pending();
      st.pending = PendingMove{obs.s.index, obs.a.index, obs.s_next.index, obs.reached_absorb, obs.explored};
    }
    return st;
  }
};

SessionService::SessionService(std::optional<std::string> data_dir, EnvModel env)
    : env_(std::move(env)), data_dir_(std::move(data_dir)), assign_rng_(0x5e55105ULL) {
  if (env_.n_actions() != 2) throw DomainError("the session service drives two-action environments");
  if (data_dir_) std::filesystem::create_directories(*data_dir_);
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

SessionState SessionService::create_session(const SessionConfig& raw) {
  const auto cfg = session_config_from_json(to_json(raw));
  auto session = std::make_shared<Session>();
  session->config = cfg;
  session->spec = condition_spec(cfg.condition);
  session->goal = dog_goal(env_);
  {
    std::unique_lock lock(sessions_mutex_);
    while (true) {
      std::ostringstream id;
      id << "session-" << std::setw(6) << std::setfill('0') << next_id_++;
      const bool taken = sessions_.count(id.str()) > 0 ||
                         (data_dir_ && std::filesystem::exists(std::filesystem::path(*data_dir_) / (id.str() + ".ndjson")));
      if (!taken) {
        session->id = id.str();
        break;
      }
    }
    if (data_dir_) session->log_path = (std::filesystem::path(*data_dir_) / (session->id + ".ndjson")).string();
    sessions_[session->id] = session;
  }
  std::unique_lock lock(session->mutex);
  session->start_dog(env_);
  return session->snapshot();
}

SessionState SessionService::get(const std::string& id) const {
  const auto session = find(id);
  std::shared_lock lock(session->mutex);
  return session->snapshot();
}

ScannerDisplay SessionService::preview_feedback(const std::string& id, double value) const {
  const auto session = find(id);
  std::shared_lock lock(session->mutex);
  if (!session->config.sync) throw ForbiddenError("live preview is disabled for this session");
  if (session->phase != Phase::kAwaitingFeedback) throw ConflictError("no move is awaiting feedback");
  const auto next = session->episode->preview(FeedbackValue::reward(checked_slider_value(value)));
  return scanner_display(next.q, session->goal);
}

SessionState SessionService::submit_feedback(const std::string& id, const FeedbackRequest& req) {
  const auto session = find(id);
  std::unique_lock lock(session->mutex);
  if (session->phase != Phase::kAwaitingFeedback) throw ConflictError("no move is awaiting feedback");
  const auto fb = to_feedback(req);
  auto& episode = *session->episode;
  const auto& rec = episode.commit(fb);
  session->append(step_to_json(rec));
  if (episode.finished()) {
    const auto outcome = episode.log().outcome();
    session->results.push_back({session->dog_index, outcome.kind, outcome.steps_used});
    session->finished.push_back(episode.log());
    session->phase = session->dog_index + 1 >= session->config.n_dogs ? Phase::kSessionFinished : Phase::kDogFinished;
  } else {
    episode.advance();
  }
  return session->snapshot();
}

SessionState SessionService::next_dog(const std::string& id) {
  const auto session = find(id);
  std::unique_lock lock(session->mutex);
  if (session->phase != Phase::kDogFinished) throw ConflictError("the current dog is not finished");
  ++session->dog_index;
  session->start_dog(env_);
  return session->snapshot();
}

std::vector<SessionLog> SessionService::export_session(const std::string& id) const {
  const auto session = find(id);
  std::shared_lock lock(session->mutex);
  auto logs = session->finished;
  if (!session->episode->finished()) logs.push_back(session->episode->log());
  return logs;
}

std::pair<std::string, bool> SessionService::assign_condition() {
  std::lock_guard lock(assign_mutex_);
  const auto& tags = condition_tags();
  const auto& tag = tags[assign_rng_.uniform_index(tags.size())];
  return {tag, assign_rng_.bernoulli(0.5)};
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

nlohmann::json parse_body(const std::string& body) {
  if (body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RequestError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

HttpResponse handle_request(SessionService& service, const std::string& method, const std::string& path,
                            const std::map<std::string, std::string>& query, const std::string& body) {
  static const std::regex session_route(R"(^/sessions/([A-Za-z0-9_-]+)(/(feedback|preview|export|next-dog))?$)");
  try {
    if (path == "/sessions") {
      if (method != "POST") return error_response(405, "method not allowed");
      return json_response(201, to_json(service.create_session(session_config_from_json(parse_body(body)))));
    }
    if (path == "/assign") {
      if (method != "POST") return error_response(405, "method not allowed");
      const auto [condition, sync] = service.assign_condition();
      return json_response(200, {{"condition", condition}, {"sync", sync}});
    }
    std::smatch m;
    if (!std::regex_match(path, m, session_route)) return error_response(404, "no such route");
    const std::string id = m[1];
    const std::string action = m[3];
    if (action.empty()) {
      if (method != "GET") return error_response(405, "method not allowed");
      return json_response(200, to_json(service.get(id)));
    }
    if (action == "feedback") {
      if (method != "POST") return error_response(405, "method not allowed");
      return json_response(200, to_json(service.submit_feedback(id, feedback_request_from_json(parse_body(body)))));
    }
    if (action == "next-dog") {
      if (method != "POST") return error_response(405, "method not allowed");
      return json_response(200, to_json(service.next_dog(id)));
    }
    if (action == "preview") {
      if (method != "GET") return error_response(405, "method not allowed");
      const auto it = query.find("value");
      if (it == query.end()) throw RequestError("missing value parameter");
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(it->second, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != it->second.size()) throw RequestError("value must be a number");
      return json_response(200, to_json(service.preview_feedback(id, value)));
    }
    // export
    if (method != "GET") return error_response(405, "method not allowed");
    std::ostringstream out;
    for (const auto& log : service.export_session(id)) write_session_log(out, log);
    return {200, "application/x-ndjson", out.str()};
  } catch (const RequestError& e) {
    return error_response(400, e.what());
  } catch (const ForbiddenError& e) {
    return error_response(403, e.what());
  } catch (const NotFoundError& e) {
    return error_response(404, e.what());
  } catch (const ConflictError& e) {
    return error_response(409, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;
  explicit Impl(SessionService& s) : service(s) {}
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto out = handle_request(impl_->service, req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  impl_->server.Get(R"(/.*)", forward);
  impl_->server.Post(R"(/.*)", forward);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace teachlab
