#include "latlex/server.hpp"

#include <httplib.h>

namespace latlex {

TaskQueue::TaskQueue(std::vector<Task> tasks, int assignments)
    : tasks_(std::move(tasks)), served_(tasks_.size(), 0), completed_(tasks_.size(), 0), assignments_(assignments) {
  if (assignments < 1) throw Error(ErrorKind::InvalidConfig, "assignment target must be >= 1");
}

std::optional<TaskQueue::Task> TaskQueue::next() {
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (served_[i] < assignments_ && completed_[i] < assignments_) {
      ++served_[i];
      return tasks_[i];
    }
  }
  return std::nullopt;
}

TaskQueue::Submit TaskQueue::submit(const std::string& task_id, const std::function<void()>& on_accept) {
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].task_id != task_id) continue;
    if (completed_[i] >= assignments_) return Submit::Exhausted;
    if (on_accept) on_accept();
    ++completed_[i];
    return Submit::Accepted;
  }
  return Submit::UnknownTask;
}

std::optional<TaskQueue::Task> TaskQueue::find(const std::string& task_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& t : tasks_)
    if (t.task_id == task_id) return t;
  return std::nullopt;
}

TaskQueue::Progress TaskQueue::progress() const {
  std::lock_guard lock(mutex_);
  Progress p;
  p.tasks = static_cast<int>(tasks_.size());
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    p.served += served_[i];
    p.completed += completed_[i];
    p.remaining += assignments_ - completed_[i];
  }
  return p;
}

std::string base64_encode(const std::string& bytes) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += {table[v >> 18], table[(v >> 12) & 63], table[(v >> 6) & 63], table[v & 63]};
  }
  if (i + 1 == bytes.size()) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += {table[v >> 18], table[(v >> 12) & 63], '=', '='};
  } else if (i + 2 == bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += {table[v >> 18], table[(v >> 12) & 63], table[(v >> 6) & 63], '='};
  }
  return out;
}

namespace {

std::vector<TaskQueue::Task> tasks_for(const std::vector<Direction>& directions) {
  std::vector<TaskQueue::Task> tasks;
  for (const auto& d : directions) tasks.push_back({d.id, d.class_index});
  return tasks;
}

HttpReply error_reply(int status, const std::string& message) { return {status, Json{{"error", message}}.dump()}; }

}  // namespace

AnnotationService::AnnotationService(const SyntheticWorld& world, std::vector<Direction> directions, double alpha,
                                     std::filesystem::path raw_path, int assignments)
    : world_(world),
      directions_(direction_store(directions)),
      alpha_(alpha),
      raw_path_(std::move(raw_path)),
      queue_(tasks_for(directions), assignments) {
  for (const auto& d : directions)
    if (d.z.size() != world.latent_dim()) throw Error(ErrorKind::DimensionMismatch, "direction " + d.id + " has no latent");
}

HttpReply AnnotationService::get_task() {
  const auto task = queue_.next();
  if (!task) return {204, ""};
  const Direction& d = directions_.at(task->task_id);
  Json j;
  j["task_id"] = task->task_id;
  j["class"] = world_.class_names()[static_cast<std::size_t>(task->class_index)];
  j["image_format"] = "ppm";
  j["before_image"] = base64_encode(encode_pnm(render(world_, d.z, d.class_index)));
  j["after_image"] = base64_encode(encode_pnm(apply_concept(world_, d.z, d.class_index, d, alpha_)));
  j["instructions"] = "Describe the main visual changes from the left image to the right image.";
  return {200, j.dump()};
}

HttpReply AnnotationService::post_annotation(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception&) {
    return error_reply(400, "body is not JSON");
  }
  if (!j.is_object()) return error_reply(400, "body must be an object");
  for (const char* key : {"task_id", "annotator_id", "text"})
    if (!j.contains(key) || !j[key].is_string()) return error_reply(400, std::string("missing string field ") + key);
  const std::string text = j["text"].get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) return error_reply(400, "text is empty");

  const std::string task_id = j["task_id"].get<std::string>();
  const auto task = queue_.find(task_id);
  if (!task) return error_reply(409, "unknown task_id");
  RawAnnotation raw;
  raw.direction_id = task_id;
  raw.annotator_id = j["annotator_id"].get<std::string>();
  raw.class_name = world_.class_names()[static_cast<std::size_t>(task->class_index)];
  raw.alpha = alpha_;
  raw.text = text;
  const auto result = queue_.submit(task_id, [&] { append_line(raw_path_, raw_to_json(raw).dump()); });
  if (result != TaskQueue::Submit::Accepted) return error_reply(409, "task already has its annotations");
  return {200, Json{{"ok", true}}.dump()};
}

HttpReply AnnotationService::get_progress() const {
  const auto p = queue_.progress();
  return {200, Json{{"tasks", p.tasks}, {"served", p.served}, {"completed", p.completed}, {"remaining", p.remaining}}
                   .dump()};
}

void AnnotationService::listen(const std::string& host, int port, const std::filesystem::path& ui_dir) {
  httplib::Server server;
  // One worker thread: requests are handled one at a time.
  server.new_task_queue = [] { return new httplib::ThreadPool(1); };
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    if (!r.body.empty()) res.set_content(r.body, "application/json");
  };
  server.Get("/api/task", [&](const httplib::Request&, httplib::Response& res) { send(res, get_task()); });
  server.Post("/api/annotation",
              [&](const httplib::Request& req, httplib::Response& res) { send(res, post_annotation(req.body)); });
  server.Get("/api/progress", [&](const httplib::Request&, httplib::Response& res) { send(res, get_progress()); });
  if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir.string()))
    throw Error(ErrorKind::Io, "UI directory not found: " + ui_dir.string());
  if (!server.listen(host, port)) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
}

}  // namespace latlex
