#pragma once

// Task queue and HTTP front end for collecting human annotations into the
// raw-corpus file.

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "latlex/io.hpp"

namespace latlex {

class TaskQueue {
 public:
  struct Task {
    std::string task_id;  // the direction id
    int class_index = 0;
  };
  enum class Submit { Accepted, UnknownTask, Exhausted };
  struct Progress {
    int tasks = 0;
    int served = 0;
    int completed = 0;
    int remaining = 0;  // annotations still wanted
  };

  TaskQueue(std::vector<Task> tasks, int assignments);

  /// Next task whose hand-outs are below the assignment target, in order.
  std::optional<Task> next();
  /// Checks and records one completed annotation; the check and the write
  /// happen under one lock so the target is never exceeded.
  Submit submit(const std::string& task_id, const std::function<void()>& on_accept = {});
  std::optional<Task> find(const std::string& task_id) const;
  Progress progress() const;

 private:
  std::vector<Task> tasks_;
  std::vector<int> served_;
  std::vector<int> completed_;
  int assignments_;
  mutable std::mutex mutex_;
};

struct HttpReply {
  int status = 200;
  std::string body;  // JSON, or empty for 204
};

class AnnotationService {
 public:
  AnnotationService(const SyntheticWorld& world, std::vector<Direction> directions, double alpha,
                    std::filesystem::path raw_path, int assignments = 1);

  HttpReply get_task();
  HttpReply post_annotation(const std::string& body);
  HttpReply get_progress() const;

  /// Blocks serving on host:port; the static UI is served from ui_dir when set.
  void listen(const std::string& host, int port, const std::filesystem::path& ui_dir = {});

 private:
  const SyntheticWorld& world_;
  std::map<std::string, Direction> directions_;
  double alpha_;
  std::filesystem::path raw_path_;
  TaskQueue queue_;
};

std::string base64_encode(const std::string& bytes);

}  // namespace latlex
