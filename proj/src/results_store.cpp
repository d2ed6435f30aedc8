#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>

#include "race/harness.hpp"

namespace race::harness {

void to_json(nlohmann::json& j, const SubmissionResult& v) {
  j = nlohmann::json{{"participant", v.participant},
                     {"stage", v.stage},
                     {"camera_config", to_string(v.camera_config)},
                     {"cameras", v.cameras},
                     {"track", v.track},
                     {"runs", v.runs},
                     {"report", v.report},
                     {"entries", v.entries},
                     {"valid", v.valid},
                     {"note", v.note}};
  j["practice_nsi"] = v.practice_nsi ? nlohmann::json(*v.practice_nsi) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SubmissionResult& v) {
  v.participant = j.at("participant").get<std::string>();
  v.stage = j.at("stage").get<int>();
  if (v.stage != 1 && v.stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  v.camera_config = parse_camera_config(j.at("camera_config").get<std::string>());
  v.cameras = j.at("cameras").get<std::vector<std::string>>();
  v.track = j.at("track").get<std::string>();
  v.runs = j.at("runs").get<std::vector<metrics::EpisodeResult>>();
  v.report = j.at("report").get<metrics::MetricsReport>();
  v.entries = j.value("entries", 1);
  v.valid = j.value("valid", true);
  v.note = j.value("note", std::string{});
  v.practice_nsi.reset();
  if (auto it = j.find("practice_nsi"); it != j.end() && !it->is_null()) v.practice_nsi = it->get<int>();
}

void ResultsStore::append(const SubmissionResult& result) {
  std::string line = nlohmann::json(result).dump();
  line.push_back('\n');
  std::lock_guard lock(mu_);
  // one write(2) per record on an O_APPEND descriptor keeps lines whole
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw HarnessError("cannot open " + path_.string() + ": " + std::strerror(errno));
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw HarnessError("cannot write " + path_.string() + ": " + why);
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

ResultsStore::Loaded ResultsStore::load() const {
  std::lock_guard lock(mu_);
  Loaded out;
  std::ifstream in(path_);
  if (!in) return out;  // no store yet
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.results.push_back(nlohmann::json::parse(line).get<SubmissionResult>());
    } catch (const std::exception& e) {
      ++out.skipped;
      out.warnings.push_back(path_.string() + ":" + std::to_string(lineno) + ": skipped (" + e.what() + ")");
    }
  }
  return out;
}

}  // namespace race::harness
