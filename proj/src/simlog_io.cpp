#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccity/digest.hpp"
#include "ccity/engine.hpp"
#include "ccity/error.hpp"
#include "json.hpp"

namespace ccity {

using nlohmann::json;

namespace {

void put_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

void put_string(std::string& out, const std::string& s) { out += json(s).dump(); }

void put_key(std::string& out, const char* key) {
  out += '"';
  out += key;
  out += "\":";
}

std::string header_line(const SimLog& log) {
  std::string out = "{\"type\":\"header\",\"format\":\"ccity-simlog\",\"version\":1,";
  put_key(out, "scenario_id");
  put_string(out, log.scenario_id);
  out += ',';
  put_key(out, "config_digest");
  put_string(out, log.config_digest);
  out += ',';
  put_key(out, "mode");
  put_string(out, std::string(to_string(log.mode)));
  out += ',';
  put_key(out, "frame_count");
  out += std::to_string(log.frames.size());
  out += ',';
  put_key(out, "frame_period");
  put_number(out, log.frame_period);
  out += ',';
  put_key(out, "extent");
  out += '[';
  put_number(out, log.extent.x);
  out += ',';
  put_number(out, log.extent.y);
  out += "],";
  put_key(out, "ground_truth");
  out += "{\"nodes\":[";
  for (std::size_t i = 0; i < log.ground_truth.nodes.size(); ++i) {
    if (i) out += ',';
    put_string(out, log.ground_truth.nodes[i]);
  }
  out += "],\"edges\":[";
  bool first = true;
  for (const auto& e : log.ground_truth.edges) {
    if (!first) out += ',';
    first = false;
    out += '[';
    put_string(out, e.leader);
    out += ',';
    put_string(out, e.follower);
    out += ']';
  }
  out += "]}}";
  return out;
}

std::string frame_line(const FrameLog& f) {
  std::string out = "{\"type\":\"frame\",\"i\":" + std::to_string(f.frame_index) + ",";
  put_key(out, "t");
  put_number(out, f.t);
  out += ",\"vehicles\":[";
  bool first = true;
  for (const auto& [id, vf] : f.vehicles) {
    if (!first) out += ',';
    first = false;
    out += "{\"id\":";
    put_string(out, id);
    out += ",\"x\":";
    put_number(out, vf.x);
    out += ",\"y\":";
    put_number(out, vf.y);
    out += ",\"z\":0.000000,\"roll\":0.000000,\"pitch\":0.000000,\"yaw\":";
    put_number(out, vf.yaw);
    out += ",\"v\":";
    put_number(out, vf.v);
    out += vf.done ? ",\"done\":true}" : ",\"done\":false}";
  }
  out += "],\"lights\":[";
  first = true;
  for (const auto& [id, ls] : f.lights) {
    if (!first) out += ',';
    first = false;
    out += "{\"id\":";
    put_string(out, id);
    out += ",\"ew\":\"";
    out += to_string(ls.ew);
    out += "\",\"ns\":\"";
    out += to_string(ls.ns);
    out += "\",\"since\":";
    put_number(out, ls.time_since_change);
    out += '}';
  }
  out += "]}";
  return out;
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorKind::kCorruptLog, why); }

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) corrupt("expected object");
  auto it = obj.find(key);
  if (it == obj.end()) corrupt(std::string("missing field '") + key + "'");
  return *it;
}

double num(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_number()) corrupt(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

std::string str(const json& obj, const char* key) {
  const json& v = field(obj, key);
  if (!v.is_string()) corrupt(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

json parse_line(const std::string& line, std::size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    corrupt("line " + std::to_string(lineno) + " is not a JSON object");
  }
  return j;
}

LightColor color(const json& obj, const char* key) {
  auto c = parse_light_color(str(obj, key));
  if (!c) corrupt("bad light colour");
  return *c;
}

}  // namespace

std::string serialize_log(const SimLog& log) {
  std::string body;
  for (const auto& f : log.frames) {
    body += frame_line(f);
    body += '\n';
  }
  std::string out = header_line(log);
  out += '\n';
  out += body;
  out += "{\"type\":\"trailer\",\"collisions\":[";
  for (std::size_t i = 0; i < log.collisions.size(); ++i) {
    const auto& c = log.collisions[i];
    if (i) out += ',';
    out += "{\"t\":";
    put_number(out, c.t);
    out += ",\"a\":";
    put_string(out, c.id_a);
    out += ",\"b\":";
    put_string(out, c.id_b);
    out += '}';
  }
  out += "],\"frames_digest\":\"" + sha256_hex(body) + "\"}\n";
  return out;
}

SimLog parse_log(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      const auto nl = text.find('\n', start);
      if (nl == std::string_view::npos) corrupt("truncated: last line has no newline");
      lines.emplace_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  if (lines.size() < 2) corrupt("missing header or trailer");

  SimLog log;
  const json header = parse_line(lines.front(), 1);
  if (str(header, "type") != "header" || str(header, "format") != "ccity-simlog") {
    corrupt("first line is not a simlog header");
  }
  log.scenario_id = str(header, "scenario_id");
  log.config_digest = str(header, "config_digest");
  auto mode = parse_mode(str(header, "mode"));
  if (!mode) corrupt("bad mode");
  log.mode = *mode;
  log.frame_period = num(header, "frame_period");
  const json& extent = field(header, "extent");
  if (!extent.is_array() || extent.size() != 2 || !extent[0].is_number() ||
      !extent[1].is_number()) {
    corrupt("bad extent");
  }
  log.extent = {extent[0].get<double>(), extent[1].get<double>()};
  const json& count = field(header, "frame_count");
  if (!count.is_number_unsigned()) corrupt("bad frame_count");
  const auto frame_count = count.get<std::uint64_t>();
  const json& gt = field(header, "ground_truth");
  const json& nodes = field(gt, "nodes");
  const json& edges = field(gt, "edges");
  if (!nodes.is_array() || !edges.is_array()) corrupt("bad ground_truth");
  for (const auto& n : nodes) {
    if (!n.is_string()) corrupt("bad node");
    log.ground_truth.nodes.push_back(n.get<std::string>());
  }
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      corrupt("bad edge");
    }
    log.ground_truth.edges.insert({e[0].get<std::string>(), e[1].get<std::string>()});
  }

  if (lines.size() != frame_count + 2) {
    corrupt("expected " + std::to_string(frame_count) + " frames, found " +
            std::to_string(lines.size() >= 2 ? lines.size() - 2 : 0));
  }
  std::string body;
  for (std::size_t li = 1; li + 1 < lines.size(); ++li) {
    body += lines[li];
    body += '\n';
    const json j = parse_line(lines[li], li + 1);
    if (str(j, "type") != "frame") corrupt("expected frame on line " + std::to_string(li + 1));
    FrameLog f;
    const json& idx = field(j, "i");
    if (!idx.is_number_integer() || idx.get<std::int64_t>() != static_cast<std::int64_t>(li - 1)) {
      corrupt("frame index out of sequence on line " + std::to_string(li + 1));
    }
    f.frame_index = static_cast<int>(li - 1);
    f.t = num(j, "t");
    const json& vehicles = field(j, "vehicles");
    if (!vehicles.is_array()) corrupt("bad vehicles");
    for (const auto& v : vehicles) {
      const json& done = field(v, "done");
      if (!done.is_boolean()) corrupt("bad done flag");
      f.vehicles[str(v, "id")] = {num(v, "x"), num(v, "y"), num(v, "yaw"), num(v, "v"),
                                  done.get<bool>()};
    }
    const json& lights = field(j, "lights");
    if (!lights.is_array()) corrupt("bad lights");
    for (const auto& l : lights) {
      f.lights[str(l, "id")] = {color(l, "ew"), color(l, "ns"), num(l, "since")};
    }
    log.frames.push_back(std::move(f));
  }

  const json trailer = parse_line(lines.back(), lines.size());
  if (str(trailer, "type") != "trailer") corrupt("missing trailer");
  if (str(trailer, "frames_digest") != sha256_hex(body)) corrupt("frames digest mismatch");
  const json& collisions = field(trailer, "collisions");
  if (!collisions.is_array()) corrupt("bad collisions");
  for (const auto& c : collisions) {
    log.collisions.push_back({num(c, "t"), str(c, "a"), str(c, "b")});
  }
  return log;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::kIoError, "read failed for " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::kIoError, "write failed for " + path.string());
}

void write_log(const SimLog& log, const std::filesystem::path& path) {
  write_text_file(path, serialize_log(log));
}

SimLog read_log(const std::filesystem::path& path) { return parse_log(read_text_file(path)); }

}  // namespace ccity
