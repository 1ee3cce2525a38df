#include "muxloop/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace muxloop::io {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary: LF endings everywhere
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

void write_meta(std::ofstream& f, const Metadata& meta) {
  for (const auto& [k, v] : meta) f << "# " << k << ": " << v << "\n";
}

bool parse_i64(std::string_view s, std::int64_t* out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void write_tags(const std::string& path, const sim::TagData& data,
                const Metadata& meta) {
  std::ofstream f = open_out(path);
  f << kTagsHeader << "\n";
  f << "# duration_ps: " << data.duration_ps << "\n";
  write_meta(f, meta);
  for (const sim::EventRecord& e : data.events) {
    f << static_cast<int>(e.channel) << '\t' << e.timestamp_ps << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

TagFile read_tags(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  TagFile out;
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(f, line)) throw ParseError("empty tag file", 1);
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTagsHeader) {
    throw ParseError("missing tag header '" + std::string(kTagsHeader) + "'",
                     lineno);
  }

  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      // "# key: value"
      const auto colon = line.find(':', 1);
      if (colon != std::string::npos) {
        std::string key = line.substr(1, colon - 1);
        std::string value = line.substr(colon + 1);
        const auto strip = [](std::string& s) {
          const auto b = s.find_first_not_of(" \t");
          const auto e = s.find_last_not_of(" \t");
          s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        strip(key);
        strip(value);
        out.meta[key] = value;
      }
      continue;
    }
    const auto tab = line.find('\t');
    std::int64_t ch = 0, ts = 0;
    if (tab == std::string::npos ||
        !parse_i64(std::string_view(line).substr(0, tab), &ch) ||
        !parse_i64(std::string_view(line).substr(tab + 1), &ts)) {
      throw ParseError("malformed tag line '" + line + "'", lineno);
    }
    out.stream.channels[static_cast<int>(ch)].push_back(ts);
  }
  out.stream.sort_channels();
  if (const auto it = out.meta.find("duration_ps"); it != out.meta.end()) {
    std::int64_t d = 0;
    if (parse_i64(it->second, &d)) out.stream.duration_ps = d;
  }
  if (out.stream.duration_ps == 0) {
    // fall back to the last tag
    for (const auto& [id, tags] : out.stream.channels) {
      if (!tags.empty()) {
        out.stream.duration_ps = std::max(out.stream.duration_ps, tags.back());
      }
    }
  }
  return out;
}

namespace {

std::string command_str(const std::optional<fsm::SwitchCommand>& c) {
  if (!c) return "-";
  std::ostringstream os;
  os << fsm::to_string(c->action) << ':' << c->at_time_ps << ':' << c->width_ps;
  return os.str();
}

std::string state_str(const fsm::FsmState& s) {
  if (s.phase == fsm::Phase::Storing) {
    return std::string("storing:") + std::to_string(s.remaining_round_trips);
  }
  return fsm::to_string(s.phase);
}

std::string event_str(const fsm::FsmEvent& e) {
  if (e.kind == fsm::FsmEvent::Kind::HeraldClick) {
    return std::string("herald:") + std::to_string(e.bin);
  }
  return fsm::to_string(e.kind);
}

}  // namespace

void write_trace(const std::string& path,
                 const std::vector<fsm::FsmTrace>& traces, const Metadata& meta) {
  std::ofstream f = open_out(path);
  f << kTraceHeader << "\n";
  write_meta(f, meta);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    f << "# cycle_trace: " << i << "\n";
    for (const fsm::TraceEntry& e : traces[i]) {
      f << e.time_ps << '\t' << event_str(e.event) << '\t' << state_str(e.before)
        << '\t' << state_str(e.after) << '\t' << command_str(e.command) << "\n";
    }
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::map<int, std::string> read_channel_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::map<int, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line == "channel_id,role") continue;
    const auto comma = line.find(',');
    std::int64_t id = 0;
    if (comma == std::string::npos ||
        !parse_i64(std::string_view(line).substr(0, comma), &id)) {
      throw ParseError("malformed channel map line '" + line + "'", lineno);
    }
    out[static_cast<int>(id)] = line.substr(comma + 1);
  }
  return out;
}

void write_channel_map(const std::string& path) {
  std::ofstream f = open_out(path);
  f << "channel_id,role\n"
       "0,herald\n"
       "1,signal\n"
       "2,signal_a\n"
       "3,signal_b\n"
       "4,switch_cmd\n";
}

}  // namespace muxloop::io
