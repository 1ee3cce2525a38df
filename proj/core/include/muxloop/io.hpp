#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "muxloop/fsm.hpp"
#include "muxloop/sim.hpp"
#include "muxloop/tags.hpp"

// Line-oriented text formats:
//   tags:   header "#muxloop-tags v1", then "channel_id<TAB>timestamp_ps"
//   traces: header "#muxloop-trace v1", then
//           "time_ps<TAB>event<TAB>state_before<TAB>state_after<TAB>command"
// "# key: value" comment lines carry run metadata. LF line endings.
namespace muxloop::io {

inline constexpr const char* kTagsHeader = "#muxloop-tags v1";
inline constexpr const char* kTraceHeader = "#muxloop-trace v1";

using Metadata = std::vector<std::pair<std::string, std::string>>;

void write_tags(const std::string& path, const sim::TagData& data,
                const Metadata& meta = {});

struct TagFile {
  tags::TagStream stream;
  std::map<std::string, std::string> meta;
};

TagFile read_tags(const std::string& path);

void write_trace(const std::string& path,
                 const std::vector<fsm::FsmTrace>& traces,
                 const Metadata& meta = {});

// Optional CSV sidecar "channel_id,role".
std::map<int, std::string> read_channel_map(const std::string& path);
void write_channel_map(const std::string& path);

}  // namespace muxloop::io
