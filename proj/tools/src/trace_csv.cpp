#include "pbcnet/cli/trace_csv.hpp"

#include <fmt/format.h>

#include <iterator>
#include <ostream>

namespace pbcnet::cli {

std::vector<std::string> trace_columns(const std::vector<std::string>& ids) {
  std::vector<std::string> cols{"t"};
  for (const auto& id : ids) {
    for (const char* prefix : {"i_", "v_", "mu_", "psup_"}) cols.push_back(prefix + id);
  }
  cols.push_back("H_total");
  cols.push_back("dHdt");
  for (const auto& id : ids) cols.push_back("E_" + id);
  cols.push_back("R_load_eff");
  return cols;
}

void write_trace_csv(std::ostream& out, const Trace& trace, const std::vector<std::string>& ids) {
  const auto cols = trace_columns(ids);
  fmt::memory_buffer buf;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c > 0) buf.push_back(',');
    fmt::format_to(std::back_inserter(buf), "{}", cols[c]);
  }
  buf.push_back('\n');
  // Shortest round-trip representation keeps the file lossless and byte-stable.
  for (const TraceRecord& r : trace) {
    fmt::format_to(std::back_inserter(buf), "{}", r.t);
    for (const LeafSample& s : r.leaves) {
      fmt::format_to(std::back_inserter(buf), ",{},{},{},{}", s.current, s.voltage, s.duty, s.supplied);
    }
    fmt::format_to(std::back_inserter(buf), ",{},{}", r.storage, r.storage_rate);
    for (double e : r.effective_sources) fmt::format_to(std::back_inserter(buf), ",{}", e);
    fmt::format_to(std::back_inserter(buf), ",{}\n", r.effective_load);
    if (buf.size() > (1u << 20)) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

}  // namespace pbcnet::cli
