#pragma once

#include <string>

#include "timebin/analysis.hpp"
#include "timebin/correlator.hpp"
#include "timebin/eventgen.hpp"

namespace timebin {

/// Binary timetag file: little-endian "TTAG" magic, one version byte, a
/// uint32 JSON header length plus the header blob (run metadata: duration,
/// rep rate, seed, params digest), then fixed 9-byte records of 1-byte
/// channel and 8-byte unsigned picosecond timestamp.
void write_ttag(const std::string& path, const TimeTagStream& stream);
TimeTagStream read_ttag(const std::string& path);

/// CSV interchange format: header "channel,time_ps".
void write_tags_csv(const std::string& path, const TimeTagStream& stream);
TimeTagStream read_tags_csv(const std::string& path);

// CSV payloads for plotting; headers carry units.
void write_csv(const std::string& path, const Jti& jti);
void write_csv(const std::string& path, const DelayHistogram& hist);
void write_csv(const std::string& path, const Jti2dCounts& counts);
void write_csv(const std::string& path, const BellCurve& curve);

}  // namespace timebin
