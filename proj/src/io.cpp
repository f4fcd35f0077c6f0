#include "timebin/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "timebin/errors.hpp"

namespace timebin {

namespace {

constexpr char kMagic[4] = {'T', 'T', 'A', 'G'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

}  // namespace

void write_ttag(const std::string& path, const TimeTagStream& stream) {
  nlohmann::ordered_json header;
  header["n_pulses"] = stream.header.n_pulses;
  header["rep_rate_mhz"] = stream.header.rep_rate_mhz;
  header["duration_ps"] = stream.header.duration_ps;
  header["seed"] = stream.header.seed;
  header["params_digest"] = stream.header.params_digest;
  std::string blob = header.dump();

  std::string out;
  out.reserve(9 + blob.size() + 9 * stream.events.size());
  out.append(kMagic, 4);
  out.push_back(static_cast<char>(kVersion));
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out += blob;
  for (const TagEvent& e : stream.events) {
    if (e.time_ps < 0)
      throw DataError("write_ttag: negative timestamp cannot be encoded");
    out.push_back(static_cast<char>(e.channel));
    put_u64(out, static_cast<std::uint64_t>(e.time_ps));
  }
  std::ofstream f = open_out(path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing: " + path);
}

TimeTagStream read_ttag(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  if (data.size() < 9 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw DataError("not a TTAG file: " + path);
  if (data[4] != kVersion) throw DataError("unsupported TTAG version");
  std::uint32_t hlen = get_u32(data.data() + 5);
  std::size_t offset = 9 + static_cast<std::size_t>(hlen);
  if (data.size() < offset) throw DataError("truncated TTAG header");

  TimeTagStream stream;
  try {
    auto header = nlohmann::json::parse(data.begin() + 9, data.begin() + offset);
    stream.header.n_pulses = header.value("n_pulses", 0ull);
    stream.header.rep_rate_mhz = header.value("rep_rate_mhz", 0.0);
    stream.header.duration_ps = header.value("duration_ps", 0.0);
    stream.header.seed = header.value("seed", 0ull);
    stream.header.params_digest = header.value("params_digest", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad TTAG header JSON: ") + e.what());
  }

  std::size_t payload = data.size() - offset;
  if (payload % 9 != 0)
    throw DataError("truncated TTAG record", static_cast<long long>(payload / 9));
  std::size_t n = payload / 9;
  stream.events.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = data.data() + offset + 9 * i;
    stream.events.push_back(
        {rec[0], static_cast<std::int64_t>(get_u64(rec + 1))});
  }
  return stream;
}

void write_tags_csv(const std::string& path, const TimeTagStream& stream) {
  std::ofstream f = open_out(path);
  f << "channel,time_ps\n";
  for (const TagEvent& e : stream.events)
    f << static_cast<int>(e.channel) << ',' << e.time_ps << '\n';
  if (!f) throw IoError("failed writing: " + path);
}

TimeTagStream read_tags_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  TimeTagStream stream;
  std::string line;
  if (!std::getline(f, line) || line.rfind("channel,time_ps", 0) != 0)
    throw DataError("tag CSV missing header: " + path);
  long long record = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    int channel;
    long long t;
    if (std::sscanf(line.c_str(), "%d,%lld", &channel, &t) != 2 || channel < 0 ||
        channel > 255)
      throw DataError("bad tag CSV record", record);
    stream.events.push_back({static_cast<std::uint8_t>(channel), t});
    ++record;
  }
  return stream;
}

void write_csv(const std::string& path, const Jti& jti) {
  std::ofstream f = open_out(path);
  f << "t_signal_ps,t_idler_ps,probability\n";
  for (int i = 0; i < jti.axis.n_bins; ++i)
    for (int j = 0; j < jti.axis.n_bins; ++j)
      f << format_double(jti.axis.center(i)) << ',' << format_double(jti.axis.center(j))
        << ',' << format_double(jti.at(i, j)) << '\n';
  if (!f) throw IoError("failed writing: " + path);
}

void write_csv(const std::string& path, const DelayHistogram& hist) {
  std::ofstream f = open_out(path);
  f << "delay_ps,mass\n";
  for (int i = 0; i < hist.axis.n_bins; ++i)
    f << format_double(hist.axis.center(i)) << ',' << format_double(hist.mass[i]) << '\n';
  if (!f) throw IoError("failed writing: " + path);
}

void write_csv(const std::string& path, const Jti2dCounts& counts) {
  std::ofstream f = open_out(path);
  f << "t_signal_ps,t_idler_ps,counts\n";
  for (int i = 0; i < counts.axis.n_bins; ++i)
    for (int j = 0; j < counts.axis.n_bins; ++j)
      f << format_double(counts.axis.center(i)) << ',' << format_double(counts.axis.center(j))
        << ',' << counts.at(i, j) << '\n';
  if (!f) throw IoError("failed writing: " + path);
}

void write_csv(const std::string& path, const BellCurve& curve) {
  std::ofstream f = open_out(path);
  f << "actuator_phase_rad,fringe_arg_rad,coincidences,accidentals,integration_s\n";
  for (const BellPoint& p : curve.points)
    f << format_double(p.actuator_phase_rad) << ',' << format_double(p.fringe_arg_rad) << ','
      << format_double(p.coincidences) << ',' << format_double(p.accidentals) << ','
      << format_double(p.integration_s) << '\n';
  if (!f) throw IoError("failed writing: " + path);
}

}  // namespace timebin
