#include "hnlb/trafficgen.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "hnlb/error.hpp"

namespace hnlb {

FiveTuple connection_tuple(std::uint32_t k, const Vip& vip) {
  return FiveTuple{vip.protocol,
                   Ipv4::from_octets(10, 1, static_cast<std::uint8_t>(k >> 8),
                                     static_cast<std::uint8_t>(k & 0xff)),
                   static_cast<std::uint16_t>(1024 + k), vip.ip, vip.port};
}

void validate(const WorkloadSpec& spec) {
  if (!(spec.offered_rate > 0) || !std::isfinite(spec.offered_rate))
    throw Error(Errc::InvalidSpec, "offered rate must be positive");
  if (!(spec.duration_s > 0) || !std::isfinite(spec.duration_s))
    throw Error(Errc::InvalidSpec, "duration must be positive");
  if (spec.nb_conn < 1 || spec.nb_conn > kMaxConnections)
    throw Error(Errc::InvalidSpec, "nb_conn out of range: " + std::to_string(spec.nb_conn));
  if (spec.pkt_size < kMinPacketSize || spec.pkt_size > kMaxPacketSize)
    throw Error(Errc::InvalidSpec, "packet size out of range: " + std::to_string(spec.pkt_size));
}

namespace {

std::uint64_t spaced_arrival(std::uint64_t i, double rate) {
  return static_cast<std::uint64_t>(std::floor(static_cast<long double>(i) * 1e9L / rate));
}

// Unbiased enough for n << 2^64 and, unlike uniform_int_distribution,
// identical on every standard library.
std::uint32_t draw_below(std::mt19937_64& rng, std::uint32_t n) {
  return static_cast<std::uint32_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace

std::vector<Packet> generate(const WorkloadSpec& spec) {
  validate(spec);
  const auto count = static_cast<std::uint64_t>(
      std::floor(static_cast<long double>(spec.offered_rate) * spec.duration_s + 1e-9L));
  std::vector<FiveTuple> tuples;
  tuples.reserve(spec.nb_conn);
  for (std::uint32_t k = 0; k < spec.nb_conn; ++k) tuples.push_back(connection_tuple(k, spec.vip));

  std::mt19937_64 rng(spec.seed);
  std::vector<Packet> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t k = spec.scheduler == ConnectionScheduler::RoundRobin
                                ? static_cast<std::uint32_t>(i % spec.nb_conn)
                                : draw_below(rng, spec.nb_conn);
    out.push_back(Packet{tuples[k], spec.pkt_size, spaced_arrival(i, spec.offered_rate), i});
  }
  return out;
}

std::vector<Packet> connection_openers(const WorkloadSpec& spec, double rate) {
  if (!(rate > 0)) throw Error(Errc::InvalidSpec, "opener rate must be positive");
  std::vector<Packet> out;
  out.reserve(spec.nb_conn);
  for (std::uint32_t k = 0; k < spec.nb_conn; ++k)
    out.push_back(Packet{connection_tuple(k, spec.vip), spec.pkt_size, spaced_arrival(k, rate), k});
  return out;
}

namespace {

template <typename T>
bool parse_uint(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
}

[[noreturn]] void bad_line(std::size_t line, const std::string& why) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + why);
}

Packet parse_record(std::string_view line, std::size_t line_no) {
  std::string_view fields[7];
  std::size_t n = 0;
  while (true) {
    const auto comma = line.find(',');
    if (n == 7) bad_line(line_no, "too many fields");
    fields[n++] = line.substr(0, comma);
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  if (n != 7) bad_line(line_no, "expected 7 fields, got " + std::to_string(n));

  Packet p;
  std::uint32_t src_port = 0, dst_port = 0;
  if (!parse_uint(fields[0], p.arrival_ns)) bad_line(line_no, "bad arrival_ns");
  auto proto = parse_protocol(fields[1]);
  if (!proto) bad_line(line_no, "bad protocol");
  auto src = Ipv4::parse(fields[2]);
  auto dst = Ipv4::parse(fields[4]);
  if (!src) bad_line(line_no, "bad src_ip");
  if (!dst) bad_line(line_no, "bad dst_ip");
  if (!parse_uint(fields[3], src_port) || src_port > 0xffff) bad_line(line_no, "bad src_port");
  if (!parse_uint(fields[5], dst_port) || dst_port > 0xffff) bad_line(line_no, "bad dst_port");
  if (!parse_uint(fields[6], p.size_bytes) || p.size_bytes < kMinPacketSize ||
      p.size_bytes > kMaxPacketSize)
    bad_line(line_no, "bad size");
  p.tuple = FiveTuple{*proto, *src, static_cast<std::uint16_t>(src_port), *dst,
                      static_cast<std::uint16_t>(dst_port)};
  return p;
}

}  // namespace

std::vector<Packet> read_trace(std::istream& in) {
  std::vector<Packet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    Packet p = parse_record(line, line_no);
    if (!out.empty() && p.arrival_ns < out.back().arrival_ns)
      throw Error(Errc::TraceOrderError, "line " + std::to_string(line_no) + ": arrival " +
                                             std::to_string(p.arrival_ns) + " precedes " +
                                             std::to_string(out.back().arrival_ns));
    p.seq = out.size();
    out.push_back(p);
  }
  return out;
}

std::vector<Packet> load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  return read_trace(in);
}

void write_trace(std::ostream& out, std::span<const Packet> packets) {
  out << "# arrival_ns,proto,src_ip,src_port,dst_ip,dst_port,size\n";
  for (const Packet& p : packets) {
    out << p.arrival_ns << ',' << to_string(p.tuple.protocol) << ',' << p.tuple.src_ip.str() << ','
        << p.tuple.src_port << ',' << p.tuple.dst_ip.str() << ',' << p.tuple.dst_port << ','
        << p.size_bytes << '\n';
  }
}

void save_trace(const std::filesystem::path& path, std::span<const Packet> packets) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::ConfigError, "cannot write " + path.string());
  write_trace(out, packets);
}

}  // namespace hnlb
