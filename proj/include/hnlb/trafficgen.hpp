#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "hnlb/types.hpp"

namespace hnlb {

enum class ConnectionScheduler { Uniform, RoundRobin };

struct WorkloadSpec {
  std::uint32_t nb_conn = 1;
  std::uint32_t pkt_size = 64;
  double offered_rate = 1e6;  // packets per second
  double duration_s = 1.0;
  std::uint64_t seed = 1;
  Vip vip{Ipv4::from_octets(42, 3, 4, 5), 443, Protocol::TCP};
  ConnectionScheduler scheduler = ConnectionScheduler::Uniform;
};

inline constexpr std::uint32_t kMaxConnections = 65535 - 1024;

// Client side of connection k: TCP 10.1.(k >> 8).(k & 0xff) : 1024 + k -> vip.
FiveTuple connection_tuple(std::uint32_t k, const Vip& vip);

// Throws Errc::InvalidSpec on a non-positive rate or duration, a connection
// count outside [1, kMaxConnections] or a size outside [64, 1518].
void validate(const WorkloadSpec& spec);

// floor(rate * duration) packets spaced 1/rate apart starting at t = 0;
// connection per packet drawn uniformly (or cycled) from a seeded stream.
std::vector<Packet> generate(const WorkloadSpec& spec);

// One packet per connection, in connection order, spaced 1/rate apart.
std::vector<Packet> connection_openers(const WorkloadSpec& spec, double rate);

// Trace lines: arrival_ns,proto,src_ip,src_port,dst_ip,dst_port,size
// Lines starting with '#' and blank lines are skipped; seq is the record
// index.
std::vector<Packet> read_trace(std::istream& in);
std::vector<Packet> load_trace(const std::filesystem::path& path);
void write_trace(std::ostream& out, std::span<const Packet> packets);
void save_trace(const std::filesystem::path& path, std::span<const Packet> packets);

}  // namespace hnlb
