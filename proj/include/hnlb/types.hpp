#pragma once

// Packets, addresses and the two software tables of a stateful L4 load
// balancer: the VIP table (service -> backend pool) and the connection table
// (5-tuple -> chosen backend).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hnlb {

enum class Protocol : std::uint8_t { TCP = 6, UDP = 17 };

std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);

// Host-order IPv4 address.
struct Ipv4 {
  std::uint32_t value = 0;

  static constexpr Ipv4 from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c,
                                    std::uint8_t d) {
    return Ipv4{(std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) |
                std::uint32_t{d}};
  }
  static std::optional<Ipv4> parse(std::string_view dotted);
  std::string str() const;

  friend constexpr bool operator==(Ipv4, Ipv4) = default;
  friend constexpr auto operator<=>(Ipv4, Ipv4) = default;
};

struct FiveTuple {
  Protocol protocol = Protocol::TCP;
  Ipv4 src_ip;
  std::uint16_t src_port = 0;
  Ipv4 dst_ip;
  std::uint16_t dst_port = 0;

  friend constexpr bool operator==(const FiveTuple&, const FiveTuple&) = default;
  friend constexpr auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

inline constexpr std::size_t kTupleEncodingSize = 13;

// protocol(1) | src_ip(4, BE) | src_port(2, BE) | dst_ip(4, BE) | dst_port(2, BE)
std::array<std::uint8_t, kTupleEncodingSize> encode_tuple(const FiveTuple& t);

// FNV-1a 64 over encode_tuple(t).
std::uint64_t hash_five_tuple(const FiveTuple& t);

struct FiveTupleHash {
  std::size_t operator()(const FiveTuple& t) const noexcept {
    return static_cast<std::size_t>(hash_five_tuple(t));
  }
};

inline constexpr std::uint32_t kMinPacketSize = 64;
inline constexpr std::uint32_t kMaxPacketSize = 1518;

struct Packet {
  FiveTuple tuple;
  std::uint32_t size_bytes = kMinPacketSize;
  std::uint64_t arrival_ns = 0;
  std::uint64_t seq = 0;

  friend bool operator==(const Packet&, const Packet&) = default;
};

struct Vip {
  Ipv4 ip;
  std::uint16_t port = 0;
  Protocol protocol = Protocol::TCP;

  friend constexpr bool operator==(const Vip&, const Vip&) = default;
  friend constexpr auto operator<=>(const Vip&, const Vip&) = default;
};

struct Dip {
  Ipv4 ip;
  std::uint16_t port = 0;
  std::uint32_t index = 0;  // unique within its pool

  friend constexpr bool operator==(const Dip&, const Dip&) = default;
};

inline Vip vip_of(const FiveTuple& t) { return Vip{t.dst_ip, t.dst_port, t.protocol}; }

// Replaces the destination half of the tuple by the backend; everything else
// (source half, protocol, size, timing) is untouched.
Packet rewrite_packet(Packet p, const Dip& d);

enum class DipPolicy { RoundRobin };

class VipTable {
 public:
  // Registers a service with its backend pool. The pool must be non-empty and
  // its Dip indices distinct; re-registering a VIP is an error.
  void add(const Vip& vip, std::vector<Dip> pool);

  // Returns the Dip under the cursor and advances it (round robin, starting at
  // index 0). Throws Errc::UnknownVip.
  Dip select_dip(const Vip& vip);

  bool contains(const Vip& vip) const;
  const std::vector<Dip>& pool(const Vip& vip) const;
  std::size_t size() const { return entries_.size(); }
  DipPolicy policy() const { return DipPolicy::RoundRobin; }

  // Pools in VIP order, for building queue encodings.
  std::vector<std::pair<Vip, std::vector<Dip>>> pools() const;

 private:
  struct Entry {
    std::vector<Dip> pool;
    std::size_t cursor = 0;
  };
  struct VipHash {
    std::size_t operator()(const Vip& v) const noexcept {
      return (std::size_t{v.ip.value} << 24) ^ (std::size_t{v.port} << 8) ^
             static_cast<std::size_t>(v.protocol);
    }
  };
  std::unordered_map<Vip, Entry, VipHash> entries_;
};

// Append-only software connection table.
class ConnectionTable {
 public:
  std::optional<Dip> lookup(const FiveTuple& t) const;

  // Idempotent for the same Dip; a different Dip for an existing key throws
  // Errc::ConsistencyViolation and leaves the table untouched.
  void install(const FiveTuple& t, const Dip& d);

  std::size_t size() const { return entries_.size(); }
  void reserve(std::size_t n) { entries_.reserve(n); }

 private:
  std::unordered_map<FiveTuple, Dip, FiveTupleHash> entries_;
};

}  // namespace hnlb
