#include "hnlb/types.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_set>

#include "hnlb/error.hpp"

namespace hnlb {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::UnknownVip: return "UnknownVip";
    case Errc::ConsistencyViolation: return "ConsistencyViolation";
    case Errc::InvalidQueue: return "InvalidQueue";
    case Errc::InvalidOp: return "InvalidOp";
    case Errc::UndefinedWindow: return "UndefinedWindow";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ParseError: return "ParseError";
    case Errc::TraceOrderError: return "TraceOrderError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::SearchRangeError: return "SearchRangeError";
  }
  return "Unknown";
}

std::string_view to_string(Protocol p) { return p == Protocol::UDP ? "UDP" : "TCP"; }

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "TCP" || s == "tcp" || s == "6") return Protocol::TCP;
  if (s == "UDP" || s == "udp" || s == "17") return Protocol::UDP;
  return std::nullopt;
}

std::optional<Ipv4> Ipv4::parse(std::string_view dotted) {
  std::uint32_t value = 0;
  const char* p = dotted.data();
  const char* end = dotted.data() + dotted.size();
  for (int octet = 0; octet < 4; ++octet) {
    if (octet > 0) {
      if (p == end || *p != '.') return std::nullopt;
      ++p;
    }
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || next == p || next - p > 3 || part > 255) return std::nullopt;
    value = (value << 8) | part;
    p = next;
  }
  if (p != end) return std::nullopt;
  return Ipv4{value};
}

std::string Ipv4::str() const {
  return std::to_string(value >> 24) + '.' + std::to_string((value >> 16) & 0xff) + '.' +
         std::to_string((value >> 8) & 0xff) + '.' + std::to_string(value & 0xff);
}

std::array<std::uint8_t, kTupleEncodingSize> encode_tuple(const FiveTuple& t) {
  std::array<std::uint8_t, kTupleEncodingSize> out{};
  auto put32 = [&out](std::size_t at, std::uint32_t v) {
    out[at] = static_cast<std::uint8_t>(v >> 24);
    out[at + 1] = static_cast<std::uint8_t>(v >> 16);
    out[at + 2] = static_cast<std::uint8_t>(v >> 8);
    out[at + 3] = static_cast<std::uint8_t>(v);
  };
  auto put16 = [&out](std::size_t at, std::uint16_t v) {
    out[at] = static_cast<std::uint8_t>(v >> 8);
    out[at + 1] = static_cast<std::uint8_t>(v);
  };
  out[0] = static_cast<std::uint8_t>(t.protocol);
  put32(1, t.src_ip.value);
  put16(5, t.src_port);
  put32(7, t.dst_ip.value);
  put16(11, t.dst_port);
  return out;
}

std::uint64_t hash_five_tuple(const FiveTuple& t) {
  constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  std::uint64_t h = kOffsetBasis;
  for (std::uint8_t byte : encode_tuple(t)) {
    h ^= byte;
    h *= kPrime;
  }
  return h;
}

Packet rewrite_packet(Packet p, const Dip& d) {
  p.tuple.dst_ip = d.ip;
  p.tuple.dst_port = d.port;
  return p;
}

void VipTable::add(const Vip& vip, std::vector<Dip> pool) {
  if (pool.empty()) throw Error(Errc::ConfigError, "VIP " + vip.ip.str() + " has an empty pool");
  std::unordered_set<std::uint32_t> seen;
  for (const Dip& d : pool) {
    if (!seen.insert(d.index).second)
      throw Error(Errc::ConfigError, "duplicate Dip index " + std::to_string(d.index));
  }
  if (!entries_.emplace(vip, Entry{std::move(pool), 0}).second)
    throw Error(Errc::ConfigError, "VIP " + vip.ip.str() + " registered twice");
}

Dip VipTable::select_dip(const Vip& vip) {
  auto it = entries_.find(vip);
  if (it == entries_.end())
    throw Error(Errc::UnknownVip, vip.ip.str() + ":" + std::to_string(vip.port));
  Entry& e = it->second;
  Dip chosen = e.pool[e.cursor];
  e.cursor = (e.cursor + 1) % e.pool.size();
  return chosen;
}

bool VipTable::contains(const Vip& vip) const { return entries_.contains(vip); }

const std::vector<Dip>& VipTable::pool(const Vip& vip) const {
  auto it = entries_.find(vip);
  if (it == entries_.end())
    throw Error(Errc::UnknownVip, vip.ip.str() + ":" + std::to_string(vip.port));
  return it->second.pool;
}

std::vector<std::pair<Vip, std::vector<Dip>>> VipTable::pools() const {
  std::vector<std::pair<Vip, std::vector<Dip>>> out;
  out.reserve(entries_.size());
  for (const auto& [vip, entry] : entries_) out.emplace_back(vip, entry.pool);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

std::optional<Dip> ConnectionTable::lookup(const FiveTuple& t) const {
  auto it = entries_.find(t);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ConnectionTable::install(const FiveTuple& t, const Dip& d) {
  auto [it, inserted] = entries_.try_emplace(t, d);
  if (!inserted && !(it->second == d))
    throw Error(Errc::ConsistencyViolation,
                "connection already mapped to Dip index " + std::to_string(it->second.index));
}

}  // namespace hnlb
