#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "netreg/network.hpp"

namespace netreg {

// The five nonzero covariance configurations of a pair of dyads that share
// an actor: same dyad, reciprocal, common sender, common receiver, and the
// mixed case where one actor sends in one dyad and receives in the other.
enum class Config : std::uint8_t { Sigma2, PhiA, PhiB, PhiC, PhiD };

inline const char* config_name(Config c) {
  switch (c) {
    case Config::Sigma2: return "sigma2";
    case Config::PhiA: return "phiA";
    case Config::PhiB: return "phiB";
    case Config::PhiC: return "phiC";
    case Config::PhiD: return "phiD";
  }
  return "?";
}

// Configuration type plus its block pattern. Blocks are 0-based; patterns:
//   Sigma2 (u,v) ordered       PhiA {u,v} unordered
//   PhiB (u,{v,w})             PhiC (u,{v,w})
//   PhiD (u,v,w) ordered, shared actor's block first.
// Unordered components are stored sorted, so equal patterns compare equal.
struct ConfigKey {
  Config config;
  std::array<int, 3> blocks{0, 0, 0};
  int arity = 0;

  static ConfigKey sigma2(int u, int v) { return {Config::Sigma2, {u, v, 0}, 2}; }
  static ConfigKey phi_a(int u, int v) {
    if (u > v) std::swap(u, v);
    return {Config::PhiA, {u, v, 0}, 2};
  }
  static ConfigKey phi_b(int u, int v, int w) {
    if (v > w) std::swap(v, w);
    return {Config::PhiB, {u, v, w}, 3};
  }
  static ConfigKey phi_c(int u, int v, int w) {
    if (v > w) std::swap(v, w);
    return {Config::PhiC, {u, v, w}, 3};
  }
  static ConfigKey phi_d(int u, int v, int w) { return {Config::PhiD, {u, v, w}, 3}; }

  friend bool operator<(const ConfigKey& a, const ConfigKey& b) {
    if (a.config != b.config) return a.config < b.config;
    return a.blocks < b.blocks;
  }
  friend bool operator==(const ConfigKey& a, const ConfigKey& b) {
    return a.config == b.config && a.blocks == b.blocks;
  }

  // Wire format, 1-based blocks: sigma2:(2,1), phiA:{1,2}, phiB:(1,{1,2}),
  // phiD:(1,2,1).
  std::string to_string() const;
  static std::optional<ConfigKey> parse(const std::string& s);
};

struct Dyad {
  int sender;
  int receiver;
};

// Classifies an ordered pair of dyads. Returns nullopt for structurally zero
// (disjoint) pairs. Total on valid dyads: exactly one outcome per pair.
std::optional<ConfigKey> classify_pair(Dyad a, Dyad b,
                                       const BlockAssignment& g);

// Sizes |Phi_{M,q}| of the configuration sets under (n, g): every ordered
// dyad pair for sigma2/phiA/phiB/phiC, and the canonical [(i,j),(k,i)]
// orientation for phiD. Keys with empty sets are absent.
std::map<ConfigKey, long long> enumerate_configurations(
    const BlockAssignment& g);

}  // namespace netreg
