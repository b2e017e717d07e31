#include "netreg/config_key.hpp"

#include <charconv>

namespace netreg {

std::string ConfigKey::to_string() const {
  auto b = [&](int k) { return std::to_string(blocks[static_cast<std::size_t>(k)] + 1); };
  switch (config) {
    case Config::Sigma2: return "sigma2:(" + b(0) + "," + b(1) + ")";
    case Config::PhiA: return "phiA:{" + b(0) + "," + b(1) + "}";
    case Config::PhiB: return "phiB:(" + b(0) + ",{" + b(1) + "," + b(2) + "})";
    case Config::PhiC: return "phiC:(" + b(0) + ",{" + b(1) + "," + b(2) + "})";
    case Config::PhiD: return "phiD:(" + b(0) + "," + b(1) + "," + b(2) + ")";
  }
  return "?";
}

std::optional<ConfigKey> ConfigKey::parse(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) return std::nullopt;
  const std::string name = s.substr(0, colon);
  std::array<int, 3> v{0, 0, 0};
  int count = 0;
  for (std::size_t pos = colon + 1; pos < s.size() && count < 3;) {
    char c = s[pos];
    if (c >= '0' && c <= '9') {
      int val = 0;
      auto [p, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), val);
      if (ec != std::errc()) return std::nullopt;
      v[static_cast<std::size_t>(count++)] = val - 1;
      pos = static_cast<std::size_t>(p - s.data());
    } else {
      ++pos;
    }
  }
  if (name == "sigma2" && count == 2) return sigma2(v[0], v[1]);
  if (name == "phiA" && count == 2) return phi_a(v[0], v[1]);
  if (name == "phiB" && count == 3) return phi_b(v[0], v[1], v[2]);
  if (name == "phiC" && count == 3) return phi_c(v[0], v[1], v[2]);
  if (name == "phiD" && count == 3) return phi_d(v[0], v[1], v[2]);
  return std::nullopt;
}

std::optional<ConfigKey> classify_pair(Dyad a, Dyad b,
                                       const BlockAssignment& g) {
  const int i = a.sender, j = a.receiver, k = b.sender, l = b.receiver;
  if (i == k && j == l) return ConfigKey::sigma2(g[i], g[j]);
  if (i == l && j == k) return ConfigKey::phi_a(g[i], g[j]);
  if (i == k) return ConfigKey::phi_b(g[i], g[j], g[l]);
  if (j == l) return ConfigKey::phi_c(g[j], g[i], g[k]);
  // Mixed sender/receiver overlap: the shared actor's block leads, then the
  // partner it sends to, then the partner it receives from.
  if (i == l) return ConfigKey::phi_d(g[i], g[j], g[k]);
  if (j == k) return ConfigKey::phi_d(g[j], g[l], g[i]);
  return std::nullopt;
}

std::map<ConfigKey, long long> enumerate_configurations(
    const BlockAssignment& g) {
  const int B = g.num_blocks;
  const auto sizes = g.block_sizes();
  std::map<ConfigKey, long long> counts;
  auto add = [&](const ConfigKey& key, long long c) {
    if (c > 0) counts[key] += c;
  };
  auto excl = [&](int b, int u) {
    return static_cast<long long>(sizes[static_cast<std::size_t>(b)]) -
           (b == u ? 1 : 0);
  };
  for (int u = 0; u < B; ++u) {
    const long long nu = sizes[static_cast<std::size_t>(u)];
    for (int v = 0; v < B; ++v) {
      const long long nv = sizes[static_cast<std::size_t>(v)];
      add(ConfigKey::sigma2(u, v), u == v ? nu * (nu - 1) : nu * nv);
      if (v >= u)
        add(ConfigKey::phi_a(u, v), u == v ? nu * (nu - 1) : 2 * nu * nv);
      for (int w = v; w < B; ++w) {
        const long long mv = excl(v, u);
        const long long mw = excl(w, u);
        const long long pairs = (v == w) ? mv * (mv - 1) : 2 * mv * mw;
        add(ConfigKey::phi_b(u, v, w), nu * pairs);
        add(ConfigKey::phi_c(u, v, w), nu * pairs);
      }
      for (int w = 0; w < B; ++w) {
        const long long mv = excl(v, u);
        const long long mw = excl(w, u);
        const long long pairs = mv * mw - (v == w ? mv : 0);
        add(ConfigKey::phi_d(u, v, w), nu * pairs);
      }
    }
  }
  return counts;
}

}  // namespace netreg
