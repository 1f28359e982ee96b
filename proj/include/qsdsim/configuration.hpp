#pragma once

// Finite point measures on the trait space, stored as a sorted flat
// sequence of (trait, weight) entries.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsdsim/errors.hpp"
#include "qsdsim/trait_space.hpp"

namespace qsdsim {

namespace detail {
/// Shortest-safe round-trip text for a double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}
}  // namespace detail

struct Entry {
  TraitPoint trait;
  std::uint32_t weight = 0;

  friend bool operator==(const Entry&, const Entry&) = default;
};

/// Finite point measure eta. Entries are strictly increasing in trait and
/// every weight is at least 1; the empty sequence is the void configuration.
class Configuration {
 public:
  Configuration() = default;

  static Configuration singleton(TraitPoint y, std::uint32_t weight = 1) {
    Configuration c;
    if (weight > 0) {
      c.entries_.push_back({y, weight});
      c.mass_ = weight;
    }
    return c;
  }

  /// Builds from arbitrary entries: sorts, merges equal traits, drops zero weights.
  static Configuration from_entries(std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.trait < b.trait; });
    Configuration c;
    for (const Entry& e : entries) {
      if (e.weight == 0) continue;
      if (!c.entries_.empty() && c.entries_.back().trait == e.trait)
        c.entries_.back().weight += e.weight;
      else
        c.entries_.push_back(e);
      c.mass_ += e.weight;
    }
    return c;
  }

  bool empty() const noexcept { return entries_.empty(); }
  /// ||eta||
  std::uint64_t mass() const noexcept { return mass_; }
  /// #eta
  std::size_t support_size() const noexcept { return entries_.size(); }
  std::span<const Entry> entries() const noexcept { return entries_; }

  std::uint32_t weight_of(TraitPoint y) const noexcept {
    auto it = find(y);
    return it != entries_.end() && it->trait == y ? it->weight : 0;
  }
  bool contains(TraitPoint y) const noexcept { return weight_of(y) > 0; }

  std::vector<std::uint32_t> weights() const {
    std::vector<std::uint32_t> w;
    w.reserve(entries_.size());
    for (const Entry& e : entries_) w.push_back(e.weight);
    return w;
  }

  /// eta + delta_z, in place.
  void add(TraitPoint z) {
    auto it = find(z);
    if (it != entries_.end() && it->trait == z)
      ++it->weight;
    else
      entries_.insert(it, Entry{z, 1});
    ++mass_;
  }

  /// eta - delta_y, in place. Throws TraitAbsent if y is not in the support.
  void remove(TraitPoint y) {
    auto it = find(y);
    if (it == entries_.end() || it->trait != y)
      throw TraitAbsent("trait " + detail::format_double(y.value()) + " not in support");
    if (--it->weight == 0) entries_.erase(it);
    --mass_;
  }

  Configuration added(TraitPoint z) const {
    Configuration c = *this;
    c.add(z);
    return c;
  }
  Configuration removed(TraitPoint y) const {
    Configuration c = *this;
    c.remove(y);
    return c;
  }

  /// Index function H^i: the trait of the i-th individual (1-based) when the
  /// individuals are listed entry by entry in support order. Requires 1 <= i <= mass.
  TraitPoint individual(std::uint64_t i) const {
    std::uint64_t cumulative = 0;
    for (const Entry& e : entries_) {
      cumulative += e.weight;
      if (i <= cumulative) return e.trait;
    }
    throw std::out_of_range("individual index beyond total mass");
  }

  /// "w1@t1;w2@t2;..." with 17 significant digits; the void configuration is "0".
  std::string serialize() const {
    if (entries_.empty()) return "0";
    std::string out;
    for (const Entry& e : entries_) {
      if (!out.empty()) out += ';';
      out += std::to_string(e.weight);
      out += '@';
      out += detail::format_double(e.trait.value());
    }
    return out;
  }

  static Configuration parse(std::string_view text) {
    if (text == "0") return {};
    if (text.empty()) throw ParseError("empty configuration text");
    std::vector<Entry> entries;
    while (!text.empty()) {
      auto semi = text.find(';');
      std::string_view item = text.substr(0, semi);
      auto at = item.find('@');
      if (at == std::string_view::npos) throw ParseError("missing '@' in '" + std::string(item) + "'");
      std::uint32_t w = 0;
      double t = 0.0;
      auto wtext = item.substr(0, at);
      auto ttext = item.substr(at + 1);
      auto [wp, we] = std::from_chars(wtext.data(), wtext.data() + wtext.size(), w);
      auto [tp, te] = std::from_chars(ttext.data(), ttext.data() + ttext.size(), t);
      if (we != std::errc{} || wp != wtext.data() + wtext.size() || w == 0)
        throw ParseError("bad weight in '" + std::string(item) + "'");
      if (te != std::errc{} || tp != ttext.data() + ttext.size() || !(t >= 0.0 && t <= 1.0))
        throw ParseError("bad trait in '" + std::string(item) + "'");
      entries.push_back({TraitPoint(t), w});
      if (semi == std::string_view::npos) break;
      text = text.substr(semi + 1);
      if (text.empty()) throw ParseError("trailing ';'");
    }
    return from_entries(std::move(entries));
  }

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.entries_ == b.entries_;
  }

 private:
  using Iter = std::vector<Entry>::iterator;
  using ConstIter = std::vector<Entry>::const_iterator;

  Iter find(TraitPoint y) {
    return std::lower_bound(entries_.begin(), entries_.end(), y,
                            [](const Entry& e, TraitPoint v) { return e.trait < v; });
  }
  ConstIter find(TraitPoint y) const {
    return std::lower_bound(entries_.begin(), entries_.end(), y,
                            [](const Entry& e, TraitPoint v) { return e.trait < v; });
  }

  std::vector<Entry> entries_;
  std::uint64_t mass_ = 0;
};

struct MassAndSupport {
  std::uint64_t total_mass = 0;
  std::size_t support_size = 0;
  std::vector<std::uint32_t> weights;
};

inline MassAndSupport mass_and_support(const Configuration& c) {
  return {c.mass(), c.support_size(), c.weights()};
}

}  // namespace qsdsim
