#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pathagg {

using Symbol = std::uint8_t;

// Ordered set of distinct characters. Symbol indices follow the order given.
class Alphabet {
 public:
  explicit Alphabet(std::string symbols);

  static Alphabet dna() { return Alphabet("acgt"); }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbols() const noexcept { return symbols_; }
  char symbol(Symbol index) const { return symbols_.at(index); }

  std::optional<Symbol> find(char c) const noexcept;
  bool contains(char c) const noexcept { return find(c).has_value(); }

  // Throws InvalidInput naming the first character outside the alphabet.
  std::vector<Symbol> encode(std::string_view text) const;
  std::string decode(std::span<const Symbol> symbols) const;

  bool operator==(const Alphabet& other) const noexcept { return symbols_ == other.symbols_; }

 private:
  std::string symbols_;
  std::array<std::int16_t, 256> lookup_;
};

}  // namespace pathagg
