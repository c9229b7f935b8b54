#include "pathagg/alphabet.hpp"

#include "pathagg/error.hpp"

namespace pathagg {

Alphabet::Alphabet(std::string symbols) : symbols_(std::move(symbols)) {
  lookup_.fill(-1);
  if (symbols_.empty()) throw InvalidConfiguration("alphabet must not be empty");
  if (symbols_.size() > 255) throw InvalidConfiguration("alphabet too large");
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto c = static_cast<unsigned char>(symbols_[i]);
    if (lookup_[c] >= 0) {
      throw InvalidConfiguration(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
    }
    lookup_[c] = static_cast<std::int16_t>(i);
  }
}

std::optional<Symbol> Alphabet::find(char c) const noexcept {
  auto idx = lookup_[static_cast<unsigned char>(c)];
  if (idx < 0) return std::nullopt;
  return static_cast<Symbol>(idx);
}

std::vector<Symbol> Alphabet::encode(std::string_view text) const {
  std::vector<Symbol> out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto idx = lookup_[static_cast<unsigned char>(text[i])];
    if (idx < 0) {
      throw InvalidInput(std::string("symbol '") + text[i] + "' at offset " + std::to_string(i) +
                         " is not in alphabet \"" + symbols_ + "\"");
    }
    out.push_back(static_cast<Symbol>(idx));
  }
  return out;
}

std::string Alphabet::decode(std::span<const Symbol> symbols) const {
  std::string out;
  out.reserve(symbols.size());
  for (Symbol s : symbols) out.push_back(symbols_.at(s));
  return out;
}

}  // namespace pathagg
