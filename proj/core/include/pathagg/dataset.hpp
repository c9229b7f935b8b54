#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pathagg/alphabet.hpp"

namespace pathagg {

struct LabeledSequence {
  std::string sequence;
  double response = 0.0;

  bool operator==(const LabeledSequence&) const = default;
};

struct Dataset {
  std::vector<LabeledSequence> examples;

  std::size_t size() const noexcept { return examples.size(); }
  bool empty() const noexcept { return examples.empty(); }
  double mean_length() const;

  bool operator==(const Dataset&) const = default;
};

// Sequences pre-encoded against an alphabet; the form consumed by inference
// and training.
struct EncodedDataset {
  std::vector<std::vector<Symbol>> sequences;
  std::vector<double> responses;

  std::size_t size() const noexcept { return sequences.size(); }
  bool empty() const noexcept { return sequences.empty(); }
};

// Throws InvalidInput for empty sequences, non-finite responses, or symbols
// outside the alphabet; the message names the offending example.
EncodedDataset encode(const Dataset& dataset, const Alphabet& alphabet);
void validate(const Dataset& dataset, const Alphabet& alphabet);

// Tab-separated text: one `sequence<TAB>response` per line, `#` comments,
// LF line endings. Responses are written in shortest round-trip form, so
// save followed by load reproduces every example exactly.
Dataset parse_dataset(std::string_view text, const Alphabet& alphabet);
std::string format_dataset(const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path, const Alphabet& alphabet);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);
// Strict parse of a full token; throws InvalidInput on trailing garbage.
double parse_double(std::string_view token);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace pathagg
