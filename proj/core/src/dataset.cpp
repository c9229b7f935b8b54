#include "pathagg/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pathagg/error.hpp"

namespace pathagg {

double Dataset::mean_length() const {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : examples) total += static_cast<double>(ex.sequence.size());
  return total / static_cast<double>(examples.size());
}

void validate(const Dataset& dataset, const Alphabet& alphabet) {
  for (std::size_t i = 0; i < dataset.examples.size(); ++i) {
    const auto& ex = dataset.examples[i];
    if (ex.sequence.empty()) {
      throw InvalidInput("example " + std::to_string(i) + ": empty sequence");
    }
    if (!std::isfinite(ex.response)) {
      throw InvalidInput("example " + std::to_string(i) + ": non-finite response");
    }
    for (char c : ex.sequence) {
      if (!alphabet.contains(c)) {
        throw InvalidInput("example " + std::to_string(i) + ": symbol '" + std::string(1, c) +
                           "' is not in alphabet \"" + alphabet.symbols() + "\"");
      }
    }
  }
}

EncodedDataset encode(const Dataset& dataset, const Alphabet& alphabet) {
  validate(dataset, alphabet);
  EncodedDataset out;
  out.sequences.reserve(dataset.size());
  out.responses.reserve(dataset.size());
  for (const auto& ex : dataset.examples) {
    out.sequences.push_back(alphabet.encode(ex.sequence));
    out.responses.push_back(ex.response);
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw InvalidInput("cannot format number");
  return std::string(buf, ptr);
}

double parse_double(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw InvalidInput("not a number: \"" + std::string(token) + "\"");
  }
  return value;
}

Dataset parse_dataset(std::string_view text, const Alphabet& alphabet) {
  Dataset dataset;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError(line_no, "expected sequence<TAB>response");
    }
    std::string_view seq = line.substr(0, tab);
    std::string_view resp = line.substr(tab + 1);
    if (resp.find('\t') != std::string_view::npos) {
      throw ParseError(line_no, "too many fields");
    }
    if (seq.empty()) throw ParseError(line_no, "empty sequence");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (!alphabet.contains(seq[i])) {
        throw InvalidInput("line " + std::to_string(line_no) + ": symbol '" +
                           std::string(1, seq[i]) + "' is not in alphabet \"" + alphabet.symbols() +
                           "\"");
      }
    }
    double y = 0.0;
    try {
      y = parse_double(resp);
    } catch (const InvalidInput& e) {
      throw ParseError(line_no, e.what());
    }
    if (!std::isfinite(y)) throw ParseError(line_no, "non-finite response");
    dataset.examples.push_back({std::string(seq), y});
  }
  if (dataset.empty()) throw ParseError(line_no, "dataset contains no examples");
  return dataset;
}

std::string format_dataset(const Dataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.examples) {
    out += ex.sequence;
    out += '\t';
    out += format_double(ex.response);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InvalidInput("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path, const Alphabet& alphabet) {
  return parse_dataset(read_file(path), alphabet);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file(path, format_dataset(dataset));
}

}  // namespace pathagg
