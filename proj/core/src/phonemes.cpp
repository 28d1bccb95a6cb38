#include "cadence/phonemes.hpp"

#include <sstream>

namespace cadence {

std::string phonemes_to_text(const PhonemeSequence& seq) {
  std::ostringstream os;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (i > 0) os << ' ';
    os << seq.ids[i];
  }
  return os.str();
}

PhonemeSequence phonemes_from_text(const std::string& text, int inventory) {
  PhonemeSequence seq;
  seq.inventory = inventory;
  std::istringstream is(text);
  std::string token;
  while (is >> token) {
    try {
      std::size_t used = 0;
      int id = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      seq.ids.push_back(id);
    } catch (const std::exception&) {
      throw DataError("bad phoneme token '" + token + "'");
    }
  }
  seq.validate();
  return seq;
}

}  // namespace cadence
