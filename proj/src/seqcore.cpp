#include "seqdesign/seqcore.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace seqdesign {

Alphabet::Alphabet(std::string symbols, char pad) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw std::invalid_argument("alphabet: no symbols");
    std::fill(std::begin(lookup_), std::end(lookup_), -1);
    for (size_t i = 0; i < symbols_.size(); ++i) {
        const auto c = static_cast<unsigned char>(symbols_[i]);
        if (lookup_[c] >= 0) {
            throw std::invalid_argument(std::string("alphabet: duplicate symbol '") +
                                        symbols_[i] + "'");
        }
        lookup_[c] = static_cast<int>(i);
    }
    pad_index_ = index_of(pad);
    if (pad_index_ < 0) throw std::invalid_argument("alphabet: pad symbol not in alphabet");
}

Alphabet Alphabet::amino_acids() {
    return Alphabet("ACDEFGHIKLMNPQRSTVWY-", '-');
}

int Alphabet::index_of(char c) const {
    return lookup_[static_cast<unsigned char>(c)];
}

char Alphabet::symbol(int index) const {
    if (index < 0 || index >= size()) {
        throw std::out_of_range("alphabet: symbol index out of range (mask has no symbol)");
    }
    return symbols_[static_cast<size_t>(index)];
}

bool Sequence::contains_mask(const Alphabet& alphabet) const {
    const int m = alphabet.mask_index();
    return std::any_of(ids.begin(), ids.end(), [m](int id) { return id == m; });
}

int Sequence::hamming_distance(const Sequence& other) const {
    if (ids.size() != other.ids.size()) {
        throw std::invalid_argument("hamming_distance: length mismatch");
    }
    int d = 0;
    for (size_t i = 0; i < ids.size(); ++i) d += (ids[i] != other.ids[i]);
    return d;
}

PositionMask PositionMask::all(int length, bool value) {
    return PositionMask(std::vector<bool>(static_cast<size_t>(length), value));
}

int PositionMask::count_conserved() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), true));
}

PositionMask PositionMask::inverted() const {
    PositionMask out = *this;
    out.bits.flip();
    return out;
}

std::vector<FastaRecord> parse_fasta(std::string_view text, const Alphabet& alphabet) {
    std::vector<FastaRecord> records;
    bool in_record = false;
    int line_number = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_number;
        if (!line.empty()) {
            if (line.front() == '>') {
                records.push_back({std::string(line.substr(1)), ""});
                in_record = true;
            } else {
                if (!in_record) {
                    throw std::runtime_error("fasta: residue data before first '>' header at line " +
                                             std::to_string(line_number));
                }
                for (char raw : line) {
                    if (std::isspace(static_cast<unsigned char>(raw))) continue;
                    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
                    if (!alphabet.contains(c)) {
                        throw std::runtime_error(std::string("fasta: symbol '") + c +
                                                 "' at line " + std::to_string(line_number) +
                                                 " is not in the alphabet");
                    }
                    records.back().residues.push_back(c);
                }
            }
        }
        if (eol >= text.size()) break;
        pos = eol + 1;
    }
    return records;
}

Sequence encode(const FastaRecord& record, const Alphabet& alphabet, int length) {
    const int n = static_cast<int>(record.residues.size());
    if (n > length) {
        throw std::invalid_argument("encode: record '" + record.id + "' has " +
                                    std::to_string(n) + " residues, exceeds length " +
                                    std::to_string(length));
    }
    Sequence out;
    out.ids.reserve(static_cast<size_t>(length));
    for (char c : record.residues) out.ids.push_back(alphabet.index_of(c));
    out.ids.resize(static_cast<size_t>(length), alphabet.pad_index());
    return out;
}

std::string decode(const Sequence& sequence, const Alphabet& alphabet,
                   bool strip_trailing_pads) {
    std::string out;
    out.reserve(sequence.ids.size());
    for (int id : sequence.ids) out.push_back(alphabet.symbol(id));
    if (strip_trailing_pads) {
        const char pad = alphabet.pad_symbol();
        while (!out.empty() && out.back() == pad) out.pop_back();
    }
    return out;
}

Sequence merge_conserved(const Sequence& sample, const Sequence& seed,
                         const PositionMask& mask) {
    if (sample.length() != seed.length() || sample.length() != mask.length()) {
        throw std::invalid_argument("merge_conserved: length mismatch");
    }
    Sequence out = sample;
    for (int i = 0; i < out.length(); ++i) {
        if (mask[i]) out[i] = seed[i];
    }
    return out;
}

} // namespace seqdesign
