#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace seqdesign {

// Token alphabet for aligned fixed-length sequences. The data alphabet
// includes the pad symbol; the absorbing [MASK] token is appended one index
// past the data alphabet and never appears in clean data.
class Alphabet {
public:
    Alphabet(std::string symbols, char pad);

    static Alphabet amino_acids();  // 20 residues + '-' pad, mask at index 21

    int size() const { return static_cast<int>(symbols_.size()); }  // data tokens
    int vocab_size() const { return size() + 1; }                   // + [MASK]
    int mask_index() const { return size(); }
    int pad_index() const { return pad_index_; }
    char pad_symbol() const { return symbols_[pad_index_]; }

    bool contains(char c) const { return index_of(c) >= 0; }
    int index_of(char c) const;  // -1 if absent
    char symbol(int index) const;

    const std::string& symbols() const { return symbols_; }

private:
    std::string symbols_;
    int pad_index_;
    int lookup_[256];
};

// Fixed-length token-id vector. Clean sequences contain no mask ids.
struct Sequence {
    std::vector<int> ids;

    Sequence() = default;
    explicit Sequence(std::vector<int> v) : ids(std::move(v)) {}

    int length() const { return static_cast<int>(ids.size()); }
    int& operator[](int i) { return ids[static_cast<size_t>(i)]; }
    int operator[](int i) const { return ids[static_cast<size_t>(i)]; }
    bool operator==(const Sequence& other) const { return ids == other.ids; }

    bool contains_mask(const Alphabet& alphabet) const;
    int hamming_distance(const Sequence& other) const;
};

// Per-position conservation flags; true = conserved (immutable).
struct PositionMask {
    std::vector<bool> bits;

    PositionMask() = default;
    explicit PositionMask(std::vector<bool> b) : bits(std::move(b)) {}
    static PositionMask all(int length, bool value);

    int length() const { return static_cast<int>(bits.size()); }
    bool operator[](int i) const { return bits[static_cast<size_t>(i)]; }
    int count_conserved() const;
    PositionMask inverted() const;
};

struct FastaRecord {
    std::string id;
    std::string residues;
};

// Parses FASTA text. Residues are uppercased and validated against the data
// alphabet; the offending symbol and line number are reported on failure.
std::vector<FastaRecord> parse_fasta(std::string_view text, const Alphabet& alphabet);

// Encodes a record to length L, right-padding with the pad token.
Sequence encode(const FastaRecord& record, const Alphabet& alphabet, int length);

// Inverse of encode; optionally strips trailing pads.
std::string decode(const Sequence& sequence, const Alphabet& alphabet,
                   bool strip_trailing_pads = false);

// Returns seed at conserved positions and sample elsewhere.
Sequence merge_conserved(const Sequence& sample, const Sequence& seed,
                         const PositionMask& mask);

} // namespace seqdesign
