#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "seqdesign/rng.hpp"
#include "seqdesign/seqcore.hpp"

using namespace seqdesign;

TEST_CASE("alphabet layout") {
    const Alphabet a = Alphabet::amino_acids();
    CHECK(a.size() == 21);
    CHECK(a.vocab_size() == 22);
    CHECK(a.mask_index() == 21);
    CHECK(a.pad_symbol() == '-');
    CHECK(a.index_of('A') == 0);
    CHECK(a.index_of('Z') == -1);
    CHECK_THROWS(Alphabet("AAC", '-'));  // duplicate symbol
    CHECK_THROWS(Alphabet("AC", '-'));   // pad not in alphabet
}

TEST_CASE("parse_fasta basics") {
    const Alphabet a = Alphabet::amino_acids();
    auto records = parse_fasta(">a\nACD-", a);
    REQUIRE(records.size() == 1);
    CHECK(records[0].id == "a");
    CHECK(records[0].residues == "ACD-");

    CHECK(parse_fasta("", a).empty());

    records = parse_fasta(">x\nacd\n>y\nWY\nGG\n", a);
    REQUIRE(records.size() == 2);
    CHECK(records[0].residues == "ACD");  // uppercased
    CHECK(records[1].residues == "WYGG"); // multi-line body
}

TEST_CASE("parse_fasta rejects out-of-alphabet residue naming the symbol") {
    const Alphabet a = Alphabet::amino_acids();
    try {
        parse_fasta(">a\nACZ", a);
        FAIL("expected error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find('Z') != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }
    CHECK_THROWS(parse_fasta("ACD\n>a\nACD", a));  // data before header
}

TEST_CASE("parse_fasta never drops records") {
    const Alphabet a = Alphabet::amino_acids();
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::string text;
        int headers = 0;
        const int n = rng.uniform_int(6);
        for (int i = 0; i < n; ++i) {
            text += ">rec" + std::to_string(i) + "\n";
            ++headers;
            const int len = rng.uniform_int(8);
            for (int j = 0; j < len; ++j) {
                text += a.symbol(rng.uniform_int(a.size()));
            }
            text += "\n";
        }
        CHECK(parse_fasta(text, a).size() == static_cast<size_t>(headers));
    }
}

TEST_CASE("encode pads right and rejects overlong") {
    const Alphabet a = Alphabet::amino_acids();
    const Sequence s = encode({"r", "AC"}, a, 4);
    CHECK(s.ids == std::vector<int>{0, 1, a.pad_index(), a.pad_index()});

    const Sequence exact = encode({"r", "ACDE"}, a, 4);
    CHECK(exact.ids == std::vector<int>{0, 1, 2, 3});

    CHECK_THROWS(encode({"r", "ACDEF"}, a, 4));
}

TEST_CASE("encode/decode round-trips") {
    const Alphabet a = Alphabet::amino_acids();
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = 1 + rng.uniform_int(12);
        const int filled = rng.uniform_int(len + 1);
        std::string residues;
        for (int j = 0; j < filled; ++j) residues += a.symbol(rng.uniform_int(a.size()));
        const Sequence s = encode({"r", residues}, a, len);
        CHECK(decode(s, a, false).size() == static_cast<size_t>(len));
        // Stripping trailing pads recovers the original unless it had its own
        // trailing pads, which stripping also removes.
        std::string want = residues;
        while (!want.empty() && want.back() == a.pad_symbol()) want.pop_back();
        CHECK(decode(s, a, true) == want);
        CHECK(encode({"r", decode(s, a, false)}, a, len) == s);
    }
}

TEST_CASE("merge_conserved per-position rule") {
    const Alphabet a = Alphabet::amino_acids();
    const Sequence seed = encode({"s", "AA"}, a, 2);
    const Sequence sample = encode({"x", "CC"}, a, 2);

    CHECK(merge_conserved(sample, seed, PositionMask::all(2, true)) == seed);
    CHECK(merge_conserved(sample, seed, PositionMask::all(2, false)) == sample);

    const PositionMask mixed(std::vector<bool>{true, false});
    const Sequence merged = merge_conserved(sample, seed, mixed);
    CHECK(merged.ids == std::vector<int>{a.index_of('A'), a.index_of('C')});

    CHECK_THROWS(merge_conserved(sample, encode({"s", "AAA"}, a, 3), mixed));
}

TEST_CASE("merge_conserved is idempotent") {
    const Alphabet a = Alphabet::amino_acids();
    Rng rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const int len = 1 + rng.uniform_int(10);
        Sequence seed, sample;
        std::vector<bool> bits;
        for (int i = 0; i < len; ++i) {
            seed.ids.push_back(rng.uniform_int(a.size()));
            sample.ids.push_back(rng.uniform_int(a.size()));
            bits.push_back(rng.uniform() < 0.5);
        }
        const PositionMask mask(bits);
        const Sequence once = merge_conserved(sample, seed, mask);
        CHECK(merge_conserved(once, seed, mask) == once);
    }
}

TEST_CASE("hamming distance and mask helpers") {
    const Alphabet a = Alphabet::amino_acids();
    const Sequence x = encode({"x", "ACDE"}, a, 4);
    const Sequence y = encode({"y", "ACDA"}, a, 4);
    CHECK(x.hamming_distance(y) == 1);
    CHECK(x.hamming_distance(x) == 0);
    CHECK_FALSE(x.contains_mask(a));
    Sequence masked = x;
    masked[2] = a.mask_index();
    CHECK(masked.contains_mask(a));

    const PositionMask m(std::vector<bool>{true, false, true, false});
    CHECK(m.count_conserved() == 2);
    CHECK(m.inverted().count_conserved() == 2);
    CHECK(m.inverted()[0] == false);
}
